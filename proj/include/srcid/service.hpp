#pragma once

// Interactive session over a loaded source-part set and its HTTP front end.

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>

#include "srcid/pipeline.hpp"

namespace srcid {

// Thrown by Session::identify when another identification is in flight.
class BusyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Session {
 public:
  Session(SourcePartSet parts, DatasetInfo info, std::optional<GroundTruth> truth = std::nullopt);
  // Loads parts.csv, dataset.json and, if present, ground_truth.json.
  static std::unique_ptr<Session> load(const std::filesystem::path& dir);

  const SourcePartSet& parts() const { return parts_; }
  int revision() const;

  // Grid, configurations, part count, histogram, seed, parameter defaults and ranges.
  Json summary() const;
  // Request: {"method": "sind"|"sihc", "params": {...}, "alignment": {...}}.
  // Throws Error(config) for malformed requests and BusyError when busy.
  Json identify(const Json& request);
  // nullopt when the revision or source is unknown. `axis` is "frequency",
  // "strouhal" or "helmholtz"; `mach_exponent` > 0 enables Mach scaling.
  std::optional<Json> spectrum(int revision, int source, const std::string& axis, double mach_exponent) const;
  std::optional<Json> export_roi(int revision) const;

 private:
  struct Snapshot {
    IdentificationRun run;
    int revision = 0;
  };

  const Snapshot* find(int revision) const;

  const SourcePartSet parts_;
  const DatasetInfo info_;
  const std::optional<GroundTruth> truth_;
  mutable std::shared_mutex state_mutex_;
  std::mutex identify_mutex_;
  int revision_ = 0;
  // Last result per method.
  std::map<Method, Snapshot> latest_;
};

class HttpService {
 public:
  // `static_dir`, when non-empty, is mounted at "/".
  HttpService(Session& session, std::filesystem::path static_dir = {});
  ~HttpService();
  HttpService(const HttpService&) = delete;
  HttpService& operator=(const HttpService&) = delete;

  // Binds to host:port (port 0 picks a free port) and returns the bound port.
  int bind(const std::string& host, int port);
  // Serves until stop() is called.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace srcid
