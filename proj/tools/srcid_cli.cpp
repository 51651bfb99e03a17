// Command-line driver: synth, beamform, identify, evaluate, serve.
//
// A JSON configuration file (--config) provides defaults; flags override it.
// Exit codes: 0 success, 2 configuration error, 3 input-data error, 1 other.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "srcid/srcid.h"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitInput = 3;

int exit_code(srcid_status s) {
  switch (s) {
    case SRCID_OK: return 0;
    case SRCID_ERR_CONFIG:
    case SRCID_ERR_NULL_ARGUMENT: return kExitConfig;
    case SRCID_ERR_INPUT:
    case SRCID_ERR_IO:
    case SRCID_ERR_SHAPE:
    case SRCID_ERR_RANGE:
    case SRCID_ERR_ESTIMATION:
    case SRCID_ERR_SINGULARITY:
    case SRCID_ERR_UNDEFINED: return kExitInput;
    default: return kExitOther;
  }
}

int report(srcid_status s) {
  if (s != SRCID_OK) std::cerr << "error: " << srcid_status_name(s) << ": " << srcid_last_error() << '\n';
  return exit_code(s);
}

struct Overrides {
  std::string config_file;
  std::string scenario, out, method;
  std::optional<std::uint64_t> seed;
  // SIND
  std::optional<double> t_I, t_A, sind_t_sigma, eps_A, eps_x;
  std::optional<int> max_sources;
  std::string scale;
  // SIHC
  std::optional<int> t, min_samples;
  std::optional<double> sihc_t_sigma, mach_exponent;
  bool no_mach_scaling = false;
  std::string frequency_axis, normalization, selection;
  // beamforming
  std::optional<double> loop_gain, stop_db, discard_below_db, freq_min, freq_max;
  std::optional<int> max_iter;
  bool no_diagonal_removal = false;
  // alignment and evaluation
  bool align = false;
  std::optional<int> align_reference;
  std::optional<double> min_snr_db;
};

void add_common(CLI::App* cmd, Overrides& o) {
  cmd->add_option("-c,--config", o.config_file, "JSON pipeline configuration file");
  cmd->add_option("--scenario", o.scenario, "Scenario JSON file");
  cmd->add_option("-o,--out", o.out, "Output directory");
  cmd->add_option("--method", o.method, "sind, sihc or both")->check(CLI::IsMember({"sind", "sihc", "both"}));
  cmd->add_option("--seed", o.seed, "Seed for all randomness");
  cmd->add_option("--t-I", o.t_I, "SIND intensity threshold t_I");
  cmd->add_option("--t-A", o.t_A, "SIND area threshold t_A");
  cmd->add_option("--sind-t-sigma", o.sind_t_sigma, "SIND sigma-level cutoff k");
  cmd->add_option("--eps-A", o.eps_A, "SIND relative amplitude bound");
  cmd->add_option("--eps-x", o.eps_x, "SIND center bound in meters");
  cmd->add_option("--max-sources", o.max_sources, "SIND source limit");
  cmd->add_option("--scale", o.scale, "SIND histogram scale: raw or log")->check(CLI::IsMember({"raw", "log"}));
  cmd->add_option("--t", o.t, "SIHC minimum cluster size t");
  cmd->add_option("--min-samples", o.min_samples, "SIHC core-distance neighbours (0: t)");
  cmd->add_option("--sihc-t-sigma", o.sihc_t_sigma, "SIHC sigma-level cutoff k");
  cmd->add_option("--mach-exponent", o.mach_exponent, "Mach scaling exponent n");
  cmd->add_flag("--no-mach-scaling", o.no_mach_scaling, "Cluster on unscaled PSD");
  cmd->add_option("--frequency-axis", o.frequency_axis, "strouhal or helmholtz")
      ->check(CLI::IsMember({"strouhal", "helmholtz"}));
  cmd->add_option("--normalization", o.normalization, "global or per_config")
      ->check(CLI::IsMember({"global", "per_config"}));
  cmd->add_option("--selection", o.selection, "eom or leaf")->check(CLI::IsMember({"eom", "leaf"}));
  cmd->add_option("--loop-gain", o.loop_gain, "CLEAN-SC loop gain");
  cmd->add_option("--max-iter", o.max_iter, "CLEAN-SC iteration limit");
  cmd->add_option("--stop-db", o.stop_db, "CLEAN-SC stop level below the initial peak, dB");
  cmd->add_flag("--no-diagonal-removal", o.no_diagonal_removal, "Keep the CSM diagonal");
  cmd->add_option("--discard-below-db", o.discard_below_db, "Drop parts this far below the per-bin peak");
  cmd->add_option("--freq-min", o.freq_min, "Lowest beamformed frequency, Hz");
  cmd->add_option("--freq-max", o.freq_max, "Highest beamformed frequency, Hz");
  cmd->add_flag("--align", o.align, "Align per-configuration maps before SIND");
  cmd->add_option("--align-reference", o.align_reference, "Reference configuration for alignment");
  cmd->add_option("--min-snr-db", o.min_snr_db, "Exclude bins below this SNR from |eps|");
}

template <class T>
void set_if(Json& j, const char* key, const std::optional<T>& v) {
  if (v) j[key] = *v;
}

void set_if(Json& j, const char* key, const std::string& v) {
  if (!v.empty()) j[key] = v;
}

// Config file merged with flag overrides; the file's directory becomes the base
// for relative paths inside it, flag paths are made absolute.
Json merged_config(const Overrides& o, std::string& base_dir) {
  Json j = Json::object();
  if (!o.config_file.empty()) {
    std::ifstream in(o.config_file);
    if (!in) throw std::runtime_error("cannot open " + o.config_file);
    std::stringstream ss;
    ss << in.rdbuf();
    j = Json::parse(ss.str());
    if (!j.is_object()) throw std::runtime_error(o.config_file + ": expected a JSON object");
    base_dir = fs::absolute(o.config_file).parent_path().string();
  }
  if (!o.scenario.empty()) j["scenario"] = fs::absolute(o.scenario).string();
  if (!o.out.empty()) j["output_dir"] = fs::absolute(o.out).string();
  set_if(j, "method", o.method);
  set_if(j, "seed", o.seed);

  auto section = [&j](const char* name) -> Json& {
    if (!j.contains(name)) j[name] = Json::object();
    return j[name];
  };
  Json sind = section("sind");
  set_if(sind, "t_I", o.t_I);
  set_if(sind, "t_A", o.t_A);
  set_if(sind, "t_sigma_level", o.sind_t_sigma);
  set_if(sind, "eps_A", o.eps_A);
  set_if(sind, "eps_x", o.eps_x);
  set_if(sind, "max_sources", o.max_sources);
  set_if(sind, "scale", o.scale);
  j["sind"] = sind;

  Json sihc = section("sihc");
  set_if(sihc, "t", o.t);
  set_if(sihc, "min_samples", o.min_samples);
  set_if(sihc, "t_sigma_level", o.sihc_t_sigma);
  set_if(sihc, "mach_exponent", o.mach_exponent);
  if (o.no_mach_scaling) sihc["mach_scaling"] = false;
  set_if(sihc, "frequency_axis", o.frequency_axis);
  set_if(sihc, "normalization", o.normalization);
  set_if(sihc, "selection", o.selection);
  j["sihc"] = sihc;

  Json clean = section("clean_sc");
  set_if(clean, "loop_gain", o.loop_gain);
  set_if(clean, "max_iter", o.max_iter);
  set_if(clean, "stop_db", o.stop_db);
  if (o.no_diagonal_removal) clean["diagonal_removal"] = false;
  j["clean_sc"] = clean;

  Json beam = section("beamforming");
  set_if(beam, "discard_below_db", o.discard_below_db);
  set_if(beam, "freq_min_hz", o.freq_min);
  set_if(beam, "freq_max_hz", o.freq_max);
  j["beamforming"] = beam;

  Json align = section("alignment");
  if (o.align) align["enabled"] = true;
  set_if(align, "reference_config", o.align_reference);
  j["alignment"] = align;

  Json eval = section("evaluation");
  set_if(eval, "min_snr_db", o.min_snr_db);
  j["evaluation"] = eval;
  return j;
}

using Command = srcid_status (*)(const char*, const char*, char**);

int run(Command cmd, const Overrides& o) {
  std::string base_dir;
  Json config;
  try {
    config = merged_config(o, base_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: configuration error: " << e.what() << '\n';
    return kExitConfig;
  }
  const std::string text = config.dump();
  char* log = nullptr;
  const srcid_status s = cmd(text.c_str(), base_dir.empty() ? nullptr : base_dir.c_str(), &log);
  if (log) {
    std::cout << log;
    srcid_string_free(log);
  }
  return report(s);
}

void on_ready(int port, void* user) {
  const auto* host = static_cast<const std::string*>(user);
  std::cout << "listening on http://" << *host << ':' << port << std::endl;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Source identification on beamforming source-part maps"};
  app.set_version_flag("--version", srcid_version());
  app.require_subcommand(1);

  Overrides o;
  auto* synth = app.add_subcommand("synth", "Synthesize array measurements and CSMs for a scenario");
  auto* beamform = app.add_subcommand("beamform", "CLEAN-SC beamforming into source-parts");
  auto* identify = app.add_subcommand("identify", "Identify sources with SIND and/or SIHC");
  auto* evaluate = app.add_subcommand("evaluate", "Evaluate results against the ground truth");
  for (auto* cmd : {synth, beamform, identify, evaluate}) add_common(cmd, o);

  auto* serve = app.add_subcommand("serve", "Serve an interactive session over HTTP");
  std::string dir, host = "127.0.0.1", static_dir;
  int port = 8080;
  serve->add_option("-d,--dir", dir, "Directory with parts.csv and dataset.json")->required();
  serve->add_option("--host", host, "Bind address");
  serve->add_option("-p,--port", port, "Port (0 picks a free one)")->check(CLI::Range(0, 65535));
  serve->add_option("--static", static_dir, "Directory of static UI assets");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (synth->parsed()) return run(srcid_cmd_synth, o);
  if (beamform->parsed()) return run(srcid_cmd_beamform, o);
  if (identify->parsed()) return run(srcid_cmd_identify, o);
  if (evaluate->parsed()) return run(srcid_cmd_evaluate, o);

  srcid_session* session = nullptr;
  if (const srcid_status s = srcid_session_open(dir.c_str(), &session); s != SRCID_OK) return report(s);
  const srcid_status s =
      srcid_session_serve(session, host.c_str(), port, static_dir.empty() ? nullptr : static_dir.c_str(), on_ready, &host);
  srcid_session_free(session);
  return report(s);
}
