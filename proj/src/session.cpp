#include <cmath>

#include "srcid/service.hpp"
#include "srcid/sihc.hpp"

namespace srcid {

Session::Session(SourcePartSet parts, DatasetInfo info, std::optional<GroundTruth> truth)
    : parts_(std::move(parts)), info_(std::move(info)), truth_(std::move(truth)) {}

std::unique_ptr<Session> Session::load(const std::filesystem::path& dir) {
  DatasetInfo info;
  SourcePartSet parts = load_part_set(dir, &info);
  std::optional<GroundTruth> truth;
  const auto truth_path = dir / "ground_truth.json";
  if (std::filesystem::exists(truth_path)) truth = ground_truth_from_json(read_json_file(truth_path));
  return std::make_unique<Session>(std::move(parts), std::move(info), std::move(truth));
}

int Session::revision() const {
  std::shared_lock lock(state_mutex_);
  return revision_;
}

Json Session::summary() const {
  const Histogram2D hist = build_histogram(parts_);
  Json configs = Json::array();
  for (const auto& c : info_.configs) configs.push_back(to_json(c));
  Json per_config = Json::array();
  for (std::size_t c = 0; c < info_.configs.size(); ++c)
    per_config.push_back(parts_.for_config(static_cast<int>(c)).size());
  const Json ranges = {
      {"sind",
       {{"t_I", {{"min_exclusive", 0}}},
        {"t_A", {{"min", 0}}},
        {"t_sigma_level", {{"min", 1}, {"max", 5}}},
        {"eps_A", {{"min_exclusive", 0}, {"max_exclusive", 1}}},
        {"max_sources", {{"min", 1}}},
        {"scale", Json::array({"raw", "log"})}}},
      {"sihc",
       {{"t", {{"min", 2}}},
        {"min_samples", {{"min", 0}}},
        {"t_sigma_level", {{"min", 1}, {"max", 5}}},
        {"mach_exponent", {{"min_exclusive", 0}}},
        {"frequency_axis", Json::array({"strouhal", "helmholtz"})},
        {"normalization", Json::array({"global", "per_config"})},
        {"selection", Json::array({"eom", "leaf"})}}}};
  std::shared_lock lock(state_mutex_);
  return {{"revision", revision_},
          {"seed", info_.seed},
          {"grid", to_json(info_.grid)},
          {"configs", configs},
          {"part_count", parts_.size()},
          {"parts_per_config", per_config},
          {"has_ground_truth", truth_.has_value()},
          {"histogram", {{"n1", info_.grid.n1}, {"n2", info_.grid.n2}, {"counts", hist.counts()}}},
          {"defaults", {{"sind", to_json(SindParams{})}, {"sihc", to_json(SihcParams{})}}},
          {"ranges", ranges}};
}

Json Session::identify(const Json& request) {
  check_fields(request, {"method", "params", "alignment"}, "request");
  const std::string m = get_string(request, "method", "", "request");
  if (m != "sind" && m != "sihc") throw Error(ErrorKind::config, "request.method: expected one of sind|sihc");
  const Method method = m == "sind" ? Method::sind : Method::sihc;
  const Json params = request.contains("params") ? request.at("params") : Json::object();
  IdentifyOptions options;
  if (method == Method::sind) {
    options.sind = sind_params_from_json(params, {}, "params");
    try {
      options.sind.validate(parts_.grid());
    } catch (const Error& e) {
      throw Error(ErrorKind::config, std::string("params: ") + e.what());
    }
  } else {
    options.sihc = sihc_params_from_json(params, {}, "params");
  }
  if (request.contains("alignment")) {
    const Json& a = request.at("alignment");
    check_fields(a, {"enabled", "reference_config"}, "alignment");
    options.alignment.enabled = get_bool(a, "enabled", false, "alignment");
    options.alignment.reference_config = get_int(a, "reference_config", 0, "alignment");
    if (options.alignment.reference_config < 0 ||
        options.alignment.reference_config >= static_cast<int>(parts_.configs().size()))
      throw Error(ErrorKind::config, "alignment.reference_config: out of range");
  }

  std::unique_lock busy(identify_mutex_, std::try_to_lock);
  if (!busy.owns_lock()) throw BusyError("an identification is already running");
  IdentificationRun run = run_identification(parts_, method, options);

  Json body;
  body["method"] = m;
  body["result"] = to_json(run.result);
  Json spectra = Json::array();
  for (std::size_t s = 0; s < run.spectra.size(); ++s)
    for (const auto& sp : run.spectra[s]) {
      Json j = to_json(sp);
      j["source"] = s;
      spectra.push_back(j);
    }
  body["spectra"] = spectra;
  if (!run.alignment.empty()) {
    Json a = Json::array();
    for (const auto& t : run.alignment) a.push_back(to_json(t));
    body["alignment"] = a;
  }
  if (truth_ && !truth_->sources.empty()) {
    const EvaluationReport rep = evaluate(parts_, run.result, *truth_, {}, &run.positions);
    body["evaluation"] = {{"reconstructed_fraction", rep.reconstructed_fraction},
                          {"mean_abs_error_db", rep.mean_abs_error_db ? Json(*rep.mean_abs_error_db) : Json(nullptr)},
                          {"max_position_error_deg",
                           rep.max_position_error_deg ? Json(*rep.max_position_error_deg) : Json(nullptr)}};
  }

  std::unique_lock lock(state_mutex_);
  const int rev = ++revision_;
  latest_[method] = Snapshot{std::move(run), rev};
  Json out = {{"revision", rev}};
  out.update(body);
  return out;
}

const Session::Snapshot* Session::find(int revision) const {
  for (const auto& [method, snap] : latest_)
    if (snap.revision == revision) return &snap;
  return nullptr;
}

std::optional<Json> Session::spectrum(int revision, int source, const std::string& axis, double mach_exponent) const {
  std::shared_lock lock(state_mutex_);
  const Snapshot* snap = find(revision);
  if (!snap || source < 0 || static_cast<std::size_t>(source) >= snap->run.spectra.size()) return std::nullopt;
  Json curves = Json::array();
  for (const Spectrum& sp : snap->run.spectra[static_cast<std::size_t>(source)]) {
    Json j = to_json(sp);
    const MeasurementConfig& cfg = info_.configs[static_cast<std::size_t>(sp.config_id)];
    j["mach"] = cfg.mach;
    if (axis != "frequency") {
      const FrequencyAxis fa = axis == "strouhal" ? FrequencyAxis::strouhal : FrequencyAxis::helmholtz;
      try {
        if (mach_exponent > 0.0) {
          const ScaledCurve c = scaled_spectrum_view(sp, cfg, mach_exponent, fa);
          Json y = Json::array();
          for (const auto& v : c.psd_db) y.push_back(v ? Json(*v) : Json(nullptr));
          j["x"] = c.x;
          j["psd_scaled_db"] = y;
        } else {
          Json x = Json::array();
          for (double f : sp.freqs_hz) x.push_back(fa == FrequencyAxis::strouhal ? strouhal(f, cfg) : helmholtz(f, cfg));
          j["x"] = x;
        }
      } catch (const Error& e) {
        // Strouhal number and Mach scaling are undefined at M = 0.
        j["x"] = nullptr;
        j["note"] = e.what();
      }
    }
    curves.push_back(j);
  }
  return Json{{"revision", revision}, {"source", source}, {"axis", axis}, {"spectra", curves}};
}

std::optional<Json> Session::export_roi(int revision) const {
  std::shared_lock lock(state_mutex_);
  const Snapshot* snap = find(revision);
  if (!snap) return std::nullopt;
  return roi_json(snap->run.result, parts_, revision);
}

}  // namespace srcid
