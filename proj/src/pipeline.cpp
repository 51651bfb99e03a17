#include "srcid/pipeline.hpp"

#include <cmath>
#include <sstream>

#include "srcid/parallel.hpp"
#include "srcid/sihc.hpp"

namespace srcid {

namespace fs = std::filesystem;

// ---- configuration documents

Scenario scenario_from_json(const Json& j) {
  check_fields(j, {"geometry", "grid", "configs", "sources", "duration_s", "seed", "reference_config"}, "scenario");
  Scenario s;
  if (!j.contains("geometry")) throw Error(ErrorKind::config, "scenario.geometry: required");
  s.geometry = geometry_from_json(j.at("geometry"), "scenario.geometry");
  if (j.contains("grid")) s.grid = grid_from_json(j.at("grid"), "scenario.grid");
  if (!j.contains("configs") || !j.at("configs").is_array() || j.at("configs").empty())
    throw Error(ErrorKind::config, "scenario.configs: at least one configuration required");
  for (std::size_t c = 0; c < j.at("configs").size(); ++c) {
    const std::string w = "scenario.configs[" + std::to_string(c) + "]";
    const Json& cj = j.at("configs")[c];
    s.configs.push_back(config_from_json(cj, w));
    s.noise_floor_db.push_back(get_number(cj, "noise_floor_db", -INFINITY, w));
  }
  if (j.contains("sources")) {
    if (!j.at("sources").is_array()) throw Error(ErrorKind::config, "scenario.sources: expected an array");
    for (std::size_t i = 0; i < j.at("sources").size(); ++i)
      s.sources.push_back(
          monopole_from_json(j.at("sources")[i], i + 1, "scenario.sources[" + std::to_string(i) + "]"));
  }
  s.duration_s = get_number(j, "duration_s", s.duration_s, "scenario");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw Error(ErrorKind::config, "scenario.seed: expected an unsigned integer");
    s.seed = j.at("seed").get<std::uint64_t>();
  }
  s.reference_config = get_int(j, "reference_config", 0, "scenario");
  if (s.reference_config < 0 || s.reference_config >= static_cast<int>(s.configs.size()))
    throw Error(ErrorKind::config, "scenario.reference_config: out of range");
  for (std::size_t i = 0; i < s.sources.size(); ++i) {
    try {
      for (const auto& c : s.configs) s.sources[i].validate(c.sample_rate_hz);
    } catch (const Error& e) {
      throw Error(ErrorKind::config, "scenario.sources[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return s;
}

Json to_json(const Scenario& s) {
  Json configs = Json::array();
  for (std::size_t c = 0; c < s.configs.size(); ++c) {
    Json cj = to_json(s.configs[c]);
    const double nf = s.noise_floor_db[c];
    cj["noise_floor_db"] = std::isfinite(nf) ? Json(nf) : Json("-inf");
    configs.push_back(cj);
  }
  Json sources = Json::array();
  for (const auto& m : s.sources) sources.push_back(to_json(m));
  return {{"geometry", to_json(s.geometry)}, {"grid", to_json(s.grid)},          {"configs", configs},
          {"sources", sources},              {"duration_s", s.duration_s},       {"seed", s.seed},
          {"reference_config", s.reference_config}};
}

namespace {

const char* selection_name(MethodSelection m) {
  return m == MethodSelection::sind ? "sind" : m == MethodSelection::sihc ? "sihc" : "both";
}

fs::path resolve(const fs::path& p, const fs::path& base) { return p.empty() || p.is_absolute() ? p : base / p; }

}  // namespace

PipelineConfig pipeline_config_from_json(const Json& j, const fs::path& base_dir) {
  check_fields(j, {"scenario", "output_dir", "method", "seed", "sind", "sihc", "clean_sc", "beamforming", "alignment",
                   "evaluation"},
               "config");
  PipelineConfig c;
  c.scenario = resolve(get_string(j, "scenario", "", "config"), base_dir);
  c.output_dir = resolve(get_string(j, "output_dir", c.output_dir.string(), "config"), base_dir);
  const std::string m = get_string(j, "method", "both", "config");
  if (m == "sind") c.method = MethodSelection::sind;
  else if (m == "sihc") c.method = MethodSelection::sihc;
  else if (m == "both") c.method = MethodSelection::both;
  else throw Error(ErrorKind::config, "config.method: expected one of sind|sihc|both");
  if (j.contains("seed")) {
    if (!j.at("seed").is_number_unsigned()) throw Error(ErrorKind::config, "config.seed: expected an unsigned integer");
    c.seed = j.at("seed").get<std::uint64_t>();
  }
  if (j.contains("sind")) c.identify.sind = sind_params_from_json(j.at("sind"), {}, "config.sind");
  if (j.contains("sihc")) c.identify.sihc = sihc_params_from_json(j.at("sihc"), {}, "config.sihc");
  if (j.contains("clean_sc")) c.beamforming.clean_sc = clean_sc_params_from_json(j.at("clean_sc"), {}, "config.clean_sc");
  if (j.contains("beamforming")) {
    const Json& b = j.at("beamforming");
    check_fields(b, {"discard_below_db", "freq_min_hz", "freq_max_hz"}, "config.beamforming");
    c.beamforming.discard_below_db = get_number(b, "discard_below_db", c.beamforming.discard_below_db, "config.beamforming");
    c.beamforming.freq_min_hz = get_number(b, "freq_min_hz", c.beamforming.freq_min_hz, "config.beamforming");
    c.beamforming.freq_max_hz = get_number(b, "freq_max_hz", c.beamforming.freq_max_hz, "config.beamforming");
    if (!(c.beamforming.discard_below_db > 0.0))
      throw Error(ErrorKind::config, "config.beamforming.discard_below_db: must be > 0");
    if (!(c.beamforming.freq_min_hz < c.beamforming.freq_max_hz))
      throw Error(ErrorKind::config, "config.beamforming: freq_min_hz must be below freq_max_hz");
  }
  if (j.contains("alignment")) {
    const Json& a = j.at("alignment");
    const std::string w = "config.alignment";
    check_fields(a, {"enabled", "reference_config", "max_shift_cells", "stretch_min", "stretch_max", "smoothing_cells"}, w);
    auto& s = c.identify.alignment;
    s.enabled = get_bool(a, "enabled", s.enabled, w);
    s.reference_config = get_int(a, "reference_config", s.reference_config, w);
    s.options.max_shift_cells = get_number(a, "max_shift_cells", s.options.max_shift_cells, w);
    s.options.stretch_min = get_number(a, "stretch_min", s.options.stretch_min, w);
    s.options.stretch_max = get_number(a, "stretch_max", s.options.stretch_max, w);
    s.options.smoothing_cells = get_number(a, "smoothing_cells", s.options.smoothing_cells, w);
    if (!(s.options.max_shift_cells >= 0.0) || !(s.options.stretch_min > 0.0) ||
        !(s.options.stretch_min <= 1.0 && s.options.stretch_max >= 1.0) || !(s.options.smoothing_cells >= 0.0))
      throw Error(ErrorKind::config, w + ": invalid shift, stretch or smoothing bounds");
  }
  if (j.contains("evaluation")) {
    check_fields(j.at("evaluation"), {"min_snr_db"}, "config.evaluation");
    c.evaluation.min_snr_db = get_number(j.at("evaluation"), "min_snr_db", c.evaluation.min_snr_db, "config.evaluation");
  }
  return c;
}

Json to_json(const PipelineConfig& c) {
  Json j;
  j["scenario"] = c.scenario.string();
  j["output_dir"] = c.output_dir.string();
  j["method"] = selection_name(c.method);
  if (c.seed) j["seed"] = *c.seed;
  j["sind"] = to_json(c.identify.sind);
  j["sihc"] = to_json(c.identify.sihc);
  j["clean_sc"] = to_json(c.beamforming.clean_sc);
  j["beamforming"] = {{"discard_below_db", c.beamforming.discard_below_db},
                      {"freq_min_hz", c.beamforming.freq_min_hz},
                      {"freq_max_hz", std::isfinite(c.beamforming.freq_max_hz) ? Json(c.beamforming.freq_max_hz)
                                                                               : Json("inf")}};
  const auto& a = c.identify.alignment;
  j["alignment"] = {{"enabled", a.enabled},
                    {"reference_config", a.reference_config},
                    {"max_shift_cells", a.options.max_shift_cells},
                    {"stretch_min", a.options.stretch_min},
                    {"stretch_max", a.options.stretch_max},
                    {"smoothing_cells", a.options.smoothing_cells}};
  j["evaluation"] = {{"min_snr_db", std::isfinite(c.evaluation.min_snr_db) ? Json(c.evaluation.min_snr_db)
                                                                            : Json("-inf")}};
  return j;
}

// ---- in-memory stages

SynthesizedDataset synthesize_dataset(const Scenario& scenario, std::uint64_t seed) {
  const std::size_t nc = scenario.configs.size(), ns = scenario.sources.size();
  const std::uint64_t hash = scenario.geometry.hash();
  SynthesizedDataset out;
  out.combined.resize(nc);
  out.signal_runs.assign(nc, std::vector<CrossSpectralMatrix>(ns));
  out.noise_runs.assign(nc, std::vector<CrossSpectralMatrix>(ns));
  std::vector<CrossSpectralMatrix> floor_only(nc);

  // One job per (configuration, source) measurement run; a source-free
  // scenario records one noise-floor run per configuration.
  const std::size_t jobs = nc * std::max<std::size_t>(ns, 1);
  parallel_for(jobs, [&](std::size_t job) {
    const std::size_t c = job / std::max<std::size_t>(ns, 1), s = job % std::max<std::size_t>(ns, 1);
    const MeasurementConfig& cfg = scenario.configs[c];
    const double floor = scenario.noise_floor_db[c];
    if (ns == 0) {
      floor_only[c] = welch_csm(synthesize_time_signals({}, scenario.geometry, cfg, scenario.duration_s, floor,
                                                        derive_seed(seed, 2, c, 0)),
                                cfg, hash);
      return;
    }
    MonopoleSpec spec = scenario.sources[s];
    spec.rng_seed = derive_seed(seed, 1, c, spec.rng_seed);
    const MonopoleSpec specs[] = {spec};
    out.signal_runs[c][s] = welch_csm(synthesize_time_signals(specs, scenario.geometry, cfg, scenario.duration_s,
                                                              floor, derive_seed(seed, 2, c, 2 * s)),
                                      cfg, hash);
    out.noise_runs[c][s] = welch_csm(synthesize_time_signals({}, scenario.geometry, cfg, scenario.duration_s, floor,
                                                             derive_seed(seed, 2, c, 2 * s + 1)),
                                     cfg, hash);
  });

  std::vector<std::vector<CrossSpectralMatrix>> denoised(nc);
  for (std::size_t c = 0; c < nc; ++c) {
    if (ns == 0) {
      out.combined[c] = std::move(floor_only[c]);
      continue;
    }
    for (std::size_t s = 0; s < ns; ++s) denoised[c].push_back(denoise_csm(out.signal_runs[c][s], out.noise_runs[c][s]));
    out.combined[c] = superpose_csms(denoised[c]);
  }

  const std::size_t ref = static_cast<std::size_t>(scenario.reference_config);
  out.truth.freqs_hz = scenario.configs[ref].analysis_freqs();
  out.truth.array_center = scenario.geometry.center();
  for (std::size_t s = 0; s < ns; ++s) {
    const ProjectedPsd p = ground_truth_psd(denoised[ref][s], scenario.geometry, scenario.sources[s].position);
    out.truth.sources.push_back({scenario.sources[s].position, p.psd_db, p.spread_db});
  }
  return out;
}

SourcePartSet beamform_dataset(const Scenario& scenario, const std::vector<CrossSpectralMatrix>& combined,
                               const BeamformOptions& options) {
  if (combined.size() != scenario.configs.size())
    throw Error(ErrorKind::input, "beamform_dataset: one CSM per configuration required");
  options.clean_sc.validate();
  std::vector<SparseMap> maps;
  for (std::size_t c = 0; c < combined.size(); ++c) {
    const CrossSpectralMatrix& full = combined[c];
    if (full.mic_count() != scenario.geometry.size())
      throw Error(ErrorKind::input, "beamform_dataset: CSM microphone count differs from the geometry");
    if (full.geometry_hash() != 0 && full.geometry_hash() != scenario.geometry.hash())
      throw Error(ErrorKind::input, "beamform_dataset: CSM recorded with a different geometry");
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < full.freq_count(); ++k)
      if (full.freqs()[k] >= options.freq_min_hz && full.freqs()[k] <= options.freq_max_hz) keep.push_back(k);
    std::vector<double> freqs;
    for (std::size_t k : keep) freqs.push_back(full.freqs()[k]);
    CrossSpectralMatrix csm(freqs, full.mic_count(), full.num_averages(), full.geometry_hash());
    for (std::size_t i = 0; i < keep.size(); ++i) {
      const auto src = full.bin(keep[i]);
      std::copy(src.begin(), src.end(), csm.bin(i).begin());
    }
    const SteeringSet steering(scenario.geometry, scenario.grid, freqs, scenario.configs[c].speed_of_sound_mps);
    maps.push_back(clean_sc(csm, steering, options.clean_sc, static_cast<int>(c)));
  }
  SourcePartSet parts = extract_source_parts(maps, scenario.configs, options.discard_below_db);
  if (maps.empty()) return SourcePartSet({}, scenario.grid, scenario.configs);
  return parts;
}

IdentificationRun run_identification(const SourcePartSet& parts, Method method, const IdentifyOptions& options) {
  IdentificationRun run;
  for (const auto& p : parts.parts()) run.positions.push_back({p.x1, p.x2});
  const int nc = static_cast<int>(parts.configs().size());

  if (method == Method::sind) {
    const SindParams& params = options.sind;
    try {
      params.validate(parts.grid());
    } catch (const Error& e) {
      throw Error(ErrorKind::config, std::string("sind: ") + e.what());
    }
    if (options.alignment.enabled && nc > 1) {
      if (options.alignment.reference_config < 0 || options.alignment.reference_config >= nc)
        throw Error(ErrorKind::config, "alignment.reference_config: out of range");
      std::vector<Histogram2D> per_config;
      for (int c = 0; c < nc; ++c) per_config.push_back(build_histogram(parts.for_config(c)));
      run.alignment = align_maps(per_config, options.alignment.reference_config, options.alignment.options);
      run.positions = apply_alignment(parts, run.alignment);
    }
    run.extraction = sind_extract(build_histogram(run.positions, parts.grid()), params);
    run.result = assign_parts_sind(parts, run.extraction->sources, params, &run.positions);
  } else {
    SihcParams params = options.sihc;
    params.validate();
    if (parts.empty()) {
      run.result.method = Method::sihc;
      run.result.params = params;
    } else {
      const FeatureSet features = build_features(parts, params);
      run.clustering = hdbscan_cluster(features.features, params);
      run.result = assign_parts_sihc(parts, *run.clustering, params, &run.positions);
    }
  }

  for (std::size_t s = 0; s < run.result.source_count(); ++s) {
    std::vector<Spectrum> per_config;
    for (int c = 0; c < nc; ++c)
      per_config.push_back(integrate_spectrum(parts, run.result, static_cast<int>(s), c,
                                              parts.configs()[static_cast<std::size_t>(c)].analysis_freqs()));
    run.spectra.push_back(std::move(per_config));
  }
  return run;
}

Json to_json(const DatasetInfo& d) {
  Json configs = Json::array();
  for (const auto& c : d.configs) configs.push_back(to_json(c));
  return {{"grid", to_json(d.grid)}, {"configs", configs}, {"array_center", to_json(d.array_center)}, {"seed", d.seed}};
}

DatasetInfo dataset_info_from_json(const Json& j) {
  check_fields(j, {"grid", "configs", "array_center", "seed"}, "dataset");
  DatasetInfo d;
  if (!j.contains("grid")) throw Error(ErrorKind::input, "dataset.grid: required");
  d.grid = grid_from_json(j.at("grid"), "dataset.grid");
  if (!j.contains("configs") || !j.at("configs").is_array()) throw Error(ErrorKind::input, "dataset.configs: required");
  for (std::size_t c = 0; c < j.at("configs").size(); ++c)
    d.configs.push_back(config_from_json(j.at("configs")[c], "dataset.configs[" + std::to_string(c) + "]"));
  if (j.contains("array_center")) d.array_center = point3_from_json(j.at("array_center"), "dataset.array_center");
  if (j.contains("seed") && j.at("seed").is_number_unsigned()) d.seed = j.at("seed").get<std::uint64_t>();
  return d;
}

SourcePartSet load_part_set(const fs::path& dir, DatasetInfo* info) {
  const fs::path parts_path = dir / "parts.csv", info_path = dir / "dataset.json";
  if (!fs::exists(parts_path) || !fs::exists(info_path))
    throw Error(ErrorKind::input, "missing " + parts_path.string() + " or " + info_path.string());
  DatasetInfo d;
  try {
    d = dataset_info_from_json(read_json_file(info_path));
  } catch (const Error& e) {
    throw Error(ErrorKind::input, e.what());
  }
  SourcePartSet parts(read_parts_csv(parts_path), d.grid, d.configs);
  if (info) *info = d;
  return parts;
}

// ---- file-based commands

namespace {

fs::path csm_path(const fs::path& out, const std::string& name) { return out / "csm" / (name + ".csm"); }

std::string config_tag(std::size_t c) { return "config" + std::to_string(c); }

std::vector<Method> methods_of(MethodSelection m) {
  if (m == MethodSelection::sind) return {Method::sind};
  if (m == MethodSelection::sihc) return {Method::sihc};
  return {Method::sind, Method::sihc};
}

Scenario load_output_scenario(const PipelineConfig& config) {
  const fs::path p = config.output_dir / "scenario.json";
  if (!fs::exists(p)) throw Error(ErrorKind::input, "missing " + p.string() + " (run synth first)");
  return scenario_from_json(read_json_file(p));
}

void write_identification(const fs::path& out, const SourcePartSet& parts, const IdentificationRun& run,
                          std::ostringstream& log) {
  const std::string m = method_name(run.result.method);
  write_json_file(out / ("result_" + m + ".json"), to_json(run.result));
  std::vector<Spectrum> spectra;
  std::vector<int> ids;
  for (std::size_t s = 0; s < run.spectra.size(); ++s)
    for (const auto& sp : run.spectra[s]) {
      spectra.push_back(sp);
      ids.push_back(static_cast<int>(s));
    }
  write_text_file(out / ("spectra_" + m + ".csv"), spectra_csv(spectra, ids));
  if (run.clustering) write_json_file(out / "condensed_tree_sihc.json", condensed_tree_json(*run.clustering));
  if (run.result.method == Method::sind) {
    Json a = Json::array();
    for (const auto& t : run.alignment) a.push_back(to_json(t));
    write_json_file(out / "alignment.json", a);
  }
  log << m << ": " << run.result.source_count() << " sources, " << run.result.noise_count() << " of " << parts.size()
      << " parts NOISE\n";
}

void write_evaluation(const fs::path& out, const SourcePartSet& parts, const IdentificationResult& result,
                      const std::vector<Point2>& positions, const GroundTruth& truth,
                      const EvaluationOptions& options, std::ostringstream& log) {
  const EvaluationReport rep = evaluate(parts, result, truth, options, &positions);
  const std::string m = method_name(result.method);
  write_json_file(out / ("evaluation_" + m + ".json"), to_json(rep));
  write_text_file(out / ("evaluation_" + m + ".csv"), evaluation_csv(rep));
  log << m << " evaluation: f_r " << format_double(rep.reconstructed_fraction);
  if (rep.mean_abs_error_db) log << ", |eps| " << format_double(*rep.mean_abs_error_db) << " dB";
  if (rep.max_position_error_deg) log << ", max |phi| " << format_double(*rep.max_position_error_deg) << " deg";
  log << '\n';
}

}  // namespace

std::string cmd_synth(const PipelineConfig& config) {
  if (config.scenario.empty()) throw Error(ErrorKind::config, "config.scenario: required for synth");
  if (!fs::exists(config.scenario)) throw Error(ErrorKind::config, "config.scenario: " + config.scenario.string() + " not found");
  Scenario scenario = scenario_from_json(read_json_file(config.scenario));
  if (config.seed) scenario.seed = *config.seed;
  const SynthesizedDataset data = synthesize_dataset(scenario, scenario.seed);
  const fs::path& out = config.output_dir;
  fs::create_directories(out / "csm");
  write_json_file(out / "scenario.json", to_json(scenario));
  Json manifest_configs = Json::array();
  for (std::size_t c = 0; c < scenario.configs.size(); ++c) {
    const std::string tag = config_tag(c);
    write_csm(csm_path(out, tag + "_combined"), data.combined[c]);
    Json runs = Json::array();
    for (std::size_t s = 0; s < scenario.sources.size(); ++s) {
      const std::string st = tag + "_source" + std::to_string(s);
      write_csm(csm_path(out, st + "_signal"), data.signal_runs[c][s]);
      write_csm(csm_path(out, st + "_noise"), data.noise_runs[c][s]);
      runs.push_back({{"signal", "csm/" + st + "_signal.csm"}, {"noise_floor", "csm/" + st + "_noise.csm"}});
    }
    manifest_configs.push_back({{"id", c}, {"combined", "csm/" + tag + "_combined.csm"}, {"runs", runs}});
  }
  write_json_file(out / "ground_truth.json", to_json(data.truth));
  write_json_file(out / "manifest.json", {{"seed", scenario.seed},
                                          {"geometry_hash", std::to_string(scenario.geometry.hash())},
                                          {"configs", manifest_configs}});
  std::ostringstream log;
  log << "synth: " << scenario.configs.size() << " configurations, " << scenario.sources.size() << " sources, seed "
      << scenario.seed << " -> " << out.string() << '\n';
  return log.str();
}

std::string cmd_beamform(const PipelineConfig& config) {
  const Scenario scenario = load_output_scenario(config);
  std::vector<CrossSpectralMatrix> combined;
  for (std::size_t c = 0; c < scenario.configs.size(); ++c) {
    const fs::path p = csm_path(config.output_dir, config_tag(c) + "_combined");
    if (!fs::exists(p)) throw Error(ErrorKind::input, "missing " + p.string());
    combined.push_back(read_csm(p));
  }
  const SourcePartSet parts = beamform_dataset(scenario, combined, config.beamforming);
  write_text_file(config.output_dir / "parts.csv", parts_csv(parts.parts()));
  write_json_file(config.output_dir / "dataset.json",
                  to_json(DatasetInfo{scenario.grid, scenario.configs, scenario.geometry.center(), scenario.seed}));
  std::ostringstream log;
  log << "beamform: " << parts.size() << " source-parts -> " << (config.output_dir / "parts.csv").string() << '\n';
  return log.str();
}

std::string cmd_identify(const PipelineConfig& config) {
  const SourcePartSet parts = load_part_set(config.output_dir);
  std::ostringstream log;
  if (parts.empty()) log << "warning: no source-parts; results are empty\n";
  const fs::path truth_path = config.output_dir / "ground_truth.json";
  std::optional<GroundTruth> truth;
  if (fs::exists(truth_path)) truth = ground_truth_from_json(read_json_file(truth_path));
  for (Method m : methods_of(config.method)) {
    const IdentificationRun run = run_identification(parts, m, config.identify);
    write_identification(config.output_dir, parts, run, log);
    if (truth && !truth->sources.empty())
      write_evaluation(config.output_dir, parts, run.result, run.positions, *truth, config.evaluation, log);
  }
  return log.str();
}

std::string cmd_evaluate(const PipelineConfig& config) {
  const SourcePartSet parts = load_part_set(config.output_dir);
  const fs::path truth_path = config.output_dir / "ground_truth.json";
  if (!fs::exists(truth_path)) throw Error(ErrorKind::input, "missing " + truth_path.string());
  const GroundTruth truth = ground_truth_from_json(read_json_file(truth_path));
  std::ostringstream log;
  bool any = false;
  for (Method m : methods_of(config.method)) {
    const fs::path rp = config.output_dir / (std::string("result_") + method_name(m) + ".json");
    if (!fs::exists(rp)) continue;
    IdentificationResult result;
    try {
      result = result_from_json(read_json_file(rp));
    } catch (const Error& e) {
      throw Error(ErrorKind::input, e.what());
    }
    if (result.assignment.size() != parts.size())
      throw Error(ErrorKind::input, rp.string() + ": assignment does not match parts.csv");
    std::vector<Point2> positions;
    for (const auto& p : parts.parts()) positions.push_back({p.x1, p.x2});
    const fs::path ap = config.output_dir / "alignment.json";
    if (m == Method::sind && fs::exists(ap)) {
      std::vector<AlignmentTransform> transforms;
      for (const auto& t : read_json_file(ap)) {
        AlignmentTransform a;
        a.config_id = get_int(t, "config_id", 0, "alignment");
        a.reference_config_id = get_int(t, "reference_config_id", 0, "alignment");
        a.a1 = get_number(t, "a1", 1.0, "alignment");
        a.a2 = get_number(t, "a2", 1.0, "alignment");
        a.b1 = get_number(t, "b1_m", 0.0, "alignment");
        a.b2 = get_number(t, "b2_m", 0.0, "alignment");
        transforms.push_back(a);
      }
      if (!transforms.empty()) positions = apply_alignment(parts, transforms);
    }
    write_evaluation(config.output_dir, parts, result, positions, truth, config.evaluation, log);
    any = true;
  }
  if (!any) throw Error(ErrorKind::input, "no result files in " + config.output_dir.string() + " (run identify first)");
  return log.str();
}

}  // namespace srcid
