#pragma once

// End-to-end stages: synthesis, beamforming, identification and evaluation,
// both in memory and as file-based commands over an output directory.

#include <cstdint>
#include <filesystem>
#include <limits>
#include <optional>
#include <vector>

#include "srcid/beamforming.hpp"
#include "srcid/hdbscan.hpp"
#include "srcid/io.hpp"
#include "srcid/metrics.hpp"
#include "srcid/result.hpp"
#include "srcid/sind.hpp"
#include "srcid/synthlab.hpp"

namespace srcid {

struct Scenario {
  ArrayGeometry geometry;
  FocusGrid grid;
  std::vector<MeasurementConfig> configs;
  std::vector<double> noise_floor_db;  // per configuration, -inf for none
  std::vector<MonopoleSpec> sources;
  double duration_s = 4.0;
  std::uint64_t seed = 1;
  // Configuration whose isolated source CSMs define the ground truth.
  int reference_config = 0;
};

Scenario scenario_from_json(const Json& j);
Json to_json(const Scenario& s);

enum class MethodSelection { sind, sihc, both };

struct BeamformOptions {
  CleanScParams clean_sc;
  double discard_below_db = 40.0;
  double freq_min_hz = 0.0;
  double freq_max_hz = std::numeric_limits<double>::infinity();
};

struct AlignmentSettings {
  bool enabled = false;
  int reference_config = 0;
  AlignmentOptions options;
};

struct IdentifyOptions {
  SindParams sind;
  SihcParams sihc;
  AlignmentSettings alignment;
};

struct PipelineConfig {
  std::filesystem::path scenario;
  std::filesystem::path output_dir = "out";
  MethodSelection method = MethodSelection::both;
  IdentifyOptions identify;
  BeamformOptions beamforming;
  EvaluationOptions evaluation;
  std::optional<std::uint64_t> seed;  // overrides the scenario seed
};

// Relative paths resolve against `base_dir`.
PipelineConfig pipeline_config_from_json(const Json& j, const std::filesystem::path& base_dir = {});
Json to_json(const PipelineConfig& c);

struct SynthesizedDataset {
  // Per configuration: superposed denoised source CSMs.
  std::vector<CrossSpectralMatrix> combined;
  // [config][source]: raw signal-run and noise-floor-run CSMs.
  std::vector<std::vector<CrossSpectralMatrix>> signal_runs;
  std::vector<std::vector<CrossSpectralMatrix>> noise_runs;
  GroundTruth truth;
};

SynthesizedDataset synthesize_dataset(const Scenario& scenario, std::uint64_t seed);

// CLEAN-SC per configuration, then source-part extraction.
SourcePartSet beamform_dataset(const Scenario& scenario, const std::vector<CrossSpectralMatrix>& combined,
                               const BeamformOptions& options);

struct IdentificationRun {
  IdentificationResult result;
  // Positions used for identification (after alignment), parallel to parts.
  std::vector<Point2> positions;
  std::vector<AlignmentTransform> alignment;
  std::optional<SindExtraction> extraction;
  std::optional<HdbscanResult> clustering;
  // [source][config] spectra over the analysis axis of each configuration.
  std::vector<std::vector<Spectrum>> spectra;
};

IdentificationRun run_identification(const SourcePartSet& parts, Method method, const IdentifyOptions& options);

// Dataset description written next to parts.csv.
struct DatasetInfo {
  FocusGrid grid;
  std::vector<MeasurementConfig> configs;
  Point3 array_center;
  std::uint64_t seed = 0;
};
Json to_json(const DatasetInfo& d);
DatasetInfo dataset_info_from_json(const Json& j);
// Loads parts.csv and dataset.json from a directory.
SourcePartSet load_part_set(const std::filesystem::path& dir, DatasetInfo* info = nullptr);

// File-based commands; each returns a short human-readable summary.
std::string cmd_synth(const PipelineConfig& config);
std::string cmd_beamform(const PipelineConfig& config);
std::string cmd_identify(const PipelineConfig& config);
std::string cmd_evaluate(const PipelineConfig& config);

}  // namespace srcid
