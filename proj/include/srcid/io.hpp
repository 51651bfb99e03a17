#pragma once

// File formats: source-part CSV, CSM binary container, and JSON documents for
// parameters, results, spectra, ground truth and evaluation reports.

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "srcid/beamforming.hpp"
#include "srcid/hdbscan.hpp"
#include "srcid/metrics.hpp"
#include "srcid/result.hpp"
#include "srcid/sind.hpp"
#include "srcid/synthlab.hpp"

namespace srcid {

using Json = nlohmann::ordered_json;

// ---- text and files

std::string read_text_file(const std::filesystem::path& path);
// Writes via a temporary file and rename.
void write_text_file(const std::filesystem::path& path, const std::string& text);
Json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const Json& j);
Json parse_json(const std::string& text, const std::string& what);
// Two-space indented dump with a trailing newline.
std::string dump_json(const Json& j);

// Shortest round-trip representation.
std::string format_double(double v);

// ---- source-part CSV

inline constexpr const char* kPartsCsvHeader = "config_id,x1_m,x2_m,freq_hz,alpha_deg,mach,psd_db";
void write_parts_csv(std::ostream& out, const std::vector<SourcePart>& parts);
std::string parts_csv(const std::vector<SourcePart>& parts);
std::vector<SourcePart> read_parts_csv(std::istream& in);
std::vector<SourcePart> read_parts_csv(const std::filesystem::path& path);

// ---- CSM binary container

void write_csm(const std::filesystem::path& path, const CrossSpectralMatrix& csm);
CrossSpectralMatrix read_csm(const std::filesystem::path& path);

// ---- JSON field access with field-level error messages

// Rejects members of `j` that are not listed in `allowed`; `where` prefixes messages.
void check_fields(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);
double get_number(const Json& j, const char* key, double fallback, const std::string& where);
int get_int(const Json& j, const char* key, int fallback, const std::string& where);
bool get_bool(const Json& j, const char* key, bool fallback, const std::string& where);
std::string get_string(const Json& j, const char* key, const std::string& fallback, const std::string& where);

// ---- value types

Json to_json(const Point3& p);
Point3 point3_from_json(const Json& j, const std::string& where);
Json to_json(const FocusGrid& g);
FocusGrid grid_from_json(const Json& j, const std::string& where = "grid");
Json to_json(const MeasurementConfig& c);
MeasurementConfig config_from_json(const Json& j, const std::string& where = "config");
Json to_json(const ArrayGeometry& g);
ArrayGeometry geometry_from_json(const Json& j, const std::string& where = "geometry");
Json to_json(const MonopoleSpec& s);
MonopoleSpec monopole_from_json(const Json& j, std::uint64_t default_seed, const std::string& where = "source");

Json to_json(const SindParams& p);
// Members of `j` override `base`.
SindParams sind_params_from_json(const Json& j, SindParams base = {}, const std::string& where = "sind");
Json to_json(const SihcParams& p);
SihcParams sihc_params_from_json(const Json& j, SihcParams base = {}, const std::string& where = "sihc");
Json to_json(const CleanScParams& p);
CleanScParams clean_sc_params_from_json(const Json& j, CleanScParams base = {}, const std::string& where = "clean_sc");

// ---- documents

Json to_json(const Spectrum& s);
Spectrum spectrum_from_json(const Json& j, const std::string& where = "spectrum");
// Includes 1, 2 and 3 sigma ellipses for Gaussian sources.
Json to_json(const IdentificationResult& r);
IdentificationResult result_from_json(const Json& j, const std::string& where = "result");
Json to_json(const AlignmentTransform& t);
Json condensed_tree_json(const HdbscanResult& h);
Json to_json(const GroundTruth& t);
GroundTruth ground_truth_from_json(const Json& j, const std::string& where = "ground_truth");
Json to_json(const EvaluationReport& r);
// One row per true source x configuration.
std::string evaluation_csv(const EvaluationReport& r);
// Region-of-interest definitions for an identification result.
Json roi_json(const IdentificationResult& r, const SourcePartSet& parts, int revision);

// Per-source spectra as CSV: config_id,source,freq_hz,psd_db (empty when ABSENT).
std::string spectra_csv(const std::vector<Spectrum>& spectra, const std::vector<int>& source_ids);

}  // namespace srcid
