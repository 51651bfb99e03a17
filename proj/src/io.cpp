#include "srcid/io.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace srcid {

namespace fs = std::filesystem;

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::io, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorKind::io, "write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

Json parse_json(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::config, what + ": invalid JSON: " + e.what());
  }
}

Json read_json_file(const fs::path& path) { return parse_json(read_text_file(path), path.string()); }

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

void write_json_file(const fs::path& path, const Json& j) { write_text_file(path, dump_json(j)); }

std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// ---- CSV

void write_parts_csv(std::ostream& out, const std::vector<SourcePart>& parts) {
  out << kPartsCsvHeader << '\n';
  for (const auto& p : parts) {
    out << p.config_id << ',' << format_double(p.x1) << ',' << format_double(p.x2) << ',' << format_double(p.freq_hz)
        << ',' << format_double(p.alpha_deg) << ',' << format_double(p.mach) << ',' << format_double(p.psd_db) << '\n';
  }
}

std::string parts_csv(const std::vector<SourcePart>& parts) {
  std::ostringstream ss;
  write_parts_csv(ss, parts);
  return ss.str();
}

namespace {

template <class T>
T parse_field(std::string_view s, std::size_t line, const char* name) {
  T v{};
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw Error(ErrorKind::input, "parts CSV line " + std::to_string(line) + ": invalid " + name + " '" +
                                      std::string(s) + "'");
  return v;
}

}  // namespace

std::vector<SourcePart> read_parts_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorKind::input, "parts CSV: missing header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kPartsCsvHeader) throw Error(ErrorKind::input, "parts CSV: unexpected header '" + line + "'");
  std::vector<SourcePart> parts;
  std::size_t number = 1;
  static constexpr const char* kNames[] = {"config_id", "x1_m", "x2_m", "freq_hz", "alpha_deg", "mach", "psd_db"};
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 7)
      throw Error(ErrorKind::input, "parts CSV line " + std::to_string(number) + ": expected 7 fields");
    SourcePart p;
    p.config_id = parse_field<int>(f[0], number, kNames[0]);
    p.x1 = parse_field<double>(f[1], number, kNames[1]);
    p.x2 = parse_field<double>(f[2], number, kNames[2]);
    p.freq_hz = parse_field<double>(f[3], number, kNames[3]);
    p.alpha_deg = parse_field<double>(f[4], number, kNames[4]);
    p.mach = parse_field<double>(f[5], number, kNames[5]);
    p.psd_db = parse_field<double>(f[6], number, kNames[6]);
    parts.push_back(p);
  }
  return parts;
}

std::vector<SourcePart> read_parts_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open " + path.string());
  return read_parts_csv(in);
}

// ---- CSM container

namespace {

constexpr char kCsmMagic[8] = {'S', 'R', 'C', 'I', 'D', 'C', 'S', 'M'};
constexpr std::uint32_t kCsmVersion = 1;

template <class U>
void put_le(std::string& buf, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

template <class U>
U get_le(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(U) > buf.size()) throw Error(ErrorKind::input, "CSM file truncated");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(static_cast<unsigned char>(buf[pos + i])) << (8 * i);
  pos += sizeof(U);
  return v;
}

}  // namespace

void write_csm(const fs::path& path, const CrossSpectralMatrix& csm) {
  std::string buf(kCsmMagic, sizeof kCsmMagic);
  put_le<std::uint32_t>(buf, kCsmVersion);
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(csm.mic_count()));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(csm.freq_count()));
  put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(csm.num_averages()));
  put_le<std::uint64_t>(buf, csm.geometry_hash());
  for (double f : csm.freqs()) put_le<std::uint64_t>(buf, std::bit_cast<std::uint64_t>(f));
  buf.reserve(buf.size() + csm.data().size() * 8);
  for (const auto& z : csm.data()) {
    put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(z.real())));
    put_le<std::uint32_t>(buf, std::bit_cast<std::uint32_t>(static_cast<float>(z.imag())));
  }
  write_text_file(path, buf);
}

CrossSpectralMatrix read_csm(const fs::path& path) {
  const std::string buf = read_text_file(path);
  if (buf.size() < sizeof kCsmMagic || std::memcmp(buf.data(), kCsmMagic, sizeof kCsmMagic) != 0)
    throw Error(ErrorKind::input, path.string() + ": not a CSM file");
  std::size_t pos = sizeof kCsmMagic;
  if (get_le<std::uint32_t>(buf, pos) != kCsmVersion)
    throw Error(ErrorKind::input, path.string() + ": unsupported CSM version");
  const std::size_t mics = get_le<std::uint32_t>(buf, pos);
  const std::size_t nf = get_le<std::uint32_t>(buf, pos);
  const int averages = static_cast<int>(get_le<std::uint32_t>(buf, pos));
  const std::uint64_t hash = get_le<std::uint64_t>(buf, pos);
  if (buf.size() != pos + nf * 8 + nf * mics * mics * 8)
    throw Error(ErrorKind::input, path.string() + ": CSM payload size does not match its header");
  std::vector<double> freqs(nf);
  for (auto& f : freqs) f = std::bit_cast<double>(get_le<std::uint64_t>(buf, pos));
  CrossSpectralMatrix csm(std::move(freqs), mics, averages, hash);
  for (std::size_t k = 0; k < nf; ++k)
    for (auto& z : csm.bin(k)) {
      const float re = std::bit_cast<float>(get_le<std::uint32_t>(buf, pos));
      const float im = std::bit_cast<float>(get_le<std::uint32_t>(buf, pos));
      z = {re, im};
    }
  return csm;
}

// ---- JSON field helpers

void check_fields(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorKind::config, where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorKind::config, where + "." + key + ": unknown field");
  }
}

double get_number(const Json& j, const char* key, double fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (v.is_number()) return v.get<double>();
  // Non-finite values travel as strings.
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s == "-inf") return -INFINITY;
    if (s == "inf") return INFINITY;
  }
  throw Error(ErrorKind::config, where + "." + key + ": expected a number");
}

int get_int(const Json& j, const char* key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  const Json& v = j.at(key);
  if (v.is_number_integer()) return v.get<int>();
  if (v.is_number_float()) {
    const double d = v.get<double>();
    if (d == std::floor(d) && std::abs(d) < 2e9) return static_cast<int>(d);
  }
  throw Error(ErrorKind::config, where + "." + key + ": expected an integer");
}

bool get_bool(const Json& j, const char* key, bool fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_boolean()) throw Error(ErrorKind::config, where + "." + key + ": expected true or false");
  return j.at(key).get<bool>();
}

std::string get_string(const Json& j, const char* key, const std::string& fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j.at(key).is_string()) throw Error(ErrorKind::config, where + "." + key + ": expected a string");
  return j.at(key).get<std::string>();
}

namespace {

Json number_or_string(double v) {
  if (std::isfinite(v)) return v;
  return v > 0 ? "inf" : "-inf";
}

Json point2_json(const Point2& p) { return Json::array({p.x1, p.x2}); }

Point2 point2_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw Error(ErrorKind::config, where + ": expected [x1, x2]");
  return {j[0].get<double>(), j[1].get<double>()};
}

std::vector<double> number_array(const Json& j, const std::string& where) {
  if (!j.is_array()) throw Error(ErrorKind::config, where + ": expected an array of numbers");
  std::vector<double> v;
  v.reserve(j.size());
  for (const auto& e : j) {
    if (!e.is_number()) throw Error(ErrorKind::config, where + ": expected an array of numbers");
    v.push_back(e.get<double>());
  }
  return v;
}

template <class E>
E enum_from(const Json& j, const char* key, E fallback, std::initializer_list<std::pair<const char*, E>> names,
            const std::string& where) {
  if (!j.contains(key)) return fallback;
  const std::string s = get_string(j, key, "", where);
  std::string options;
  for (const auto& [n, e] : names) {
    if (s == n) return e;
    options += options.empty() ? n : std::string("|") + n;
  }
  throw Error(ErrorKind::config, where + "." + key + ": expected one of " + options);
}

}  // namespace

Json to_json(const Point3& p) { return Json::array({p.x, p.y, p.z}); }

Point3 point3_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::config, where + ": expected [x, y, z]");
  for (const auto& e : j)
    if (!e.is_number()) throw Error(ErrorKind::config, where + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Json to_json(const FocusGrid& g) {
  return {{"origin", point2_json(g.origin)}, {"spacing_m", g.spacing},           {"n1", g.n1},
          {"n2", g.n2},                      {"plane_offset_m", g.plane_offset_m}};
}

FocusGrid grid_from_json(const Json& j, const std::string& where) {
  check_fields(j, {"origin", "spacing_m", "n1", "n2", "plane_offset_m"}, where);
  FocusGrid g;
  if (j.contains("origin")) g.origin = point2_from_json(j.at("origin"), where + ".origin");
  g.spacing = get_number(j, "spacing_m", g.spacing, where);
  g.n1 = get_int(j, "n1", g.n1, where);
  g.n2 = get_int(j, "n2", g.n2, where);
  g.plane_offset_m = get_number(j, "plane_offset_m", g.plane_offset_m, where);
  try {
    g.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::config, where + ": " + e.what());
  }
  return g;
}

Json to_json(const MeasurementConfig& c) {
  return {{"mach", c.mach},
          {"alpha_deg", c.alpha_deg},
          {"sample_rate_hz", c.sample_rate_hz},
          {"block_size", c.block_size},
          {"overlap_fraction", c.overlap_fraction},
          {"speed_of_sound_mps", c.speed_of_sound_mps},
          {"reference_length_m", c.reference_length_m},
          {"label", c.label}};
}

MeasurementConfig config_from_json(const Json& j, const std::string& where) {
  check_fields(j, {"mach", "alpha_deg", "sample_rate_hz", "block_size", "overlap_fraction", "speed_of_sound_mps",
                   "reference_length_m", "label", "noise_floor_db"},
               where);
  MeasurementConfig c;
  c.mach = get_number(j, "mach", c.mach, where);
  c.alpha_deg = get_number(j, "alpha_deg", c.alpha_deg, where);
  c.sample_rate_hz = get_number(j, "sample_rate_hz", c.sample_rate_hz, where);
  c.block_size = get_int(j, "block_size", c.block_size, where);
  c.overlap_fraction = get_number(j, "overlap_fraction", c.overlap_fraction, where);
  c.speed_of_sound_mps = get_number(j, "speed_of_sound_mps", c.speed_of_sound_mps, where);
  c.reference_length_m = get_number(j, "reference_length_m", c.reference_length_m, where);
  c.label = get_string(j, "label", c.label, where);
  try {
    c.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::config, where + ": " + e.what());
  }
  return c;
}

Json to_json(const ArrayGeometry& g) {
  Json mics = Json::array();
  for (const auto& p : g.mic_positions()) mics.push_back(to_json(p));
  return {{"mics", mics}};
}

ArrayGeometry geometry_from_json(const Json& j, const std::string& where) {
  check_fields(j, {"mics", "square_grid"}, where);
  try {
    if (j.contains("mics")) {
      if (!j.at("mics").is_array()) throw Error(ErrorKind::config, where + ".mics: expected an array");
      std::vector<Point3> mics;
      for (std::size_t i = 0; i < j.at("mics").size(); ++i)
        mics.push_back(point3_from_json(j.at("mics")[i], where + ".mics[" + std::to_string(i) + "]"));
      return ArrayGeometry(std::move(mics));
    }
    if (j.contains("square_grid")) {
      const Json& s = j.at("square_grid");
      const std::string w = where + ".square_grid";
      check_fields(s, {"n", "aperture_m", "center"}, w);
      const Point3 center = s.contains("center") ? point3_from_json(s.at("center"), w + ".center") : Point3{};
      return ArrayGeometry::square_grid(get_int(s, "n", 7, w), get_number(s, "aperture_m", 0.54, w), center);
    }
  } catch (const Error& e) {
    throw Error(ErrorKind::config, e.what());
  }
  throw Error(ErrorKind::config, where + ": expected 'mics' or 'square_grid'");
}

Json to_json(const MonopoleSpec& s) {
  return {{"position", to_json(s.position)},   {"band_low_hz", s.band_low_hz}, {"band_high_hz", s.band_high_hz},
          {"rolloff_db_per_oct", s.rolloff_db_per_oct}, {"level_db", s.level_db}, {"rng_seed", s.rng_seed}};
}

MonopoleSpec monopole_from_json(const Json& j, std::uint64_t default_seed, const std::string& where) {
  check_fields(j, {"position", "band_low_hz", "band_high_hz", "rolloff_db_per_oct", "level_db", "rng_seed", "label"},
               where);
  MonopoleSpec s;
  if (!j.contains("position")) throw Error(ErrorKind::config, where + ".position: required");
  s.position = point3_from_json(j.at("position"), where + ".position");
  s.band_low_hz = get_number(j, "band_low_hz", s.band_low_hz, where);
  s.band_high_hz = get_number(j, "band_high_hz", s.band_high_hz, where);
  s.rolloff_db_per_oct = get_number(j, "rolloff_db_per_oct", s.rolloff_db_per_oct, where);
  s.level_db = get_number(j, "level_db", s.level_db, where);
  s.rng_seed = default_seed;
  if (j.contains("rng_seed")) {
    if (!j.at("rng_seed").is_number_unsigned()) throw Error(ErrorKind::config, where + ".rng_seed: expected an unsigned integer");
    s.rng_seed = j.at("rng_seed").get<std::uint64_t>();
  }
  return s;
}

Json to_json(const SindParams& p) {
  return {{"t_I", p.t_I},
          {"t_A", p.t_A},
          {"t_sigma_level", p.t_sigma_level},
          {"eps_A", p.eps_A},
          {"eps_x", p.eps_x},
          {"max_sources", p.max_sources},
          {"scale", p.scale == HistogramScale::log ? "log" : "raw"},
          {"max_evaluations", p.max_evaluations}};
}

SindParams sind_params_from_json(const Json& j, SindParams p, const std::string& where) {
  check_fields(j, {"t_I", "t_A", "t_sigma_level", "eps_A", "eps_x", "max_sources", "scale", "max_evaluations"}, where);
  p.t_I = get_number(j, "t_I", p.t_I, where);
  p.t_A = get_number(j, "t_A", p.t_A, where);
  p.t_sigma_level = get_number(j, "t_sigma_level", p.t_sigma_level, where);
  p.eps_A = get_number(j, "eps_A", p.eps_A, where);
  p.eps_x = get_number(j, "eps_x", p.eps_x, where);
  p.max_sources = get_int(j, "max_sources", p.max_sources, where);
  p.scale = enum_from(j, "scale", p.scale, {{"raw", HistogramScale::raw}, {"log", HistogramScale::log}}, where);
  p.max_evaluations = get_int(j, "max_evaluations", p.max_evaluations, where);
  return p;
}

Json to_json(const SihcParams& p) {
  Json j = {{"t", p.t},
            {"min_samples", p.min_samples},
            {"t_sigma_level", p.t_sigma_level},
            {"mach_exponent", p.mach_exponent},
            {"mach_scaling", p.mach_scaling},
            {"frequency_axis", p.frequency_axis == FrequencyAxis::strouhal ? "strouhal" : "helmholtz"},
            {"normalization", p.normalization == FeatureNormalization::global ? "global" : "per_config"},
            {"selection", p.selection == ClusterSelection::excess_of_mass ? "eom" : "leaf"},
            {"exact_mst_max_points", p.exact_mst_max_points}};
  if (p.ranges) {
    static constexpr const char* kAxes[] = {"x1", "x2", "frequency", "psd"};
    Json r = Json::object();
    for (std::size_t d = 0; d < 4; ++d)
      r[kAxes[d]] = {{"min", (*p.ranges)[d].min}, {"max", (*p.ranges)[d].max}, {"degenerate", (*p.ranges)[d].degenerate}};
    j["ranges"] = r;
  }
  return j;
}

SihcParams sihc_params_from_json(const Json& j, SihcParams p, const std::string& where) {
  check_fields(j, {"t", "min_samples", "t_sigma_level", "mach_exponent", "mach_scaling", "frequency_axis",
                   "normalization", "selection", "exact_mst_max_points", "ranges"},
               where);
  p.t = get_int(j, "t", p.t, where);
  p.min_samples = get_int(j, "min_samples", p.min_samples, where);
  p.t_sigma_level = get_number(j, "t_sigma_level", p.t_sigma_level, where);
  p.mach_exponent = get_number(j, "mach_exponent", p.mach_exponent, where);
  p.mach_scaling = get_bool(j, "mach_scaling", p.mach_scaling, where);
  p.frequency_axis = enum_from(j, "frequency_axis", p.frequency_axis,
                               {{"strouhal", FrequencyAxis::strouhal}, {"helmholtz", FrequencyAxis::helmholtz}}, where);
  p.normalization = enum_from(j, "normalization", p.normalization,
                              {{"global", FeatureNormalization::global}, {"per_config", FeatureNormalization::per_config}},
                              where);
  p.selection = enum_from(j, "selection", p.selection,
                          {{"eom", ClusterSelection::excess_of_mass}, {"leaf", ClusterSelection::leaf}}, where);
  const int exact = get_int(j, "exact_mst_max_points", static_cast<int>(std::min<std::size_t>(p.exact_mst_max_points, 2000000000)), where);
  if (exact < 2) throw Error(ErrorKind::config, where + ".exact_mst_max_points: must be >= 2");
  p.exact_mst_max_points = static_cast<std::size_t>(exact);
  if (j.contains("ranges")) {
    static constexpr const char* kAxes[] = {"x1", "x2", "frequency", "psd"};
    const Json& r = j.at("ranges");
    check_fields(r, {"x1", "x2", "frequency", "psd"}, where + ".ranges");
    std::array<AxisRange, 4> ranges;
    for (std::size_t d = 0; d < 4; ++d) {
      const std::string w = where + ".ranges." + kAxes[d];
      if (!r.contains(kAxes[d])) throw Error(ErrorKind::config, w + ": required");
      check_fields(r.at(kAxes[d]), {"min", "max", "degenerate"}, w);
      ranges[d] = {get_number(r.at(kAxes[d]), "min", 0.0, w), get_number(r.at(kAxes[d]), "max", 0.0, w),
                   get_bool(r.at(kAxes[d]), "degenerate", false, w)};
    }
    p.ranges = ranges;
  }
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::config, where + ": " + e.what());
  }
  return p;
}

Json to_json(const CleanScParams& p) {
  return {{"loop_gain", p.loop_gain},
          {"max_iter", p.max_iter},
          {"stop_db", p.stop_db},
          {"diagonal_removal", p.diagonal_removal}};
}

CleanScParams clean_sc_params_from_json(const Json& j, CleanScParams p, const std::string& where) {
  check_fields(j, {"loop_gain", "max_iter", "stop_db", "diagonal_removal"}, where);
  p.loop_gain = get_number(j, "loop_gain", p.loop_gain, where);
  p.max_iter = get_int(j, "max_iter", p.max_iter, where);
  p.stop_db = get_number(j, "stop_db", p.stop_db, where);
  p.diagonal_removal = get_bool(j, "diagonal_removal", p.diagonal_removal, where);
  try {
    p.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::config, where + ": " + e.what());
  }
  return p;
}

// ---- documents

Json to_json(const Spectrum& s) {
  Json psd = Json::array();
  for (const auto& v : s.psd_db) psd.push_back(v ? Json(*v) : Json(nullptr));
  return {{"config_id", s.config_id}, {"freqs_hz", s.freqs_hz}, {"psd_db", psd}};
}

Spectrum spectrum_from_json(const Json& j, const std::string& where) {
  check_fields(j, {"config_id", "freqs_hz", "psd_db", "source"}, where);
  Spectrum s;
  s.config_id = get_int(j, "config_id", 0, where);
  if (!j.contains("freqs_hz") || !j.contains("psd_db")) throw Error(ErrorKind::config, where + ": freqs_hz and psd_db required");
  s.freqs_hz = number_array(j.at("freqs_hz"), where + ".freqs_hz");
  if (!j.at("psd_db").is_array()) throw Error(ErrorKind::config, where + ".psd_db: expected an array");
  for (const auto& v : j.at("psd_db")) {
    if (v.is_null()) s.psd_db.emplace_back();
    else if (v.is_number()) s.psd_db.emplace_back(v.get<double>());
    else throw Error(ErrorKind::config, where + ".psd_db: expected numbers or null");
  }
  try {
    s.validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::input, where + ": " + e.what());
  }
  return s;
}

Json to_json(const IdentificationResult& r) {
  Json j;
  j["method"] = method_name(r.method);
  j["params"] = std::visit([](const auto& p) { return to_json(p); }, r.params);
  j["source_count"] = r.source_count();
  j["noise_count"] = r.noise_count();
  const auto counts = r.member_counts();
  Json sources = Json::array();
  for (std::size_t i = 0; i < r.source_count(); ++i) {
    Json s;
    s["id"] = i;
    if (r.method == Method::sind) {
      const GaussianSource& g = r.gaussians[i];
      s["center"] = point2_json(g.center);
      s["amplitude"] = g.amplitude;
      s["sigma1_m"] = g.sigma1;
      s["sigma2_m"] = g.sigma2;
      s["theta_rad"] = g.theta;
      s["area"] = g.area;
      s["order_index"] = g.order_index;
      s["residual"] = g.residual;
      s["degraded"] = g.degraded;
      s["member_count"] = counts[i];
      Json ellipses = Json::object();
      for (int k = 1; k <= 3; ++k) {
        Json poly = Json::array();
        for (const auto& p : sigma_ellipse(g, k)) poly.push_back(point2_json(p));
        ellipses[std::to_string(k)] = poly;
      }
      s["ellipses"] = ellipses;
    } else {
      const ClusterSource& c = r.clusters[i];
      s["midpoint"] = point2_json(c.midpoint);
      s["member_count"] = c.member_count;
      s["cluster_id"] = c.cluster_id;
      s["persistence"] = c.persistence;
    }
    sources.push_back(s);
  }
  j["sources"] = sources;
  Json src = Json::array(), conf = Json::array();
  for (const auto& a : r.assignment) {
    src.push_back(a.source);
    conf.push_back(a.confidence);
  }
  j["assignment"] = {{"source", src}, {"confidence", conf}};
  return j;
}

IdentificationResult result_from_json(const Json& j, const std::string& where) {
  check_fields(j, {"method", "params", "source_count", "noise_count", "sources", "assignment", "revision", "spectra"},
               where);
  IdentificationResult r;
  r.method = enum_from(j, "method", Method::sind, {{"sind", Method::sind}, {"sihc", Method::sihc}}, where);
  const Json params = j.contains("params") ? j.at("params") : Json::object();
  if (r.method == Method::sind) r.params = sind_params_from_json(params, {}, where + ".params");
  else r.params = sihc_params_from_json(params, {}, where + ".params");
  if (!j.contains("sources") || !j.at("sources").is_array()) throw Error(ErrorKind::config, where + ".sources: required array");
  for (std::size_t i = 0; i < j.at("sources").size(); ++i) {
    const Json& s = j.at("sources")[i];
    const std::string w = where + ".sources[" + std::to_string(i) + "]";
    if (!s.is_object()) throw Error(ErrorKind::config, w + ": expected an object");
    if (r.method == Method::sind) {
      try {
        GaussianSource g = GaussianSource::make(get_number(s, "amplitude", 1.0, w), get_number(s, "sigma1_m", 1.0, w),
                                                get_number(s, "sigma2_m", 1.0, w), get_number(s, "theta_rad", 0.0, w),
                                                point2_from_json(s.value("center", Json::array({0.0, 0.0})), w + ".center"),
                                                get_int(s, "order_index", static_cast<int>(i), w));
        g.residual = get_number(s, "residual", 0.0, w);
        g.degraded = get_bool(s, "degraded", false, w);
        r.gaussians.push_back(g);
      } catch (const Error& e) {
        throw Error(ErrorKind::input, w + ": " + e.what());
      }
    } else {
      ClusterSource c;
      c.midpoint = point2_from_json(s.value("midpoint", Json::array({0.0, 0.0})), w + ".midpoint");
      c.member_count = get_int(s, "member_count", 0, w);
      c.cluster_id = get_int(s, "cluster_id", static_cast<int>(i), w);
      c.persistence = get_number(s, "persistence", 0.0, w);
      r.clusters.push_back(c);
    }
  }
  if (!j.contains("assignment")) throw Error(ErrorKind::config, where + ".assignment: required");
  const Json& a = j.at("assignment");
  check_fields(a, {"source", "confidence"}, where + ".assignment");
  const std::vector<double> src = number_array(a.value("source", Json::array()), where + ".assignment.source");
  const std::vector<double> conf = number_array(a.value("confidence", Json::array()), where + ".assignment.confidence");
  if (src.size() != conf.size()) throw Error(ErrorKind::input, where + ".assignment: source and confidence differ in length");
  for (std::size_t i = 0; i < src.size(); ++i) r.assignment.push_back({static_cast<int>(src[i]), conf[i]});
  r.validate(r.assignment.size());
  return r;
}

Json to_json(const AlignmentTransform& t) {
  return {{"config_id", t.config_id}, {"reference_config_id", t.reference_config_id},
          {"a1", t.a1},               {"a2", t.a2},
          {"b1_m", t.b1},             {"b2_m", t.b2},
          {"correlation", t.correlation}, {"identity_fallback", t.identity_fallback}};
}

Json condensed_tree_json(const HdbscanResult& h) {
  Json parent = Json::array(), child = Json::array(), lambda = Json::array(), size = Json::array();
  for (const auto& r : h.condensed) {
    parent.push_back(r.parent);
    child.push_back(r.child);
    lambda.push_back(number_or_string(r.lambda));
    size.push_back(r.child_size);
  }
  Json clusters = Json::array();
  for (std::size_t c = 0; c < h.cluster_count(); ++c)
    clusters.push_back({{"id", c}, {"node", h.cluster_nodes[c]}, {"stability", number_or_string(h.cluster_stability[c])}});
  return {{"point_count", h.labels.size()},
          {"rows", {{"parent", parent}, {"child", child}, {"lambda", lambda}, {"child_size", size}}},
          {"selected", clusters}};
}

Json to_json(const GroundTruth& t) {
  Json sources = Json::array();
  for (const auto& s : t.sources)
    sources.push_back({{"position", to_json(s.position)}, {"psd_db", s.psd_db}, {"spread_db", s.spread_db}});
  return {{"freqs_hz", t.freqs_hz}, {"array_center", to_json(t.array_center)}, {"sources", sources}};
}

GroundTruth ground_truth_from_json(const Json& j, const std::string& where) {
  check_fields(j, {"freqs_hz", "array_center", "sources", "reference_config"}, where);
  GroundTruth t;
  t.freqs_hz = number_array(j.value("freqs_hz", Json::array()), where + ".freqs_hz");
  t.array_center = point3_from_json(j.value("array_center", Json::array({0.0, 0.0, 0.0})), where + ".array_center");
  if (!j.contains("sources") || !j.at("sources").is_array()) throw Error(ErrorKind::config, where + ".sources: required array");
  for (std::size_t i = 0; i < j.at("sources").size(); ++i) {
    const Json& s = j.at("sources")[i];
    const std::string w = where + ".sources[" + std::to_string(i) + "]";
    check_fields(s, {"position", "psd_db", "spread_db"}, w);
    TruthSource ts;
    ts.position = point3_from_json(s.value("position", Json()), w + ".position");
    ts.psd_db = number_array(s.value("psd_db", Json::array()), w + ".psd_db");
    ts.spread_db = number_array(s.value("spread_db", Json::array()), w + ".spread_db");
    if (ts.psd_db.size() != t.freqs_hz.size()) throw Error(ErrorKind::input, w + ".psd_db: length differs from freqs_hz");
    t.sources.push_back(std::move(ts));
  }
  return t;
}

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

}  // namespace

Json to_json(const EvaluationReport& r) {
  Json entries = Json::array();
  for (const auto& e : r.entries) {
    Json err = Json::array();
    for (const auto& v : e.error_db) err.push_back(optional_json(v));
    entries.push_back({{"true_source", e.true_source},
                       {"config_id", e.config_id},
                       {"mach", e.mach},
                       {"identified", e.identified},
                       {"estimated_position", e.estimated_position ? point2_json(*e.estimated_position) : Json(nullptr)},
                       {"position_error_deg", optional_json(e.position_error_deg)},
                       {"mean_abs_error_db", optional_json(e.error.mean_abs_db)},
                       {"sd_error_db", optional_json(e.error.sd_db)},
                       {"reconstructed_fraction", e.error.reconstructed_fraction},
                       {"snr_db", e.snr_db},
                       {"error_db", err},
                       {"spectrum", to_json(e.spectrum)}});
  }
  return {{"method", method_name(r.method)},
          {"identified_sources", r.identified_sources},
          {"match", r.match},
          {"mean_abs_error_db", optional_json(r.mean_abs_error_db)},
          {"sd_error_db", optional_json(r.sd_error_db)},
          {"reconstructed_fraction", r.reconstructed_fraction},
          {"mean_position_error_deg", optional_json(r.mean_position_error_deg)},
          {"max_position_error_deg", optional_json(r.max_position_error_deg)},
          {"freqs_hz", r.freqs_hz},
          {"failed_snr_db", r.failed_snr_db},
          {"entries", entries}};
}

std::string evaluation_csv(const EvaluationReport& r) {
  std::ostringstream ss;
  ss << "method,true_source,config_id,mach,identified,position_error_deg,mean_abs_error_db,sd_error_db,"
        "reconstructed_fraction\n";
  auto opt = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& e : r.entries)
    ss << method_name(r.method) << ',' << e.true_source << ',' << e.config_id << ',' << format_double(e.mach) << ','
       << e.identified << ',' << opt(e.position_error_deg) << ',' << opt(e.error.mean_abs_db) << ','
       << opt(e.error.sd_db) << ',' << format_double(e.error.reconstructed_fraction) << '\n';
  return ss.str();
}

Json roi_json(const IdentificationResult& r, const SourcePartSet& parts, int revision) {
  Json rois = Json::array();
  for (std::size_t i = 0; i < r.source_count(); ++i) {
    Json roi;
    roi["id"] = i;
    if (r.method == Method::sind) {
      const GaussianSource& g = r.gaussians[i];
      const double k = std::get<SindParams>(r.params).t_sigma_level;
      roi["center"] = point2_json(g.center);
      roi["ellipse"] = {{"semi_axis1_m", k * g.sigma1},
                        {"semi_axis2_m", k * g.sigma2},
                        {"theta_rad", g.theta},
                        {"sigma_level", k},
                        {"axis1", point2_json(principal_axis1(g.theta))},
                        {"axis2", point2_json(principal_axis2(g.theta))}};
    } else {
      roi["center"] = point2_json(r.clusters[i].midpoint);
      std::vector<std::size_t> cells;
      for (std::size_t p = 0; p < parts.size(); ++p)
        if (r.assignment[p].source == static_cast<int>(i)) {
          const Cell c = parts.cell_of(parts.parts()[p]);
          cells.push_back(parts.grid().index(c.i, c.j));
        }
      std::sort(cells.begin(), cells.end());
      cells.erase(std::unique(cells.begin(), cells.end()), cells.end());
      Json list = Json::array();
      for (std::size_t c : cells) {
        const Cell cell = parts.grid().cell_of(c);
        list.push_back(Json::array({cell.i, cell.j}));
      }
      roi["cells"] = list;
    }
    rois.push_back(roi);
  }
  return {{"revision", revision}, {"method", method_name(r.method)}, {"grid", to_json(parts.grid())}, {"rois", rois}};
}

std::string spectra_csv(const std::vector<Spectrum>& spectra, const std::vector<int>& source_ids) {
  if (spectra.size() != source_ids.size()) throw Error(ErrorKind::shape, "spectra_csv: one source id per spectrum");
  std::ostringstream ss;
  ss << "config_id,source,freq_hz,psd_db\n";
  for (std::size_t i = 0; i < spectra.size(); ++i)
    for (std::size_t k = 0; k < spectra[i].freqs_hz.size(); ++k) {
      ss << spectra[i].config_id << ',' << source_ids[i] << ',' << format_double(spectra[i].freqs_hz[k]) << ',';
      if (spectra[i].psd_db[k]) ss << format_double(*spectra[i].psd_db[k]);
      ss << '\n';
    }
  return ss.str();
}

}  // namespace srcid
