#include <cstdlib>
#include <cstring>
#include <memory>
#include <string>

#include "srcid/pipeline.hpp"
#include "srcid/service.hpp"
#include "srcid/srcid.h"

struct srcid_partset {
  srcid::SourcePartSet parts;
};

struct srcid_result {
  srcid::IdentificationRun run;
};

struct srcid_session {
  std::unique_ptr<srcid::Session> session;
};

namespace {

thread_local std::string g_last_error;

srcid_status status_of(srcid::ErrorKind kind) {
  switch (kind) {
    case srcid::ErrorKind::range: return SRCID_ERR_RANGE;
    case srcid::ErrorKind::config: return SRCID_ERR_CONFIG;
    case srcid::ErrorKind::input: return SRCID_ERR_INPUT;
    case srcid::ErrorKind::shape: return SRCID_ERR_SHAPE;
    case srcid::ErrorKind::singularity: return SRCID_ERR_SINGULARITY;
    case srcid::ErrorKind::estimation: return SRCID_ERR_ESTIMATION;
    case srcid::ErrorKind::undefined: return SRCID_ERR_UNDEFINED;
    case srcid::ErrorKind::io: return SRCID_ERR_IO;
  }
  return SRCID_ERR_INTERNAL;
}

template <class Fn>
srcid_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return SRCID_OK;
  } catch (const srcid::BusyError& e) {
    g_last_error = e.what();
    return SRCID_ERR_BUSY;
  } catch (const srcid::Error& e) {
    g_last_error = e.what();
    return status_of(e.kind());
  } catch (const std::filesystem::filesystem_error& e) {
    g_last_error = e.what();
    return SRCID_ERR_IO;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SRCID_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SRCID_ERR_INTERNAL;
  }
}

srcid_status null_argument(const char* name) {
  g_last_error = std::string(name) + " must not be NULL";
  return SRCID_ERR_NULL_ARGUMENT;
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

srcid::PipelineConfig parse_config(const char* config_json, const char* base_dir) {
  return srcid::pipeline_config_from_json(srcid::parse_json(config_json, "config"),
                                          base_dir ? std::filesystem::path(base_dir) : std::filesystem::path());
}

template <class Cmd>
srcid_status run_command(Cmd cmd, const char* config_json, const char* base_dir, char** out_log) {
  if (!config_json) return null_argument("config_json");
  return guarded([&] {
    const std::string log = cmd(parse_config(config_json, base_dir));
    if (out_log) *out_log = copy_string(log);
  });
}

}  // namespace

extern "C" {

const char* srcid_version(void) { return "1.0.0"; }

const char* srcid_status_name(srcid_status status) {
  switch (status) {
    case SRCID_OK: return "ok";
    case SRCID_ERR_RANGE: return "range error";
    case SRCID_ERR_CONFIG: return "configuration error";
    case SRCID_ERR_INPUT: return "input error";
    case SRCID_ERR_SHAPE: return "shape error";
    case SRCID_ERR_SINGULARITY: return "singularity error";
    case SRCID_ERR_ESTIMATION: return "estimation error";
    case SRCID_ERR_UNDEFINED: return "undefined quantity";
    case SRCID_ERR_IO: return "I/O error";
    case SRCID_ERR_BUSY: return "busy";
    case SRCID_ERR_NULL_ARGUMENT: return "null argument";
    case SRCID_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* srcid_last_error(void) { return g_last_error.c_str(); }

void srcid_string_free(char* s) { std::free(s); }

srcid_status srcid_cmd_synth(const char* config_json, const char* base_dir, char** out_log) {
  return run_command(srcid::cmd_synth, config_json, base_dir, out_log);
}

srcid_status srcid_cmd_beamform(const char* config_json, const char* base_dir, char** out_log) {
  return run_command(srcid::cmd_beamform, config_json, base_dir, out_log);
}

srcid_status srcid_cmd_identify(const char* config_json, const char* base_dir, char** out_log) {
  return run_command(srcid::cmd_identify, config_json, base_dir, out_log);
}

srcid_status srcid_cmd_evaluate(const char* config_json, const char* base_dir, char** out_log) {
  return run_command(srcid::cmd_evaluate, config_json, base_dir, out_log);
}

srcid_status srcid_config_normalize(const char* config_json, const char* base_dir, char** out_json) {
  if (!config_json) return null_argument("config_json");
  if (!out_json) return null_argument("out_json");
  return guarded([&] { *out_json = copy_string(srcid::dump_json(srcid::to_json(parse_config(config_json, base_dir)))); });
}

srcid_status srcid_partset_load(const char* dir, srcid_partset** out) {
  if (!dir) return null_argument("dir");
  if (!out) return null_argument("out");
  return guarded([&] { *out = new srcid_partset{srcid::load_part_set(dir)}; });
}

srcid_status srcid_partset_size(const srcid_partset* set, size_t* out) {
  if (!set) return null_argument("set");
  if (!out) return null_argument("out");
  *out = set->parts.size();
  g_last_error.clear();
  return SRCID_OK;
}

void srcid_partset_free(srcid_partset* set) { delete set; }

srcid_status srcid_identify(const srcid_partset* set, const char* request_json, srcid_result** out) {
  if (!set) return null_argument("set");
  if (!request_json) return null_argument("request_json");
  if (!out) return null_argument("out");
  return guarded([&] {
    // Same request contract as the HTTP service.
    const srcid::Json req = srcid::parse_json(request_json, "request");
    srcid::check_fields(req, {"method", "params", "alignment"}, "request");
    const std::string m = srcid::get_string(req, "method", "", "request");
    if (m != "sind" && m != "sihc") throw srcid::Error(srcid::ErrorKind::config, "request.method: expected one of sind|sihc");
    srcid::IdentifyOptions options;
    const srcid::Json params = req.contains("params") ? req.at("params") : srcid::Json::object();
    if (m == "sind") options.sind = srcid::sind_params_from_json(params, {}, "params");
    else options.sihc = srcid::sihc_params_from_json(params, {}, "params");
    if (req.contains("alignment")) {
      const srcid::Json& a = req.at("alignment");
      srcid::check_fields(a, {"enabled", "reference_config"}, "alignment");
      options.alignment.enabled = srcid::get_bool(a, "enabled", false, "alignment");
      options.alignment.reference_config = srcid::get_int(a, "reference_config", 0, "alignment");
    }
    *out = new srcid_result{
        srcid::run_identification(set->parts, m == "sind" ? srcid::Method::sind : srcid::Method::sihc, options)};
  });
}

srcid_status srcid_result_source_count(const srcid_result* result, size_t* out) {
  if (!result) return null_argument("result");
  if (!out) return null_argument("out");
  *out = result->run.result.source_count();
  g_last_error.clear();
  return SRCID_OK;
}

srcid_status srcid_result_noise_count(const srcid_result* result, size_t* out) {
  if (!result) return null_argument("result");
  if (!out) return null_argument("out");
  *out = result->run.result.noise_count();
  g_last_error.clear();
  return SRCID_OK;
}

srcid_status srcid_result_json(const srcid_result* result, char** out_json) {
  if (!result) return null_argument("result");
  if (!out_json) return null_argument("out_json");
  return guarded([&] { *out_json = copy_string(srcid::dump_json(srcid::to_json(result->run.result))); });
}

void srcid_result_free(srcid_result* result) { delete result; }

srcid_status srcid_session_open(const char* dir, srcid_session** out) {
  if (!dir) return null_argument("dir");
  if (!out) return null_argument("out");
  return guarded([&] { *out = new srcid_session{srcid::Session::load(dir)}; });
}

srcid_status srcid_session_summary(const srcid_session* session, char** out_json) {
  if (!session) return null_argument("session");
  if (!out_json) return null_argument("out_json");
  return guarded([&] { *out_json = copy_string(srcid::dump_json(session->session->summary())); });
}

srcid_status srcid_session_serve(srcid_session* session, const char* host, int port, const char* static_dir,
                                 srcid_ready_fn on_ready, void* user) {
  if (!session) return null_argument("session");
  if (port < 0 || port > 65535) {
    g_last_error = "port must lie in [0, 65535]";
    return SRCID_ERR_CONFIG;
  }
  return guarded([&] {
    srcid::HttpService service(*session->session, static_dir ? std::filesystem::path(static_dir) : std::filesystem::path());
    const int bound = service.bind(host ? host : "127.0.0.1", port);
    if (on_ready) on_ready(bound, user);
    service.listen();
  });
}

void srcid_session_free(srcid_session* session) { delete session; }

}  // extern "C"
