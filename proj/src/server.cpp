#include "httplib.h"
#include "srcid/service.hpp"

namespace srcid {

struct HttpService::Impl {
  explicit Impl(Session& s) : session(s) {}
  Session& session;
  httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message, int revision) {
  reply(res, status, {{"revision", revision}, {"error", message}});
}

}  // namespace

HttpService::HttpService(Session& session, std::filesystem::path static_dir)
    : impl_(std::make_unique<Impl>(session)) {
  auto& srv = impl_->server;
  Session& s = impl_->session;

  srv.Get("/api/summary", [&s](const httplib::Request&, httplib::Response& res) { reply(res, 200, s.summary()); });

  srv.Post("/api/identify", [&s](const httplib::Request& req, httplib::Response& res) {
    try {
      reply(res, 200, s.identify(parse_json(req.body, "request")));
    } catch (const BusyError& e) {
      reply_error(res, 409, e.what(), s.revision());
    } catch (const Error& e) {
      reply_error(res, e.kind() == ErrorKind::config ? 400 : 422, e.what(), s.revision());
    }
  });

  srv.Get(R"(/api/source/(-?\d+)/(-?\d+)/spectrum)", [&s](const httplib::Request& req, httplib::Response& res) {
    const int rev = std::stoi(req.matches[1]);
    const int id = std::stoi(req.matches[2]);
    const std::string axis = req.has_param("axis") ? req.get_param_value("axis") : "frequency";
    if (axis != "frequency" && axis != "strouhal" && axis != "helmholtz") {
      reply_error(res, 400, "axis: expected one of frequency|strouhal|helmholtz", s.revision());
      return;
    }
    double n = 0.0;
    if (req.has_param("mach_exponent")) {
      try {
        n = std::stod(req.get_param_value("mach_exponent"));
      } catch (const std::exception&) {
        reply_error(res, 400, "mach_exponent: expected a number", s.revision());
        return;
      }
    }
    if (auto body = s.spectrum(rev, id, axis, n)) reply(res, 200, *body);
    else reply_error(res, 404, "unknown revision or source", s.revision());
  });

  srv.Post("/api/export", [&s](const httplib::Request& req, httplib::Response& res) {
    int rev = 0;
    try {
      const Json j = parse_json(req.body, "request");
      check_fields(j, {"revision", "rev"}, "request");
      if (!j.contains("revision") && !j.contains("rev")) throw Error(ErrorKind::config, "request.revision: required");
      rev = get_int(j, j.contains("revision") ? "revision" : "rev", 0, "request");
    } catch (const Error& e) {
      reply_error(res, 400, e.what(), s.revision());
      return;
    }
    if (auto body = s.export_roi(rev)) reply(res, 200, *body);
    else reply_error(res, 404, "unknown revision", s.revision());
  });

  if (!static_dir.empty()) srv.set_mount_point("/", static_dir.string());
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const std::string& host, int port) {
  auto& srv = impl_->server;
  if (port == 0) {
    const int p = srv.bind_to_any_port(host);
    if (p < 0) throw Error(ErrorKind::io, "cannot bind " + host);
    return p;
  }
  if (!srv.bind_to_port(host, port)) throw Error(ErrorKind::io, "cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_) impl_->server.stop();
}

}  // namespace srcid
