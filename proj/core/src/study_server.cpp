#include "coordsr/study_server.hpp"

#include <stdexcept>

#include "httplib.h"

namespace coordsr {

struct StudyServer::Impl {
  StudyService& service;
  StudyServerOptions opt;
  httplib::Server http;
  int port = -1;

  Impl(StudyService& s, StudyServerOptions o) : service(s), opt(std::move(o)) {}

  static void send(httplib::Response& res, const ApiReply& r) {
    res.status = r.status;
    if (r.status != 204) res.set_content(r.body, "application/json");
  }

  void routes() {
    http.Post("/api/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.create_session(req.body));
    });
    http.Get(R"(/api/sessions/([^/]+)/next)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.next(req.matches[1]));
    });
    http.Post(R"(/api/sessions/([^/]+)/responses)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.respond(req.matches[1], req.body));
    });
    http.Get(R"(/api/studies/([^/]+)/summary)", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.summary(req.matches[1]));
    });
    http.Get(R"(/api/studies/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      send(res, service.study_info(req.matches[1]));
    });
    if (!opt.study_dir.empty() && !http.set_mount_point("/pairs", (opt.study_dir / "pairs").string())) {
      throw std::runtime_error("cannot serve " + (opt.study_dir / "pairs").string());
    }
    if (!opt.ui_dir.empty() && !http.set_mount_point("/", opt.ui_dir.string())) {
      throw std::runtime_error("cannot serve UI bundle " + opt.ui_dir.string());
    }
    http.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string msg = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      res.status = 500;
      res.set_content(json_error(msg), "application/json");
    });
  }

  static std::string json_error(const std::string& msg) {
    std::string out = "{\"error\":\"";
    for (char c : msg) {
      if (c == '"' || c == '\\') out += '\\';
      if (static_cast<unsigned char>(c) >= 0x20) out += c;
    }
    return out + "\"}";
  }
};

StudyServer::StudyServer(StudyService& service, StudyServerOptions opt)
    : impl_(std::make_unique<Impl>(service, std::move(opt))) {
  impl_->routes();
}

StudyServer::~StudyServer() { stop(); }

int StudyServer::bind() {
  if (impl_->opt.port == 0) {
    impl_->port = impl_->http.bind_to_any_port(impl_->opt.host);
  } else if (impl_->http.bind_to_port(impl_->opt.host, impl_->opt.port)) {
    impl_->port = impl_->opt.port;
  }
  if (impl_->port < 0) {
    throw std::runtime_error("cannot bind " + impl_->opt.host + ":" + std::to_string(impl_->opt.port));
  }
  return impl_->port;
}

void StudyServer::run() { impl_->http.listen_after_bind(); }

void StudyServer::stop() {
  if (impl_ && impl_->http.is_running()) impl_->http.stop();
}

}  // namespace coordsr
