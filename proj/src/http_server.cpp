#include "cura/admin_service.hpp"
#include "cura/log.hpp"

// After Eigen: resolv.h (pulled in by httplib) defines a `_res` macro.
#include <httplib.h>

namespace cura {

struct HttpServer::Impl {
  httplib::Server server;
};

HttpServer::HttpServer(const AdminService& service) : impl_(std::make_unique<Impl>()) {
  auto dispatch = [&service](const httplib::Request& req, httplib::Response& res) {
    HttpRequest r;
    r.method = req.method;
    r.path = req.path;
    for (const auto& [k, v] : req.params) r.query[k] = v;
    r.body = req.body;
    r.authorization = req.get_header_value("Authorization");
    const auto out = service.handle(r);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  const std::string any = R"(/.*)";
  auto& s = impl_->server;
  s.Get(any, dispatch);
  s.Post(any, dispatch);
  s.Put(any, dispatch);
  s.Delete(any, dispatch);
  s.Patch(any, dispatch);
}

HttpServer::~HttpServer() = default;

int HttpServer::bind(const std::string& host, int port) {
  auto& s = impl_->server;
  const int bound = port == 0 ? s.bind_to_any_port(host) : (s.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
  return bound;
}

void HttpServer::run() {
  if (!impl_->server.listen_after_bind()) throw std::runtime_error("http server stopped with an error");
}

void HttpServer::stop() { impl_->server.stop(); }

void serve_http(const AdminService& service, const std::string& host, int port) {
  HttpServer server(service);
  const int bound = server.bind(host, port);
  log::info("listening on " + host + ":" + std::to_string(bound));
  server.run();
}

}  // namespace cura
