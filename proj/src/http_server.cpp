#include "fashrank/http_server.hpp"

#include "httplib.h"

namespace fashrank {

HttpServer::HttpServer(AnnotationService& service)
    : service_(service), server_(std::make_unique<httplib::Server>()) {
  auto dispatch = [this](const httplib::Request& req, httplib::Response& res) {
    HttpRequest request{req.method, req.path, {}, req.body};
    for (const auto& [key, value] : req.params) request.query.emplace(key, value);
    const HttpResponse response = service_.handle(request);
    res.status = response.status;
    res.set_content(response.body, response.content_type);
  };
  // Static files are matched before handlers, so everything else lands here
  // and unknown routes get a JSON error body.
  const char* pattern = R"(/.*)";
  server_->Get(pattern, dispatch);
  server_->Post(pattern, dispatch);
  server_->set_default_headers({{"Access-Control-Allow-Origin", "*"}});
  server_->Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
}

HttpServer::~HttpServer() { stop(); }

bool HttpServer::mount_static(const std::filesystem::path& dir) {
  return server_->set_mount_point("/ui", dir.string());
}

int HttpServer::bind_any_port(const std::string& host) {
  return server_->bind_to_any_port(host);
}

bool HttpServer::bind(const std::string& host, int port) {
  return server_->bind_to_port(host, port);
}

bool HttpServer::listen_after_bind() { return server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_) server_->stop();
}

bool HttpServer::is_running() const { return server_->is_running(); }

void HttpServer::wait_until_ready() const { server_->wait_until_ready(); }

}  // namespace fashrank
