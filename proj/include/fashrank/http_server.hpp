#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include "fashrank/service.hpp"

namespace httplib {
class Server;
}

namespace fashrank {

// cpp-httplib front end for AnnotationService. Handlers run on the library's
// worker pool; the service serializes its own writes.
class HttpServer {
 public:
  explicit HttpServer(AnnotationService& service);
  ~HttpServer();

  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Serves files under `dir` at `/ui` (the annotator frontend build).
  bool mount_static(const std::filesystem::path& dir);

  // Binds an ephemeral port and returns it, or -1.
  int bind_any_port(const std::string& host = "127.0.0.1");
  bool bind(const std::string& host, int port);
  // Blocks until stop().
  bool listen_after_bind();
  void stop();
  bool is_running() const;
  void wait_until_ready() const;

 private:
  AnnotationService& service_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace fashrank
