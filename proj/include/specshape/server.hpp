#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "json.hpp"
#include "specshape/apps.hpp"
#include "specshape/spectral_ae.hpp"

namespace httplib {
class Server;
}

namespace specshape {

// A loaded model plus optional dataset samples for browsing and style
// transfer poses. Immutable once published.
struct Session {
  ModelBundle bundle;
  Dataset samples;  // may be empty
  std::string id;   // shown by GET /model
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Transport-independent request handling; every method is safe to call
// concurrently with itself and with load().
class InferenceService {
 public:
  // Publishes a new session; in-flight requests finish on the old one.
  void load(std::shared_ptr<const Session> session);
  std::shared_ptr<const Session> session() const;

  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body,
                     const std::map<std::string, std::string>& query = {}) const;

  // Endpoint listing served at /api.
  static nlohmann::json api_description();

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<const Session> session_;
};

// Shapes as JSON: {"vertices": [[x, y, z], ...], "faces": [[i, j, k], ...]}
// for meshes, vertices only for clouds, 2-element rows for contours.
nlohmann::json shape_to_json(const Shape& shape);
Shape shape_from_json(const nlohmann::json& j);

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path ui_dir;  // static assets for /ui; optional
  bool cors_localhost = true;
};

class HttpServer {
 public:
  HttpServer(const InferenceService& service, ServerOptions options);
  ~HttpServer();
  HttpServer(const HttpServer&) = delete;
  HttpServer& operator=(const HttpServer&) = delete;

  // Binds the socket; returns the port in use.
  int bind();
  // Serves until stop(); call bind() first.
  void serve();
  void stop();

 private:
  const InferenceService& service_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace specshape
