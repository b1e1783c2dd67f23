#pragma once

#include <filesystem>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "semaforge/config.hpp"

namespace semaforge::service {

struct Response {
  int status = 200;
  nlohmann::json body;
};

/// HTTP front-end over generate / forge / detect. Translators and the
/// detector are loaded on demand; one of each is held at a time and
/// inference on it is serialized.
class Service {
 public:
  Service(ServiceConfig config, std::filesystem::path dataset_root = {});
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Transport-free dispatch used by the HTTP handlers and by tests.
  Response handle(const std::string& method, const std::string& path, const std::string& body);

  /// Binds to config.port (0 picks a free port) and returns the bound port.
  int bind();
  /// Serves until stop(); call bind() first.
  void serve();
  void stop();

  /// OpenAPI-style description of the endpoints.
  static nlohmann::json schema();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace semaforge::service
