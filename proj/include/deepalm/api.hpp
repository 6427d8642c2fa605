#pragma once

#include "deepalm/monitor.hpp"

#include <memory>
#include <string>

namespace deepalm::service {

/// HTTP/JSON front end of a Monitor (routes under /api/v1).
class ApiServer {
public:
  explicit ApiServer(Monitor& monitor);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  /// Binds the listening socket; port 0 picks a free port. Returns the
  /// bound port.
  int bind(const std::string& host, int port);
  /// Serves until stop(); call after bind().
  bool serve();
  void stop();

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

} // namespace deepalm::service
