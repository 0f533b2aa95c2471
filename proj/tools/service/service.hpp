#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <thread>

#include <polard/engine.hpp>

namespace httplib {
class Server;
}

namespace polard::service {

struct SessionHandle {
  std::string id;
  std::string created_at;  // ISO 8601, UTC
  std::string config_digest;
};

/// Status code plus JSON body of one API call.
struct Reply {
  int status = 200;
  Json body;
};

/// Session registry behind the HTTP routes. Each session has its own mutex; the
/// registry lock is only held to look sessions up or insert them.
class SessionService {
 public:
  /// Sessions are persisted under `data_dir` (none when empty) and restored from it.
  explicit SessionService(std::filesystem::path data_dir = {},
                          std::optional<SessionConfig> default_config = std::nullopt);

  Reply create(const std::string& body);
  Reply list() const;
  Reply state(const std::string& id);
  Reply query(const std::string& id);
  Reply feedback(const std::string& id, const std::string& body);
  Reply advance(const std::string& id);
  Reply posterior(const std::string& id);
  Reply history(const std::string& id);

  std::size_t size() const;
  /// Number of sessions restored from disk at construction.
  std::size_t restored() const { return restored_; }

 private:
  struct Entry {
    std::mutex mutex;
    SessionHandle handle;
    std::optional<SessionState> state;
  };

  std::shared_ptr<Entry> find(const std::string& id) const;
  void persist(const Entry& entry) const;
  void restore();

  std::filesystem::path data_dir_;
  std::optional<SessionConfig> default_config_;
  mutable std::shared_mutex registry_mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t next_id_ = 1;
  std::size_t restored_ = 0;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  /// Read/write timeout of a request, which bounds a synchronous advance.
  int timeout_seconds = 120;
};

/// HTTP front end. start() binds and serves on a background thread.
class HttpServer {
 public:
  HttpServer(SessionService& service, ServerOptions options);
  ~HttpServer();

  /// Binds the port (0 picks a free one) and starts serving. Throws on bind failure.
  int start();
  /// Serves on the calling thread until stop().
  void run();
  void stop();
  int port() const { return port_; }

 private:
  void bind();

  SessionService& service_;
  ServerOptions options_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  int port_ = 0;
};

std::string fnv1a_hex(std::string_view text);

/// Data directory from POLARD_DATA_DIR, or "polard-data" in the working directory.
std::filesystem::path default_data_dir();

}  // namespace polard::service
