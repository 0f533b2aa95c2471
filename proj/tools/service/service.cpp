#include "service.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include <polard/config.hpp>
#include <polard/transcript.hpp>

#include "../common/log.hpp"

namespace polard::service {

namespace fs = std::filesystem;

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

fs::path default_data_dir() {
  if (const char* env = std::getenv("POLARD_DATA_DIR"); env && *env) return env;
  return fs::current_path() / "polard-data";
}

namespace {

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Reply error(int status, const std::string& message, Json extra = Json::object()) {
  extra["error"] = message;
  return {status, std::move(extra)};
}

template <class F>
Reply guarded(F&& f) {
  try {
    return f();
  } catch (const ConfigError& e) {
    return error(400, e.what(), {{"path", e.path()}});
  } catch (const LabelError& e) {
    return error(422, e.what());
  } catch (const PhaseError& e) {
    return error(409, e.what());
  } catch (const FeedbackError& e) {
    return error(400, e.what());
  } catch (const SolverError& e) {
    const auto& d = e.diagnostics();
    return error(500, e.what(),
                 {{"diagnostics",
                   {{"newton_iterations", d.newton_iterations},
                    {"converged", d.converged},
                    {"gradient_inf_norm", d.final_gradient_inf_norm}}}});
  } catch (const Json::exception& e) {
    return error(400, std::string("malformed request: ") + e.what());
  } catch (const std::exception& e) {
    return error(500, e.what());
  }
}

Json parse_body(const std::string& body) {
  if (body.find_first_not_of(" \t\r\n") == std::string::npos) return Json::object();
  try {
    return Json::parse(body);
  } catch (const Json::parse_error& e) {
    throw FeedbackError(std::string("request body is not valid JSON: ") + e.what());
  }
}

Json handle_json(const SessionHandle& h) {
  return {{"id", h.id}, {"created_at", h.created_at}, {"config_digest", h.config_digest}};
}

void write_atomically(const fs::path& path, const std::string& text) {
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

SessionService::SessionService(fs::path data_dir, std::optional<SessionConfig> default_config)
    : data_dir_(std::move(data_dir)), default_config_(std::move(default_config)) {
  if (!data_dir_.empty()) {
    fs::create_directories(data_dir_ / "sessions");
    restore();
  }
}

void SessionService::restore() {
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(data_dir_ / "sessions"))
    if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const std::string id = file.stem().string();
    try {
      auto entry = std::make_shared<Entry>();
      entry->state.emplace(replay_transcript(parse_transcript_jsonl(read_file(file))));
      const fs::path meta = file.parent_path() / (id + ".meta.json");
      if (fs::exists(meta)) {
        const Json m = Json::parse(read_file(meta));
        entry->handle = {m.at("id").get<std::string>(), m.at("created_at").get<std::string>(),
                         m.at("config_digest").get<std::string>()};
      } else {
        entry->handle = {id, "", fnv1a_hex(entry->state->transcript.front().at("config").dump())};
      }
      const auto dash = id.find_last_of('-');
      if (dash != std::string::npos) {
        const std::uint64_t n = std::strtoull(id.c_str() + dash + 1, nullptr, 10);
        next_id_ = std::max(next_id_, n + 1);
      }
      sessions_.emplace(id, std::move(entry));
      ++restored_;
      log::info("restored session " + id);
    } catch (const std::exception& e) {
      log::warn("could not restore session " + id + ": " + e.what());
    }
  }
}

void SessionService::persist(const Entry& entry) const {
  if (data_dir_.empty()) return;
  const fs::path dir = data_dir_ / "sessions";
  write_atomically(dir / (entry.handle.id + ".jsonl"), transcript_jsonl(entry.state->transcript));
  const fs::path meta = dir / (entry.handle.id + ".meta.json");
  if (!fs::exists(meta)) write_atomically(meta, handle_json(entry.handle).dump(2) + "\n");
}

std::shared_ptr<SessionService::Entry> SessionService::find(const std::string& id) const {
  std::shared_lock lock(registry_mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::size_t SessionService::size() const {
  std::shared_lock lock(registry_mutex_);
  return sessions_.size();
}

Reply SessionService::create(const std::string& body) {
  return guarded([&]() -> Reply {
    Json j;
    try {
      j = parse_body(body);
    } catch (const FeedbackError& e) {
      return error(400, e.what());
    }
    SessionConfig cfg;
    if (j.is_object() && j.contains("config")) {
      cfg = session_config_from_json(j.at("config"));
    } else if (j.is_object() && j.empty() && default_config_) {
      cfg = *default_config_;
    } else {
      cfg = session_config_from_json(j);
    }
    const auto warnings = validate_session_config(cfg);

    auto entry = std::make_shared<Entry>();
    entry->state.emplace(start_session(cfg));
    entry->handle.created_at = utc_now();
    entry->handle.config_digest = fnv1a_hex(session_config_to_json(cfg).dump());
    {
      std::unique_lock lock(registry_mutex_);
      entry->handle.id = "session-" + std::to_string(next_id_++);
      sessions_.emplace(entry->handle.id, entry);
    }
    std::lock_guard guard(entry->mutex);
    persist(*entry);
    log::info("created " + entry->handle.id);
    Json out = handle_json(entry->handle);
    out["state"] = state_json(*entry->state);
    out["warnings"] = warnings;
    return {201, out};
  });
}

Reply SessionService::list() const {
  Json out = Json::array();
  std::shared_lock lock(registry_mutex_);
  for (const auto& [id, entry] : sessions_) out.push_back(handle_json(entry->handle));
  return {200, {{"sessions", out}}};
}

#define POLARD_WITH_SESSION(id)                                       \
  auto entry = find(id);                                              \
  if (!entry) return error(404, "unknown session '" + (id) + "'");    \
  std::lock_guard guard(entry->mutex);                                \
  SessionState& st = *entry->state

Reply SessionService::state(const std::string& id) {
  return guarded([&]() -> Reply {
    POLARD_WITH_SESSION(id);
    Json out = handle_json(entry->handle);
    out["state"] = state_json(st);
    return {200, out};
  });
}

Reply SessionService::query(const std::string& id) {
  return guarded([&]() -> Reply {
    POLARD_WITH_SESSION(id);
    return {200, query_json(st, build_queries(st))};
  });
}

Reply SessionService::feedback(const std::string& id, const std::string& body) {
  return guarded([&]() -> Reply {
    POLARD_WITH_SESSION(id);
    const Json j = parse_body(body);
    const FeedbackResponses responses = responses_from_json(j, st);
    submit_feedback(st, responses);
    persist(*entry);
    return {200, {{"state", state_json(st)}}};
  });
}

Reply SessionService::advance(const std::string& id) {
  return guarded([&]() -> Reply {
    POLARD_WITH_SESSION(id);
    polard::advance(st);
    persist(*entry);
    Json actions = state_json(st)["current_actions"];
    double seconds = 0.0;
    Json updates = Json::array();
    for (const auto& u : st.last_updates) {
      seconds += u.seconds;
      updates.push_back({{"purpose", u.purpose}, {"subset_size", u.subset_size}, {"duration_s", u.seconds}});
    }
    return {200,
            {{"state", state_json(st)},
             {"new_actions", st.phase == Phase::finished ? Json::array() : actions},
             {"posterior_updates", updates},
             {"posterior_update_seconds", seconds}}};
  });
}

Reply SessionService::posterior(const std::string& id) {
  return guarded([&]() -> Reply {
    POLARD_WITH_SESSION(id);
    return {200, posterior_snapshot(st)};
  });
}

Reply SessionService::history(const std::string& id) {
  return guarded([&]() -> Reply {
    POLARD_WITH_SESSION(id);
    return {200, {{"id", id}, {"events", st.transcript}}};
  });
}

#undef POLARD_WITH_SESSION

HttpServer::HttpServer(SessionService& service, ServerOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto& svr = *server_;
  svr.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                           {"Access-Control-Allow-Headers", "Content-Type"}});
  svr.set_read_timeout(options_.timeout_seconds);
  svr.set_write_timeout(options_.timeout_seconds);

  auto send = [](httplib::Response& res, const Reply& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  svr.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });
  svr.Get("/healthz", [send](const httplib::Request&, httplib::Response& res) {
    send(res, {200, {{"status", "ok"}}});
  });
  svr.Post("/sessions", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service_.create(req.body));
  });
  svr.Get("/sessions", [this, send](const httplib::Request&, httplib::Response& res) {
    send(res, service_.list());
  });
  svr.Get(R"(/sessions/([^/]+))", [this, send](const httplib::Request& req, httplib::Response& res) {
    send(res, service_.state(req.matches[1]));
  });
  svr.Get(R"(/sessions/([^/]+)/query)",
          [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, service_.query(req.matches[1]));
          });
  svr.Post(R"(/sessions/([^/]+)/feedback)",
           [this, send](const httplib::Request& req, httplib::Response& res) {
             send(res, service_.feedback(req.matches[1], req.body));
           });
  svr.Post(R"(/sessions/([^/]+)/advance)",
           [this, send](const httplib::Request& req, httplib::Response& res) {
             send(res, service_.advance(req.matches[1]));
           });
  svr.Get(R"(/sessions/([^/]+)/posterior)",
          [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, service_.posterior(req.matches[1]));
          });
  svr.Get(R"(/sessions/([^/]+)/history)",
          [this, send](const httplib::Request& req, httplib::Response& res) {
            send(res, service_.history(req.matches[1]));
          });
  svr.set_error_handler([send](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty())
      send(res, error(404, "no route for " + req.method + " " + req.path));
  });
  svr.set_logger([](const httplib::Request& req, const httplib::Response& res) {
    log::debug(req.method + " " + req.path + " -> " + std::to_string(res.status));
  });
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::bind() {
  if (options_.port == 0) {
    port_ = server_->bind_to_any_port(options_.host);
    if (port_ < 0) throw std::runtime_error("cannot bind " + options_.host);
  } else {
    if (!server_->bind_to_port(options_.host, options_.port))
      throw std::runtime_error("cannot bind " + options_.host + ":" + std::to_string(options_.port));
    port_ = options_.port;
  }
}

int HttpServer::start() {
  bind();
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void HttpServer::run() {
  bind();
  log::info("listening on http://" + options_.host + ":" + std::to_string(port_));
  server_->listen_after_bind();
}

void HttpServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace polard::service
