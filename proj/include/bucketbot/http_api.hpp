#pragma once

// JSON-over-HTTP front end for ChatService. See docs/API.md.

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "bucketbot/chat_service.hpp"

namespace bucketbot {

struct ServiceConfig {
  std::string model_path;
  std::string bots_dir;
  std::string gating_path;  // optional; built-in defaults otherwise
  std::string data_dir = "data";
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;  // optional; serves the browser client

  // `key = value` file; unknown keys are rejected.
  static ServiceConfig parse(std::string_view content, const std::filesystem::path& base = {}) {
    ServiceConfig c;
    std::size_t line_no = 0;
    auto resolve = [&](std::string_view v) {
      std::filesystem::path p{std::string(v)};
      return (p.is_relative() && !base.empty() ? base / p : p).string();
    };
    for (auto line : detail::split(content, '\n')) {
      ++line_no;
      line = detail::trim(line);
      if (line.empty() || line.front() == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) throw Error("expected key = value at line " + std::to_string(line_no));
      const std::string key(detail::trim(line.substr(0, eq)));
      const auto value = detail::trim(line.substr(eq + 1));
      if (key == "model")
        c.model_path = resolve(value);
      else if (key == "bots")
        c.bots_dir = resolve(value);
      else if (key == "gating")
        c.gating_path = resolve(value);
      else if (key == "data_dir")
        c.data_dir = resolve(value);
      else if (key == "static_dir")
        c.static_dir = resolve(value);
      else if (key == "host")
        c.host = std::string(value);
      else if (key == "port") {
        const auto p = detail::parse_int<int>(value);
        if (!p || *p < 0 || *p > 65535) throw Error("bad port at line " + std::to_string(line_no));
        c.port = *p;
      } else {
        throw Error("unknown key '" + key + "' at line " + std::to_string(line_no));
      }
    }
    return c;
  }

  static ServiceConfig load(const std::string& path) {
    return parse(detail::read_file(path), std::filesystem::path(path).parent_path());
  }

  // BUCKETBOT_PORT and BUCKETBOT_DATA_DIR override the file.
  void apply_environment() {
    if (const char* p = std::getenv("BUCKETBOT_PORT")) {
      const auto v = detail::parse_int<int>(p);
      if (!v || *v < 0 || *v > 65535) throw Error("bad BUCKETBOT_PORT '" + std::string(p) + "'");
      port = *v;
    }
    if (const char* d = std::getenv("BUCKETBOT_DATA_DIR")) data_dir = d;
  }
};

// Loads model, bots and gating config; throws on any missing artifact.
inline ChatPipeline load_pipeline(const ServiceConfig& c) {
  if (c.model_path.empty()) throw Error("service config: no model path");
  if (c.bots_dir.empty()) throw Error("service config: no bot directory");
  ChatPipeline p;
  p.model = std::make_shared<const Model>(load_model(c.model_path));
  p.bots = load_bot_directory(c.bots_dir);
  p.gating = c.gating_path.empty() ? default_gating_config() : load_gating_config(c.gating_path);
  return p;
}

namespace detail {

inline void json_reply(httplib::Response& res, int status, const Json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void error_reply(httplib::Response& res, int status, const std::string& message) {
  json_reply(res, status, Json{{"error", message}});
}

inline Json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return Json::object();
  auto j = Json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ValidationError("request body must be a JSON object");
  return j;
}

// Maps library errors to HTTP status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const NotFoundError& e) {
    error_reply(res, 404, e.what());
  } catch (const ValidationError& e) {
    error_reply(res, 400, e.what());
  } catch (const Json::exception& e) {
    error_reply(res, 400, std::string("bad request: ") + e.what());
  } catch (const std::exception& e) {
    error_reply(res, 500, e.what());
  }
}

}  // namespace detail

inline void register_routes(httplib::Server& server, ChatService& service) {
  using detail::guarded;
  using detail::json_reply;

  server.Get("/health", [&](const httplib::Request&, httplib::Response& res) {
    json_reply(res, 200,
               Json{{"status", "ok"},
                    {"model", std::string(to_string(service.pipeline().model->kind()))},
                    {"sessions", service.session_count()}});
  });

  server.Post("/session", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_body(req);
      std::optional<Arm> arm;
      if (body.contains("arm") && !body["arm"].is_null()) {
        arm = arm_from_string(body["arm"].get<std::string>());
        if (!arm) throw ValidationError("unknown arm '" + body["arm"].get<std::string>() + "'");
      }
      const auto s = service.create_session(arm);
      json_reply(res, 201,
                 Json{{"session_id", s.session_id}, {"display_name", std::string(ChatService::display_name(s.arm))}});
    });
  });

  server.Post(R"(/session/([0-9a-fA-F]+)/message)", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_body(req);
      if (!body.contains("text") || !body["text"].is_string()) throw ValidationError("field 'text' is required");
      const auto r = service.post_message(req.matches[1].str(), body["text"].get<std::string>());
      json_reply(res, 200,
                 Json{{"final_text", r.final_text}, {"turn_index", r.turn_index}, {"decision_summary", r.decision_summary}});
    });
  });

  server.Post("/survey", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = detail::parse_body(req);
      SurveyRecord r;
      if (!body.contains("session_id") || !body["session_id"].is_string())
        throw ValidationError("field 'session_id' is required");
      if (!body.contains("understood") || !body["understood"].is_boolean())
        throw ValidationError("field 'understood' must be a boolean");
      if (!body.contains("rating") || !body["rating"].is_number_integer())
        throw ValidationError("field 'rating' must be an integer 0..5");
      r.session_id = body["session_id"].get<std::string>();
      r.understood = body["understood"].get<bool>();
      const auto rating = body["rating"].get<long long>();
      if (rating < 0 || rating > 5) throw ValidationError("rating " + std::to_string(rating) + " outside 0..5");
      r.rating = static_cast<int>(rating);
      if (body.contains("free_text") && body["free_text"].is_string()) r.free_text = body["free_text"].get<std::string>();
      const bool superseded = service.submit_survey(std::move(r));
      json_reply(res, 200, Json{{"status", "ok"}, {"superseded", superseded}});
    });
  });

  server.Get("/summary", [&](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] {
      try {
        json_reply(res, 200, to_json(service.summary()));
      } catch (const ValidationError& e) {
        detail::error_reply(res, 409, e.what());
      }
    });
  });

  server.Get("/export", [&](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      ExportFilter filter;
      if (req.has_param("arm")) {
        filter.arm = arm_from_string(req.get_param_value("arm"));
        if (!filter.arm) throw ValidationError("unknown arm");
      }
      filter.with_survey_only = req.has_param("with_survey") && req.get_param_value("with_survey") != "0";
      std::string body;
      for (const auto& r : service.export_sessions(filter)) body += r.dump() + "\n";
      res.status = 200;
      res.set_content(body, "application/x-ndjson");
    });
  });
}

// Owns the HTTP server for a ChatService.
class HttpServer {
 public:
  explicit HttpServer(ChatService& service, const std::string& static_dir = {}) {
    register_routes(server_, service);
    if (!static_dir.empty() && !server_.set_mount_point("/", static_dir))
      throw Error("static directory '" + static_dir + "' not found");
  }

  // Binds now; returns the bound port (useful with port 0).
  int bind(const std::string& host, int port) {
    if (port == 0) {
      const int p = server_.bind_to_any_port(host);
      if (p < 0) throw Error("cannot bind " + host);
      return p;
    }
    if (!server_.bind_to_port(host, port)) throw Error("cannot bind " + host + ":" + std::to_string(port));
    return port;
  }

  void listen_after_bind() { server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }
  httplib::Server& raw() { return server_; }

 private:
  httplib::Server server_;
};

}  // namespace bucketbot
