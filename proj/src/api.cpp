#include "deepalm/api.hpp"

#include "deepalm/json_io.hpp"

#include <httplib.h>

#include <atomic>
#include <charconv>

namespace deepalm::service {

using nlohmann::json;

namespace {

int http_status(Errc code) {
  switch (code) {
    case Errc::not_found:
      return 404;
    case Errc::conflict:
      return 409;
    default:
      return 400;
  }
}

std::string_view error_code(Errc code) {
  switch (code) {
    case Errc::invalid_argument:
      return "invalid_argument";
    case Errc::parse_error:
      return "parse_error";
    case Errc::not_found:
      return "not_found";
    case Errc::conflict:
      return "conflict";
    case Errc::config_error:
      return "config_error";
  }
  return "invalid_argument";
}

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code,
                const std::string& message) {
  send_json(res, {{"error", {{"code", code}, {"message", message}}}}, status);
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty())
    return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::exception& e) {
    throw Error(Errc::parse_error, std::string("malformed JSON body: ") + e.what());
  }
}

std::string sse_frame(const JournalEntry& e) {
  return "id: " + std::to_string(e.seq) + "\nevent: " + std::string(to_string(e.op))
         + "\ndata: " + journal_line(e) + "\n\n";
}

} // namespace

struct ApiServer::Impl {
  Monitor& monitor;
  httplib::Server server;
  std::atomic<bool> stopping{false};

  explicit Impl(Monitor& m) : monitor{m} {
    routes();
  }

  template <class F>
  httplib::Server::Handler wrap(F f) {
    return [f](const httplib::Request& req, httplib::Response& res) {
      try {
        f(req, res);
      } catch (const Error& e) {
        send_error(res, http_status(e.code()), error_code(e.code()), e.what());
      } catch (const json::exception& e) {
        send_error(res, 400, "invalid_argument", e.what());
      } catch (const std::exception& e) {
        send_error(res, 500, "internal", e.what());
      }
    };
  }

  void routes() {
    auto& s = server;
    s.Get("/api/v1/health", wrap([](const auto&, auto& res) {
      send_json(res, {{"status", "ok"}, {"version", version}});
    }));
    s.Get("/api/v1/routes", wrap([this](const auto&, auto& res) {
      send_json(res, monitor.config().routes);
    }));
    s.Get(R"(/api/v1/routes/([^/]+)/trace/latest)",
          wrap([this](const auto& req, auto& res) {
            const auto id = req.matches[1].str();
            auto t = monitor.latest_trace(id);
            if (!t)
              throw Error(Errc::not_found, "no trace yet for route '" + id + "'");
            send_json(res, trace_document(*t));
          }));
    s.Get(R"(/api/v1/routes/([^/]+)/events/latest)",
          wrap([this](const auto& req, auto& res) {
            const auto id = req.matches[1].str();
            auto ev = monitor.latest_events(id);
            if (!ev)
              throw Error(Errc::not_found, "no trace yet for route '" + id + "'");
            send_json(res, *ev);
          }));
    s.Get("/api/v1/alerts", wrap([this](const auto& req, auto& res) {
      AlertFilter f;
      if (auto v = req.get_param_value("status"); !v.empty())
        f.status = status_from_string(v);
      if (auto v = req.get_param_value("domain"); !v.empty())
        f.domain = domain_from_string(v);
      send_json(res, monitor.store().list(f));
    }));
    s.Post(R"(/api/v1/alerts/([^/]+)/(acknowledge|resolve))",
           wrap([this](const auto& req, auto& res) {
             const auto body = parse_body(req);
             std::optional<std::string> tag;
             if (auto it = body.find("tag"); it != body.end() && !it->is_null())
               tag = it->template get<std::string>();
             const auto action = action_from_string(req.matches[2].str());
             send_json(res, monitor.transition_alert(req.matches[1].str(), action, tag));
           }));
    s.Post("/api/v1/scenario/inject", wrap([this](const auto& req, auto& res) {
      const auto spec = parse_body(req).template get<fiber::IncidentSpec>();
      send_json(res, {{"incident_id", monitor.inject_incident(spec)}});
    }));
    s.Get(R"(/api/v1/devices/([^/]+)/health)",
          wrap([this](const auto& req, auto& res) {
            const auto id = req.matches[1].str();
            auto h = monitor.device_health(id);
            if (!h)
              throw Error(Errc::not_found, "no telemetry yet for device '" + id + "'");
            send_json(res, *h);
          }));
    s.Get("/api/v1/map/geojson", wrap([this](const auto&, auto& res) {
      send_json(res, monitor.geojson());
    }));
    s.Get("/api/v1/stream", wrap([this](const auto& req, auto& res) {
      std::uint64_t cursor = 0;
      auto from = req.get_header_value("Last-Event-ID");
      if (from.empty())
        from = req.get_param_value("since");
      if (!from.empty()) {
        const auto [end, ec] = std::from_chars(from.data(), from.data() + from.size(), cursor);
        if (ec != std::errc{} || end != from.data() + from.size())
          throw Error(Errc::invalid_argument, "bad stream position '" + from + "'");
      }
      res.set_header("Cache-Control", "no-cache");
      res.set_chunked_content_provider(
        "text/event-stream", [this, cursor](std::size_t, httplib::DataSink& sink) mutable {
          if (stopping)
            return false;
          auto entries = monitor.store().stream().wait_after(
            cursor, std::chrono::milliseconds{500});
          std::string out;
          for (const auto& e : entries) {
            out += sse_frame(e);
            cursor = e.seq;
          }
          if (out.empty())
            out = ": keep-alive\n\n";
          return !stopping && sink.write(out.data(), out.size());
        });
    }));
    s.set_error_handler([](const auto& req, auto& res) {
      if (res.body.empty())
        send_error(res, res.status, res.status == 404 ? "not_found" : "invalid_argument",
                   "no handler for " + req.method + " " + req.path);
    });
  }
};

ApiServer::ApiServer(Monitor& monitor) : impl_{std::make_unique<Impl>(monitor)} {
}

ApiServer::~ApiServer() {
  stop();
}

int ApiServer::bind(const std::string& host, int port) {
  if (port == 0)
    return impl_->server.bind_to_any_port(host);
  return impl_->server.bind_to_port(host, port) ? port : -1;
}

bool ApiServer::serve() {
  return impl_->server.listen_after_bind();
}

void ApiServer::stop() {
  impl_->stopping = true;
  impl_->server.stop();
}

} // namespace deepalm::service
