#include "cnn_lens/service.hpp"

#include <cstdlib>

#include "httplib.h"
#include "json.hpp"
#include "json_writer.hpp"

namespace cnn_lens {
namespace {

constexpr const char* kJson = "application/json; charset=utf-8";

constexpr const char* kIndexPage = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>cnn-lens</title></head>
<body>
<h1>cnn-lens</h1>
<p>No UI bundle is configured. The engine API is available:</p>
<ul>
<li><code>GET /api/model</code></li>
<li><code>POST /api/classify</code> (image bytes, or <code>{"preset": "&lt;id&gt;"}</code>)</li>
<li><code>POST /api/conv-demo</code> (<code>{"in":6,"kernel":4,"stride":3,"padding":0}</code>)</li>
</ul>
</body></html>
)";

void send_error(httplib::Response& res, int status, const std::string& message) {
  detail::JsonWriter w;
  w.begin_object().key("error").value(message).end_object();
  res.status = status;
  res.set_content(w.take(), kJson);
}

template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const UnknownPresetError& e) {
    send_error(res, 404, e.what());
  } catch (const DecodeError& e) {
    send_error(res, 400, e.what());
  } catch (const ConfigError& e) {
    send_error(res, 400, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

bool is_json(const httplib::Request& req) {
  return req.get_header_value("Content-Type").rfind("application/json", 0) == 0;
}

}  // namespace

std::optional<std::filesystem::path> resolve_model_path(
    const std::optional<std::filesystem::path>& explicit_path) {
  if (explicit_path && !explicit_path->empty()) return explicit_path;
  if (const char* env = std::getenv(kModelEnvVar); env && *env) {
    return std::filesystem::path(env);
  }
  return std::nullopt;
}

Model load_configured_model(const std::filesystem::path& model_path,
                            std::optional<std::uint64_t> seed) {
  if (!model_path.empty()) return load_model_file(model_path);
  if (seed) return seeded_model(*seed);
  throw ConfigError("no model configured: pass a weights file, set " +
                    std::string(kModelEnvVar) + ", or request seeded weights");
}

struct Service::Impl {
  ServiceConfig config;
  Engine engine;
  httplib::Server server;
  bool bound = false;

  explicit Impl(const ServiceConfig& cfg)
      : config(cfg), engine(load_configured_model(cfg.model_path, cfg.seed), cfg.preset_dir) {
    server.set_payload_max_length(std::size_t{64} << 20);
    // No SO_REUSEPORT: a second instance on the same port must fail to bind.
    server.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
    });

    server.Get("/api/model", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { res.set_content(engine.model_info(), kJson); });
    });

    server.Post("/api/classify", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (is_json(req)) {
          nlohmann::json body;
          try {
            body = nlohmann::json::parse(req.body);
          } catch (const nlohmann::json::parse_error& e) {
            throw ConfigError(std::string("classify: ") + e.what());
          }
          if (!body.is_object() || !body.contains("preset") || !body["preset"].is_string()) {
            throw ConfigError("classify: expected {\"preset\": \"<id>\"}");
          }
          res.set_content(engine.classify_preset(body["preset"].get<std::string>()), kJson);
        } else {
          const auto* data = reinterpret_cast<const std::uint8_t*>(req.body.data());
          res.set_content(engine.classify_image({data, req.body.size()}), kJson);
        }
      });
    });

    server.Post("/api/conv-demo", [](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { res.set_content(Engine::conv_demo(req.body), kJson); });
    });

    if (!config.ui_dir.empty()) {
      if (!server.set_mount_point("/", config.ui_dir.string())) {
        throw ConfigError("UI directory '" + config.ui_dir.string() + "' does not exist");
      }
    } else {
      server.Get("/", [](const httplib::Request&, httplib::Response& res) {
        res.set_content(kIndexPage, "text/html; charset=utf-8");
      });
    }
  }
};

Service::Service(const ServiceConfig& config) : impl_(std::make_unique<Impl>(config)) {}

Service::~Service() { stop(); }

int Service::bind() {
  auto& cfg = impl_->config;
  int port = cfg.port;
  if (port == 0) {
    port = impl_->server.bind_to_any_port(cfg.host);
    if (port < 0) throw PortBusyError("could not bind an ephemeral port on " + cfg.host);
  } else if (!impl_->server.bind_to_port(cfg.host, port)) {
    throw PortBusyError("port " + std::to_string(port) + " on " + cfg.host +
                        " is unavailable");
  }
  impl_->bound = true;
  return port;
}

void Service::run() {
  if (!impl_->bound) throw ConfigError("Service::run called before bind");
  impl_->server.listen_after_bind();
}

void Service::stop() {
  if (impl_) impl_->server.stop();
}

bool Service::running() const { return impl_->server.is_running(); }

const Engine& Service::engine() const noexcept { return impl_->engine; }

void serve(const ServiceConfig& config) {
  Service service(config);
  service.bind();
  service.run();
}

}  // namespace cnn_lens
