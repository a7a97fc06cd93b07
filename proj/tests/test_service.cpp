#include <cstdlib>
#include <future>
#include <thread>

#include "cnn_lens/errors.hpp"
#include "cnn_lens/image.hpp"
#include "cnn_lens/service.hpp"
#include "cnn_lens/trace_io.hpp"
#include "doctest.h"
#include "fixtures.hpp"
#include "httplib.h"
#include "json.hpp"

using namespace cnn_lens;
using nlohmann::json;

namespace {

class Running {
 public:
  explicit Running(ServiceConfig cfg) : service_(cfg) {
    port_ = service_.bind();
    thread_ = std::thread([this] { service_.run(); });
    for (int i = 0; i < 500 && !service_.running(); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(2));
    }
  }
  ~Running() {
    service_.stop();
    thread_.join();
  }
  int port() const { return port_; }
  const Service& service() const { return service_; }
  httplib::Client client() const { return httplib::Client("127.0.0.1", port_); }

 private:
  Service service_;
  int port_ = 0;
  std::thread thread_;
};

ServiceConfig reference_config() {
  ServiceConfig cfg;
  cfg.port = 0;
  cfg.model_path = fixtures::reference_weights();
  cfg.preset_dir = fixtures::presets();
  return cfg;
}

std::string as_string(const std::vector<std::uint8_t>& v) { return {v.begin(), v.end()}; }

}  // namespace

TEST_CASE("service endpoints") {
  Running svc(reference_config());
  auto cli = svc.client();
  const auto pepper = fixtures::read_file(fixtures::presets() / "bell_pepper.png");

  SUBCASE("model") {
    auto res = cli.Get("/api/model");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto info = json::parse(res->body);
    CHECK(info["class_labels"] == json(fixtures::reference_model().class_labels()));
    CHECK(info["architecture"].size() == 13);
  }
  SUBCASE("classify upload equals the engine") {
    auto res = cli.Post("/api/classify", as_string(pepper), "image/png");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto& m = fixtures::reference_model();
    CHECK(res->body == serialize_trace(forward(m, image_to_input(pepper, m.normalization()))));
    CHECK(json::parse(res->body)["prediction"]["label"] == "bell pepper");
  }
  SUBCASE("classify preset") {
    auto res = cli.Post("/api/classify", R"({"preset":"koala"})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->body == svc.service().engine().classify_preset("koala"));
  }
  SUBCASE("conv demo") {
    auto res = cli.Post("/api/conv-demo", R"({"in":6,"kernel":4,"stride":3,"padding":0})",
                        "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto r = json::parse(res->body);
    CHECK(r["out"] == 1);
    CHECK(r["fits_exactly"] == false);
    CHECK(r["valid"] == true);
  }
  SUBCASE("errors") {
    auto junk = cli.Post("/api/classify", "not an image", "application/octet-stream");
    REQUIRE(junk);
    CHECK(junk->status == 400);
    CHECK(json::parse(junk->body).contains("error"));

    auto missing = cli.Post("/api/classify", R"({"preset":"tractor"})", "application/json");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    auto malformed = cli.Post("/api/classify", R"({"preset":4})", "application/json");
    REQUIRE(malformed);
    CHECK(malformed->status == 400);

    auto demo = cli.Post("/api/conv-demo", R"({"in":"six"})", "application/json");
    REQUIRE(demo);
    CHECK(demo->status == 400);
  }
  SUBCASE("index") {
    auto res = cli.Get("/");
    REQUIRE(res);
    CHECK(res->status == 200);
    CHECK(res->get_header_value("Content-Type").rfind("text/html", 0) == 0);
  }
}

TEST_CASE("interleaved requests are independent") {
  Running svc(reference_config());
  const auto& engine = svc.service().engine();
  const std::vector<std::string> ids{"bell_pepper", "orange", "school_bus", "koala", "espresso"};
  std::vector<std::string> expected;
  for (const auto& id : ids) expected.push_back(engine.classify_preset(id));

  std::vector<std::future<bool>> jobs;
  for (int worker = 0; worker < 4; ++worker) {
    jobs.push_back(std::async(std::launch::async, [&, worker] {
      auto cli = svc.client();
      bool ok = true;
      for (std::size_t i = 0; i < ids.size(); ++i) {
        const std::size_t pick = (i + worker) % ids.size();
        auto res = cli.Post("/api/classify", json{{"preset", ids[pick]}}.dump(),
                            "application/json");
        ok = ok && res && res->status == 200 && res->body == expected[pick];
      }
      return ok;
    }));
  }
  for (auto& j : jobs) CHECK(j.get());
}

TEST_CASE("startup failures") {
  Running svc(reference_config());

  ServiceConfig clash = reference_config();
  clash.port = svc.port();
  Service second(clash);
  CHECK_THROWS_AS(second.bind(), PortBusyError);

  ServiceConfig bad;
  bad.model_path = "/nonexistent/weights.json";
  CHECK_THROWS_AS(Service{bad}, Error);

  ServiceConfig none;
  none.model_path.clear();
  CHECK_THROWS_AS(load_configured_model({}, std::nullopt), ConfigError);
  CHECK(load_configured_model({}, 7).fingerprint() == seeded_model(7).fingerprint());
}

TEST_CASE("model path resolution") {
  ::setenv(kModelEnvVar, "/from/env.json", 1);
  CHECK(resolve_model_path(std::nullopt) == std::filesystem::path("/from/env.json"));
  CHECK(resolve_model_path(std::filesystem::path("/explicit.json")) ==
        std::filesystem::path("/explicit.json"));
  ::unsetenv(kModelEnvVar);
  CHECK_FALSE(resolve_model_path(std::nullopt));
}
