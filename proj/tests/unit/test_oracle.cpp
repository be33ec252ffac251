#include <doctest.h>

#include <atomic>
#include <thread>

// Eigen (via these headers) must be parsed before httplib: the
// resolver headers httplib drags in define a `_res` macro that breaks
// Eigen's declarations.
#include "lsdat/errors.hpp"
#include "lsdat/oracle.hpp"
#include "support/synthetic.hpp"

#include <httplib.h>
#include <json.hpp>

using namespace lsdat;
using lsdat::testsupport::ScriptedOracle;
using lsdat::testsupport::TempDir;
using nlohmann::json;

namespace {

ImageTensor pixel_image(std::vector<double> values) {
  ImageTensor img(1, static_cast<int>(values.size()), 1);
  img.data = std::move(values);
  return img;
}

}  // namespace

TEST_CASE("linear oracle takes the argmax score") {
  // Two pixels, three classes: scores x0, x1, 0.5.
  LinearOracle oracle({{1.0, 0.0}, {0.0, 1.0}, {0.0, 0.0}}, {0.0, 0.0, 0.5});
  CHECK(oracle.query(pixel_image({0.9, 0.1})) == 0);
  CHECK(oracle.query(pixel_image({0.1, 0.9})) == 1);
  CHECK(oracle.query(pixel_image({0.2, 0.3})) == 2);
}

TEST_CASE("linear oracle breaks score ties toward the lowest class id") {
  LinearOracle oracle({{1.0}, {1.0}, {1.0}}, {0.0, 0.0, 0.0});
  CHECK(oracle.query(pixel_image({0.42})) == 0);
}

TEST_CASE("linear oracle rejects mismatched shapes without counting") {
  LinearOracle oracle({{1.0, 2.0}}, {0.0});
  CHECK_THROWS_AS(oracle.query(pixel_image({1.0, 2.0, 3.0})), OracleError);
  CHECK(oracle.read_counter().total == 0);
}

TEST_CASE("centroid oracle picks the nearest centroid, ties low") {
  std::vector<ImageTensor> centroids = {pixel_image({0.0, 0.0}), pixel_image({1.0, 1.0}),
                                        pixel_image({1.0, 0.0})};
  CentroidOracle oracle(centroids);
  CHECK(oracle.query(pixel_image({0.1, 0.1})) == 0);
  CHECK(oracle.query(pixel_image({0.9, 0.95})) == 1);
  CHECK(oracle.query(pixel_image({0.95, 0.1})) == 2);
  // Equidistant between classes 0 and 2.
  CHECK(oracle.query(pixel_image({0.5, 0.0})) == 0);
  CHECK(oracle.class_count() == 3);
}

TEST_CASE("query counters track totals and per-attack windows") {
  ScriptedOracle oracle({0, 1, 0, 1, 1}, 2);
  const ImageTensor img = pixel_image({0.5});

  oracle.query(img);
  oracle.query(img);
  CHECK(oracle.read_counter().total == 2);
  CHECK(oracle.read_counter().per_attack == 2);

  oracle.reset_counter();
  CHECK(oracle.read_counter().total == 2);
  CHECK(oracle.read_counter().per_attack == 0);

  oracle.query(img);
  CHECK(oracle.read_counter().total == 3);
  CHECK(oracle.read_counter().per_attack == 1);

  // Exhaustion throws and does not count.
  oracle.query(img);
  oracle.query(img);
  CHECK_THROWS_AS(oracle.query(img), OracleError);
  CHECK(oracle.read_counter().total == 5);
}

TEST_CASE("remote oracle round-trips the wire format") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/classify", [&](const httplib::Request& req, httplib::Response& res) {
    ++hits;
    const json body = json::parse(req.body);
    REQUIRE(body.at("height").get<int>() == 1);
    REQUIRE(body.at("width").get<int>() == 3);
    REQUIRE(body.at("channels").get<int>() == 1);
    const auto pixels = body.at("pixels").get<std::vector<double>>();
    REQUIRE(pixels.size() == 3);
    const int label = pixels[0] > 0.5 ? 1 : 0;
    res.set_content(json{{"label", label}}.dump(), "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteConfig cfg;
  cfg.url = "http://127.0.0.1:" + std::to_string(port);
  cfg.class_count = 2;
  RemoteOracle oracle(cfg);

  CHECK(oracle.query(pixel_image({0.9, 0.0, 0.0})) == 1);
  CHECK(oracle.query(pixel_image({0.1, 0.0, 0.0})) == 0);
  CHECK(oracle.read_counter().total == 2);
  CHECK(hits.load() == 2);

  server.stop();
  worker.join();
}

TEST_CASE("remote oracle retries transient failures without counting them") {
  httplib::Server server;
  std::atomic<int> hits{0};
  server.Post("/classify", [&](const httplib::Request&, httplib::Response& res) {
    const int n = ++hits;
    if (n <= 2) {
      res.status = 503;
      return;
    }
    res.set_content(json{{"label", 1}}.dump(), "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteConfig cfg;
  cfg.url = "http://127.0.0.1:" + std::to_string(port);
  cfg.retries = 2;
  RemoteOracle oracle(cfg);

  CHECK(oracle.query(pixel_image({0.5})) == 1);
  CHECK(hits.load() == 3);
  CHECK(oracle.read_counter().total == 1);  // one successful classification

  server.stop();
  worker.join();
}

TEST_CASE("remote oracle surfaces transport exhaustion as an error") {
  httplib::Server server;
  server.Post("/classify", [&](const httplib::Request&, httplib::Response& res) {
    res.status = 500;
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteConfig cfg;
  cfg.url = "http://127.0.0.1:" + std::to_string(port);
  cfg.retries = 1;
  RemoteOracle oracle(cfg);

  CHECK_THROWS_AS(oracle.query(pixel_image({0.5})), OracleTransportError);
  CHECK(oracle.read_counter().total == 0);

  server.stop();
  worker.join();
}

TEST_CASE("remote oracle rejects malformed response bodies") {
  httplib::Server server;
  server.Post("/classify", [&](const httplib::Request&, httplib::Response& res) {
    res.set_content("{\"verdict\": \"dog\"}", "application/json");
  });

  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  RemoteConfig cfg;
  cfg.url = "http://127.0.0.1:" + std::to_string(port);
  cfg.retries = 0;
  RemoteOracle oracle(cfg);
  CHECK_THROWS_AS(oracle.query(pixel_image({0.5})), OracleTransportError);

  server.stop();
  worker.join();
}

TEST_CASE("recorded traces replay bit-for-bit and reject divergence") {
  LinearOracle model({{1.0, -1.0}, {-1.0, 1.0}}, {0.0, 0.0});
  RecordingOracle recorder(model);

  const ImageTensor a = pixel_image({0.8, 0.1});
  const ImageTensor b = pixel_image({0.1, 0.8});
  const Label la = recorder.query(a);
  const Label lb = recorder.query(b);
  REQUIRE(recorder.trace().size() == 2);

  TempDir tmp;
  const auto trace_path = tmp.path() / "trace.json";
  save_trace(trace_path, recorder.trace(), recorder.class_count());

  auto replay = load_replay_oracle(trace_path);
  CHECK(replay->class_count() == 2);
  CHECK(replay->query(a) == la);
  CHECK(replay->query(b) == lb);
  CHECK(replay->read_counter().total == 2);

  // Exhausted trace.
  CHECK_THROWS_AS(replay->query(a), ReplayError);

  // Diverging query order.
  auto replay2 = load_replay_oracle(trace_path);
  CHECK_THROWS_AS(replay2->query(b), ReplayError);
  CHECK(replay2->read_counter().total == 0);
}

TEST_CASE("constructor validation") {
  CHECK_THROWS_AS(LinearOracle({}, {}), ConfigError);
  CHECK_THROWS_AS(LinearOracle({{1.0}}, {}), ConfigError);
  CHECK_THROWS_AS(LinearOracle({{1.0}, {1.0, 2.0}}, {0.0, 0.0}), ConfigError);
  CHECK_THROWS_AS(CentroidOracle({}), ConfigError);
  CHECK_THROWS_AS(CentroidOracle({pixel_image({0.0}), pixel_image({0.0, 1.0})}), ConfigError);
  RemoteConfig bad;
  bad.url = "127.0.0.1:80";  // missing scheme
  CHECK_THROWS_AS(RemoteOracle{bad}, ConfigError);
}
