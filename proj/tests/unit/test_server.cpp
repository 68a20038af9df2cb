#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include "doctest.h"
#include "specshape/error.hpp"
#include "specshape/server.hpp"
// After Eigen: <resolv.h> defines a _res macro that Eigen uses as a name.
#include "httplib.h"

using namespace specshape;
using nlohmann::json;

namespace {

std::shared_ptr<const Session> make_session(std::uint64_t seed, const std::string& id) {
  DatasetOptions opt;
  opt.family = FamilySpec::defaults(FamilyKind::blob3d);
  opt.family.resolution = 1;
  opt.count = 10;
  opt.k = 6;
  opt.order = FemOrder::linear;
  auto s = std::make_shared<Session>();
  s->samples = make_dataset(opt);
  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.batch = 5;
  cfg.k = 6;
  s->bundle = train(build_dense_model(s->samples.n, 6, 3, seed), s->samples, cfg).bundle;
  s->id = id;
  return s;
}

const std::shared_ptr<const Session>& session_a() {
  static const auto s = make_session(1, "a");
  return s;
}

std::vector<double> spectrum(const Session& s, int i) {
  std::vector<double> out(s.samples.k());
  for (int j = 0; j < s.samples.k(); ++j) out[j] = s.samples.spectra(i, j);
  return out;
}

}  // namespace

TEST_CASE("service without a model") {
  InferenceService svc;
  CHECK(svc.handle("GET", "/model", "").status == 503);
  CHECK(svc.handle("POST", "/decode", R"({"eigenvalues": [0, 1]})").status == 503);
  const auto api = svc.handle("GET", "/api", "");
  CHECK(api.status == 200);
  CHECK(api.body["endpoints"].size() == 9);
}

TEST_CASE("service endpoints") {
  InferenceService svc;
  svc.load(session_a());
  const Session& s = *session_a();
  const auto s0 = spectrum(s, 0);

  const auto model = svc.handle("GET", "/model", "");
  CHECK(model.status == 200);
  CHECK(model.body["k"] == 6);
  CHECK(model.body["latent_dim"] == 6);
  CHECK(model.body["template"]["n"] == 42);
  CHECK(model.body["template"]["faces"].size() == 80);
  CHECK(model.body["normalization"]["eig_scale"].get<double>() == s.bundle.norm.eig_scale);

  const auto dec = svc.handle("POST", "/decode", json{{"eigenvalues", s0}}.dump());
  REQUIRE(dec.status == 200);
  CHECK(dec.body["vertices"] == shape_to_json(shape_from_spectrum(s.bundle, s0).shape)["vertices"]);

  const auto band = svc.handle("POST", "/band", json{{"base_spectrum", s0}, {"lo", 1}, {"hi", 3}, {"factor", 1.0}}.dump());
  REQUIRE(band.status == 200);
  CHECK(band.body["vertices"] == dec.body["vertices"]);
  CHECK(band.body["spectrum"].get<std::vector<double>>() == s0);

  const auto lat = svc.handle("POST", "/decode-latent", json{{"latent", dec.body["latent"]}}.dump());
  CHECK(lat.body["vertices"] == dec.body["vertices"]);

  const Shape shape = unflatten(s.samples.coords.row(2), 3, s.samples.faces);
  const auto enc = svc.handle("POST", "/encode", json{{"shape", shape_to_json(shape)}}.dump());
  REQUIRE(enc.status == 200);
  const Eigen::VectorXd z = encode(s.bundle, shape);
  CHECK(enc.body["latent"].get<std::vector<double>>() == std::vector<double>(z.data(), z.data() + z.size()));
  CHECK(enc.body["predicted_spectrum"].get<std::vector<double>>() == latent_to_spec(s.bundle, z));

  const auto samples = svc.handle("GET", "/samples", "", {{"n", "3"}});
  CHECK(samples.body["samples"].size() == 3);
  CHECK(samples.body["samples"][1]["spectrum"].get<std::vector<double>>() == spectrum(s, 1));
  CHECK(samples.body["total"] == 10);

  // The pose's own predicted spectrum is a fixed point of style transfer.
  const Shape pose = unflatten(s.samples.coords.row(4), 3, s.samples.faces);
  const auto own = latent_to_spec(s.bundle, encode(s.bundle, pose));
  const auto st = svc.handle("POST", "/style-transfer",
                             json{{"spec_style", own}, {"pose_sample_id", 4}, {"steps", 20}}.dump());
  REQUIRE(st.status == 200);
  CHECK(st.body["alignment"].size() == 21);
  CHECK(st.body["vertices"] == shape_to_json(decode(s.bundle, encode(s.bundle, pose)))["vertices"]);
}

TEST_CASE("service errors") {
  InferenceService svc;
  svc.load(session_a());
  const auto s0 = spectrum(*session_a(), 0);

  auto bad = svc.handle("POST", "/decode", json{{"eigenvalues", {0.0, 1.0}}}.dump());
  CHECK(bad.status == 400);
  CHECK(bad.body["error"]["field"] == "eigenvalues");
  CHECK(bad.body["error"]["message"].get<std::string>().find("expects 6") != std::string::npos);

  CHECK(svc.handle("POST", "/decode", "{not json").status == 400);
  CHECK(svc.handle("POST", "/decode", "[1, 2]").status == 400);
  CHECK(svc.handle("POST", "/decode", "{}").body["error"]["field"] == "eigenvalues");
  CHECK(svc.handle("POST", "/decode", R"({"eigenvalues": [0, 1, "x", 3, 4, 5]})").status == 400);

  auto pose = svc.handle("POST", "/style-transfer", json{{"spec_style", s0}, {"pose_sample_id", 99}}.dump());
  CHECK(pose.status == 400);
  CHECK(pose.body["error"]["field"] == "pose_sample_id");
  CHECK(svc.handle("POST", "/style-transfer", json{{"spec_style", s0}, {"pose_sample_id", "x"}}.dump()).status == 400);

  auto factor = svc.handle("POST", "/band", json{{"base_spectrum", s0}, {"lo", 1}, {"hi", 3}, {"factor", -1.0}}.dump());
  CHECK(factor.status == 400);
  CHECK(svc.handle("GET", "/samples", "", {{"n", "many"}}).status == 400);
  CHECK(svc.handle("POST", "/encode", json{{"shape", {{"vertices", {{0, 0, 0}}}}}}.dump()).status == 400);

  // Overflowing eigenvalues reach the decoder as inf.
  std::vector<double> huge(6, 1e300);
  const auto num = svc.handle("POST", "/decode", json{{"eigenvalues", huge}}.dump());
  CHECK(num.status == 422);
  CHECK(num.body["error"]["kind"] == "numerical");

  CHECK(svc.handle("GET", "/nothing", "").status == 404);
}

TEST_CASE("HTTP server: routes, CORS, static UI, concurrency") {
  InferenceService svc;
  svc.load(session_a());
  const auto ui = std::filesystem::temp_directory_path() / "specshape_ui_test";
  std::filesystem::create_directories(ui);
  std::ofstream(ui / "index.html") << "<html>explorer</html>";

  ServerOptions opt;
  opt.port = 0;
  opt.ui_dir = ui;
  HttpServer server(svc, opt);
  const int port = server.bind();
  std::thread thread([&] { server.serve(); });

  httplib::Client cli("127.0.0.1", port);
  const auto model = cli.Get("/model");
  REQUIRE(model);
  CHECK(model->status == 200);
  CHECK(json::parse(model->body)["k"] == 6);

  const auto local = cli.Get("/model", {{"Origin", "http://localhost:5173"}});
  CHECK(local->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");
  const auto remote = cli.Get("/model", {{"Origin", "http://example.com"}});
  CHECK(!remote->has_header("Access-Control-Allow-Origin"));
  const auto pre = cli.Options("/decode", {{"Origin", "http://127.0.0.1:3000"}});
  CHECK(pre->status == 204);
  CHECK(pre->get_header_value("Access-Control-Allow-Methods").find("POST") != std::string::npos);

  const auto page = cli.Get("/ui/index.html");
  REQUIRE(page);
  CHECK(page->status == 200);
  CHECK(page->body == "<html>explorer</html>");
  CHECK(cli.Get("/api")->status == 200);

  // 100 concurrent decodes match serial execution.
  std::vector<std::string> bodies, serial;
  for (int i = 0; i < 100; ++i) {
    bodies.push_back(json{{"eigenvalues", spectrum(*session_a(), i % 10)}}.dump());
    serial.push_back(json::parse(cli.Post("/decode", bodies.back(), "application/json")->body)["vertices"].dump());
  }
  std::vector<std::future<std::string>> futures;
  for (int i = 0; i < 100; ++i) {
    futures.push_back(std::async(std::launch::async, [&, i] {
      httplib::Client c("127.0.0.1", port);
      const auto r = c.Post("/decode", bodies[i], "application/json");
      return r && r->status == 200 ? json::parse(r->body)["vertices"].dump() : std::string("failed");
    }));
  }
  int same = 0;
  for (int i = 0; i < 100; ++i) same += futures[i].get() == serial[i];
  CHECK(same == 100);

  // Swapping the model mid-flight: every response comes from one model.
  const auto other = make_session(7, "b");
  const std::string body0 = bodies[0];
  const std::string from_a = serial[0];
  const std::string from_b = shape_to_json(shape_from_spectrum(other->bundle, spectrum(*other, 0)).shape)["vertices"].dump();
  futures.clear();
  for (int i = 0; i < 40; ++i) {
    futures.push_back(std::async(std::launch::async, [&] {
      httplib::Client c("127.0.0.1", port);
      const auto r = c.Post("/decode", body0, "application/json");
      return r && r->status == 200 ? json::parse(r->body)["vertices"].dump() : std::string("failed");
    }));
    if (i == 20) svc.load(other);
  }
  int consistent = 0;
  for (auto& f : futures) {
    const std::string v = f.get();
    consistent += v == from_a || v == from_b;
  }
  CHECK(consistent == 40);
  CHECK(json::parse(cli.Get("/model")->body)["id"] == "b");

  server.stop();
  thread.join();
  std::filesystem::remove_all(ui);
}

TEST_CASE("UI route without assets") {
  InferenceService svc;
  ServerOptions opt;
  opt.port = 0;
  HttpServer server(svc, opt);
  const int port = server.bind();
  std::thread thread([&] { server.serve(); });
  httplib::Client cli("127.0.0.1", port);
  const auto r = cli.Get("/ui/index.html");
  REQUIRE(r);
  CHECK(r->status == 404);
  CHECK(json::parse(r->body)["error"]["message"].get<std::string>().find("explorer assets") != std::string::npos);
  CHECK(cli.Get("/model")->status == 503);
  server.stop();
  thread.join();
}
