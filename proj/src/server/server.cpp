#include "specshape/server.hpp"

#include "httplib.h"
#include "specshape/error.hpp"

namespace specshape {

namespace {

// Client error tied to one request field.
struct FieldError : ConfigError {
  FieldError(std::string f, const std::string& what) : ConfigError(what), field(std::move(f)) {}
  std::string field;
};

ApiResponse error_response(int status, const char* kind, const std::string& message, const std::string& field = "") {
  nlohmann::json e{{"kind", kind}, {"message", message}};
  if (!field.empty()) e["field"] = field;
  return {status, {{"error", e}}};
}

const nlohmann::json& require(const nlohmann::json& body, const std::string& name) {
  if (!body.contains(name)) throw FieldError(name, "missing field '" + name + "'");
  return body.at(name);
}

std::vector<double> number_array(const nlohmann::json& body, const std::string& name, int expected) {
  const auto& v = require(body, name);
  if (!v.is_array()) throw FieldError(name, "'" + name + "' must be an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& x : v) {
    if (!x.is_number()) throw FieldError(name, "'" + name + "' must contain only numbers");
    out.push_back(x.get<double>());
    if (!std::isfinite(out.back())) throw FieldError(name, "'" + name + "' contains a non-finite value");
  }
  if (expected >= 0 && static_cast<int>(out.size()) != expected) {
    throw FieldError(name, "'" + name + "' has " + std::to_string(out.size()) + " entries but the model expects " +
                               std::to_string(expected));
  }
  return out;
}

template <typename T>
T scalar(const nlohmann::json& body, const std::string& name, T fallback) {
  if (!body.contains(name)) return fallback;
  try {
    return body.at(name).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw FieldError(name, "'" + name + "' has the wrong type");
  }
}

template <typename Rows>
nlohmann::json rows_to_json(const Rows& m) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

nlohmann::json vertices_json(const Shape& s) { return shape_to_json(s).at("vertices"); }

Shape sample_shape(const Session& s, int id) {
  if (id < 0 || id >= s.samples.size()) {
    throw FieldError("pose_sample_id", "sample id " + std::to_string(id) + " is outside 0.." +
                                           std::to_string(s.samples.size() - 1));
  }
  if (s.samples.input == InputKind::pointcloud) return PointCloud{s.samples.clouds[id]};
  return unflatten(s.samples.coords.row(id), s.samples.dim, s.samples.faces);
}

nlohmann::json model_json(const Session& s) {
  const ModelBundle& b = s.bundle;
  nlohmann::json tmpl{{"n", b.n}, {"dim", b.dim}};
  if (b.template_faces.rows() > 0) tmpl["faces"] = rows_to_json(b.template_faces);
  std::vector<double> center(b.norm.center.data(), b.norm.center.data() + b.norm.center.size());
  return {{"id", s.id},
          {"k", b.k},
          {"latent_dim", b.latent},
          {"input", to_string(b.input)},
          {"template", tmpl},
          {"normalization", {{"center", center}, {"coord_scale", b.norm.coord_scale}, {"eig_scale", b.norm.eig_scale}}},
          {"samples", s.samples.size()}};
}

}  // namespace

nlohmann::json shape_to_json(const Shape& shape) {
  if (const auto* m = std::get_if<Mesh>(&shape)) {
    return {{"vertices", rows_to_json(m->vertices)}, {"faces", rows_to_json(m->faces)}};
  }
  if (const auto* c = std::get_if<Contour>(&shape)) return {{"vertices", rows_to_json(c->points)}};
  return {{"vertices", rows_to_json(std::get<PointCloud>(shape).points)}};
}

Shape shape_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw FieldError("shape", "'shape' must be an object with 'vertices'");
  const auto& v = require(j, "vertices");
  if (!v.is_array() || v.empty()) throw FieldError("shape.vertices", "'vertices' must be a nonempty array");
  const std::size_t dim = v.at(0).is_array() ? v.at(0).size() : 0;
  if (dim != 2 && dim != 3) throw FieldError("shape.vertices", "vertices must have 2 or 3 coordinates");
  Eigen::MatrixXd pts(v.size(), dim);
  for (std::size_t r = 0; r < v.size(); ++r) {
    if (!v[r].is_array() || v[r].size() != dim) {
      throw FieldError("shape.vertices", "vertex " + std::to_string(r) + " does not have " + std::to_string(dim) +
                                             " coordinates");
    }
    for (std::size_t c = 0; c < dim; ++c) {
      if (!v[r][c].is_number()) throw FieldError("shape.vertices", "vertex " + std::to_string(r) + " is not numeric");
      pts(r, c) = v[r][c].get<double>();
    }
  }
  if (dim == 2) {
    Contour c;
    c.points = pts;
    return c;
  }
  if (!j.contains("faces")) {
    PointCloud cloud;
    cloud.points = pts;
    return cloud;
  }
  const auto& f = j.at("faces");
  Mesh m;
  m.vertices = pts;
  m.faces.resize(f.size(), 3);
  for (std::size_t r = 0; r < f.size(); ++r) {
    if (!f[r].is_array() || f[r].size() != 3) throw FieldError("shape.faces", "face " + std::to_string(r) + " is not a triangle");
    for (int c = 0; c < 3; ++c) m.faces(r, c) = f[r][c].get<int>();
  }
  validate(m, false);
  return m;
}

// ---------------------------------------------------------------------------

void InferenceService::load(std::shared_ptr<const Session> session) {
  std::lock_guard<std::mutex> lock(mutex_);
  session_ = std::move(session);
}

std::shared_ptr<const Session> InferenceService::session() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return session_;
}

nlohmann::json InferenceService::api_description() {
  return {{"endpoints",
           {{{"method", "GET"}, {"path", "/model"}, {"returns", "k, latent_dim, template {n, dim, faces?}, normalization"}},
            {{"method", "POST"}, {"path", "/decode"}, {"body", "{eigenvalues: [k]}"}, {"returns", "{vertices, latent, seconds}"}},
            {{"method", "POST"}, {"path", "/decode-latent"}, {"body", "{latent: [latent_dim]}"}, {"returns", "{vertices}"}},
            {{"method", "POST"}, {"path", "/encode"}, {"body", "{shape: {vertices, faces?}}"}, {"returns", "{latent, predicted_spectrum}"}},
            {{"method", "POST"},
             {"path", "/style-transfer"},
             {"body", "{spec_style: [k], pose_sample_id, w?, steps?, lr?}"},
             {"returns", "{vertices, latent, pose_gap, alignment: [{step, objective, alignment}]}"}},
            {{"method", "GET"}, {"path", "/samples"}, {"query", "n (default 20)"}, {"returns", "{samples: [{id, spectrum}]}"}},
            {{"method", "POST"},
             {"path", "/band"},
             {"body", "{base_spectrum: [k], lo, hi, factor}"},
             {"returns", "{spectrum, vertices}"}},
            {{"method", "GET"}, {"path", "/api"}, {"returns", "this listing"}},
            {{"method", "GET"}, {"path", "/ui"}, {"returns", "explorer static assets"}}}},
          {"errors", {{"400", "malformed request or k mismatch"}, {"422", "numerical failure"}, {"503", "no model loaded"}}}};
}

ApiResponse InferenceService::handle(const std::string& method, const std::string& path, const std::string& body_text,
                                     const std::map<std::string, std::string>& query) const {
  if (path == "/api") return {200, api_description()};
  const std::shared_ptr<const Session> session = this->session();
  if (!session) return error_response(503, "unavailable", "no model is loaded");
  const ModelBundle& b = session->bundle;

  try {
    nlohmann::json body;
    if (method == "POST") {
      try {
        body = nlohmann::json::parse(body_text);
      } catch (const nlohmann::json::parse_error& e) {
        return error_response(400, "config", std::string("request body is not valid JSON: ") + e.what());
      }
      if (!body.is_object()) return error_response(400, "config", "request body must be a JSON object");
    }

    if (method == "GET" && path == "/model") return {200, model_json(*session)};

    if (method == "GET" && path == "/samples") {
      int n = 20;
      if (auto it = query.find("n"); it != query.end()) {
        try {
          n = std::stoi(it->second);
        } catch (const std::exception&) {
          throw FieldError("n", "query parameter n must be an integer");
        }
        if (n < 0) throw FieldError("n", "query parameter n must be nonnegative");
      }
      nlohmann::json list = nlohmann::json::array();
      const int count = std::min(n, session->samples.size());
      for (int i = 0; i < count; ++i) {
        std::vector<double> s(session->samples.k());
        for (int j = 0; j < session->samples.k(); ++j) s[j] = session->samples.spectra(i, j);
        nlohmann::json item{{"id", i}, {"spectrum", s}};
        if (i < static_cast<int>(session->samples.samples.size())) item["sample"] = to_json(session->samples.samples[i]);
        list.push_back(std::move(item));
      }
      return {200, {{"samples", list}, {"total", session->samples.size()}}};
    }

    if (method == "POST" && path == "/decode") {
      const Reconstruction r = shape_from_spectrum(b, number_array(body, "eigenvalues", b.k));
      std::vector<double> z(r.latent.data(), r.latent.data() + r.latent.size());
      return {200, {{"vertices", vertices_json(r.shape)}, {"latent", z}, {"seconds", r.seconds}}};
    }

    if (method == "POST" && path == "/decode-latent") {
      const auto z = number_array(body, "latent", b.latent);
      return {200, {{"vertices", vertices_json(decode(b, Eigen::Map<const Eigen::VectorXd>(z.data(), z.size())))}}};
    }

    if (method == "POST" && path == "/encode") {
      const Shape shape = shape_from_json(require(body, "shape"));
      const Eigen::VectorXd z = encode(b, shape);
      return {200, {{"latent", std::vector<double>(z.data(), z.data() + z.size())}, {"predicted_spectrum", latent_to_spec(b, z)}}};
    }

    if (method == "POST" && path == "/style-transfer") {
      const auto style = number_array(body, "spec_style", b.k);
      const auto& id_json = require(body, "pose_sample_id");
      if (!id_json.is_number_integer()) throw FieldError("pose_sample_id", "'pose_sample_id' must be an integer");
      const int id = id_json.get<int>();
      StyleTransferConfig cfg;
      cfg.w = scalar<double>(body, "w", cfg.w);
      cfg.steps = scalar<int>(body, "steps", cfg.steps);
      cfg.lr = scalar<double>(body, "lr", cfg.lr);
      if (cfg.steps > 100000) throw FieldError("steps", "'steps' is limited to 100000 per request");
      const StyleTransferResult r = style_transfer(b, style, sample_shape(*session, id), cfg);
      nlohmann::json curve = nlohmann::json::array();
      for (const auto& p : r.curve) curve.push_back({{"step", p.step}, {"objective", p.objective}, {"alignment", p.alignment}});
      return {200,
              {{"vertices", vertices_json(r.shape)},
               {"latent", std::vector<double>(r.latent.data(), r.latent.data() + r.latent.size())},
               {"pose_gap", r.pose_gap},
               {"alignment", curve}}};
    }

    if (method == "POST" && path == "/band") {
      const auto base = number_array(body, "base_spectrum", b.k);
      const int lo = scalar<int>(body, "lo", 1);
      const int hi = scalar<int>(body, "hi", std::min(12, b.k - 1));
      const double factor = scalar<double>(body, "factor", 1.0);
      const auto spectrum = band_modify(base, lo, hi, factor);
      return {200, {{"spectrum", spectrum}, {"vertices", vertices_json(shape_from_spectrum(b, spectrum).shape)}}};
    }

    return error_response(404, "config", "no endpoint " + method + " " + path);
  } catch (const FieldError& e) {
    return error_response(400, "config", e.what(), e.field);
  } catch (const NumericalError& e) {
    return error_response(422, "numerical", e.what());
  } catch (const Error& e) {
    return error_response(400, to_string(e.kind()), e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "config", e.what());
  }
}

// ---------------------------------------------------------------------------

namespace {

bool localhost_origin(const std::string& origin) {
  for (const char* prefix : {"http://localhost", "http://127.0.0.1", "https://localhost", "https://127.0.0.1"}) {
    const std::string p(prefix);
    if (origin.compare(0, p.size(), p) == 0 && (origin.size() == p.size() || origin[p.size()] == ':')) return true;
  }
  return false;
}

}  // namespace

HttpServer::HttpServer(const InferenceService& service, ServerOptions options)
    : service_(service), options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  auto& srv = *server_;
  const bool cors = options_.cors_localhost;
  auto add_cors = [cors](const httplib::Request& req, httplib::Response& res) {
    const std::string origin = req.get_header_value("Origin");
    if (cors && localhost_origin(origin)) {
      res.set_header("Access-Control-Allow-Origin", origin);
      res.set_header("Vary", "Origin");
      res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
      res.set_header("Access-Control-Allow-Headers", "Content-Type");
    }
  };
  auto dispatch = [this, add_cors](const httplib::Request& req, httplib::Response& res) {
    std::map<std::string, std::string> query;
    for (const auto& [k, v] : req.params) query.emplace(k, v);
    const ApiResponse r = service_.handle(req.method, req.path, req.body, query);
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
    add_cors(req, res);
  };
  for (const char* path : {"/model", "/samples", "/api"}) srv.Get(path, dispatch);
  for (const char* path : {"/decode", "/decode-latent", "/encode", "/style-transfer", "/band"}) srv.Post(path, dispatch);
  srv.Options(".*", [add_cors](const httplib::Request& req, httplib::Response& res) {
    res.status = 204;
    add_cors(req, res);
  });

  if (!options_.ui_dir.empty() && std::filesystem::is_directory(options_.ui_dir)) {
    srv.set_mount_point("/ui", options_.ui_dir.string());
  } else {
    const std::string where = options_.ui_dir.empty() ? "no --ui-dir given" : options_.ui_dir.string() + " not found";
    srv.Get("/ui.*", [where](const httplib::Request&, httplib::Response& res) {
      res.status = 404;
      res.set_content(nlohmann::json{{"error", {{"kind", "config"}, {"message", "explorer assets unavailable: " + where}}}}.dump(),
                      "application/json");
    });
  }
  srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    std::string message = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      message = e.what();
    } catch (...) {
    }
    res.status = 500;
    res.set_content(nlohmann::json{{"error", {{"kind", "internal"}, {"message", message}}}}.dump(), "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  if (options_.port == 0) {
    const int port = server_->bind_to_any_port(options_.host);
    if (port < 0) throw ConfigError("cannot bind " + options_.host);
    options_.port = port;
    return port;
  }
  if (!server_->bind_to_port(options_.host, options_.port)) {
    throw ConfigError("cannot bind " + options_.host + ":" + std::to_string(options_.port) + " (port in use?)");
  }
  return options_.port;
}

void HttpServer::serve() { server_->listen_after_bind(); }

void HttpServer::stop() {
  if (server_ && server_->is_running()) server_->stop();
}

}  // namespace specshape
