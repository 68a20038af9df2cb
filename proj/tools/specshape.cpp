// specshape: command-line entry point for dataset generation, spectra,
// training, evaluation and the shape-from-spectrum applications.

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <optional>

#include "CLI11.hpp"
#include "specshape/apps.hpp"
#include "specshape/error.hpp"
#include "specshape/run_config.hpp"
#include "specshape/server.hpp"

using namespace specshape;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::config: return 1;
    case ErrorKind::data: return 2;
    case ErrorKind::numerical: return 3;
  }
  return 3;
}

void report_error(const std::string& kind, const std::string& message) {
  std::cerr << json{{"error", {{"kind", kind}, {"message", message}}}}.dump() << std::endl;
}

fs::path manifest_path(const fs::path& out) {
  if (fs::is_directory(out)) return out / "run.json";
  return fs::path(out.string() + ".run.json");
}

std::unique_ptr<SpectrumCache> open_cache(const std::string& dir) {
  if (dir.empty()) return std::make_unique<SpectrumCache>();
  fs::create_directories(dir);
  return std::make_unique<SpectrumCache>(dir);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
  if (!out) throw DataError("cannot write " + path.string());
}

std::vector<double> read_spectrum(const fs::path& path) {
  Spectrum s = load_spectrum(path);
  validate(s);
  return s.values;
}

// Element order and family of the training run, when the checkpoint was
// written by `train`.
std::optional<RunConfig> run_config_of(const ModelBundle& bundle) {
  if (!bundle.info.contains("run_config")) return std::nullopt;
  return RunConfig::from_json(bundle.info["run_config"]);
}

FemOrder order_of(const ModelBundle& bundle) {
  const auto cfg = run_config_of(bundle);
  return cfg ? cfg->order : FemOrder::cubic;
}

std::vector<double> spectrum_of_file(const fs::path& path, int k, FemOrder order, SpectrumCache* cache) {
  return spectrum_of(load_shape(path), k, order, cache).values;
}

Points3 points_of(const Shape& shape) {
  if (const auto* m = std::get_if<Mesh>(&shape)) return m->vertices;
  if (const auto* c = std::get_if<PointCloud>(&shape)) return c->points;
  return lift(std::get<Contour>(shape).points);
}

// Training or held-out rows regenerated from a family draw range.
Dataset dataset_for(const ModelBundle& bundle, const FamilySpec& family, int first, int count, FemOrder order,
                    SpectrumCache* cache) {
  DatasetOptions o;
  o.family = family;
  o.first_index = first;
  o.count = count;
  o.k = bundle.k;
  o.order = order;
  o.input = InputKind::dense_template;
  return make_dataset(o, cache);
}

Dataset training_set(const ModelBundle& bundle, SpectrumCache* cache) {
  const auto cfg = run_config_of(bundle);
  if (!cfg) throw ConfigError("checkpoint does not record its training data; it was not written by 'specshape train'");
  return dataset_for(bundle, cfg->family, cfg->first_index, cfg->count, cfg->order, cache);
}

Dataset test_set(const ModelBundle& bundle, const fs::path& manifest, SpectrumCache* cache) {
  const DataManifest m = DataManifest::load(manifest);
  return dataset_for(bundle, m.family, m.first_index, m.count, order_of(bundle), cache);
}

struct Common {
  std::string cache;
};

// ---------------------------------------------------------------------------

struct GenData {
  std::string family = "blob3d";
  std::string family_config;
  int count = 0;
  int first = 0;
  std::uint64_t seed = 1;
  int resolution = -1;
  std::string format;
  std::string out;

  void add(CLI::App& app) {
    auto* c = app.add_subcommand("gen-data", "Draw shapes from a synthetic family and write them with a manifest");
    c->add_option("--family", family, "Family kind (blob3d, contour2d)")->capture_default_str();
    c->add_option("--family-config", family_config, "Family spec JSON; replaces --family, --seed, --resolution");
    c->add_option("--count", count, "Number of shapes")->required()->check(CLI::PositiveNumber);
    c->add_option("--first", first, "Index of the first draw")->capture_default_str()->check(CLI::NonNegativeNumber);
    c->add_option("--seed", seed, "Family seed")->capture_default_str();
    c->add_option("--resolution", resolution,
                  "Icosphere subdivision (blob3d, default 3) or contour points (contour2d, default 256)");
    c->add_option("--format", format, "File format: off, obj, json (default off for meshes, json for contours)");
    c->add_option("--out", out, "Output directory")->required();
    c->callback([this] { run(); });
  }

  void run() const {
    FamilySpec spec;
    if (!family_config.empty()) {
      std::ifstream in(family_config);
      if (!in) throw DataError("cannot open " + family_config);
      spec = family_spec_from_json(json::parse(in));
    } else {
      spec = FamilySpec::defaults(family_kind_from_string(family));
      spec.seed = seed;
      if (resolution >= 0) spec.resolution = resolution;
    }
    std::string ext = format.empty() ? (spec.kind == FamilyKind::blob3d ? "off" : "json") : format;
    if (spec.kind == FamilyKind::contour2d && ext != "json") throw ConfigError("contours are written as json");
    if (spec.kind == FamilyKind::blob3d && ext != "off" && ext != "obj") throw ConfigError("meshes are written as off or obj");

    fs::create_directories(out);
    DataManifest m;
    m.family = spec;
    m.first_index = first;
    m.count = count;
    for (int i = 0; i < count; ++i) {
      const FamilySample sample = spec.draw(static_cast<std::uint64_t>(first + i));
      char name[32];
      std::snprintf(name, sizeof name, "shape_%05d.%s", first + i, ext.c_str());
      save_shape(generate(sample), fs::path(out) / name);
      m.samples.push_back(sample);
      m.files.push_back(name);
    }
    write_text(fs::path(out) / "manifest.json", m.to_json().dump(2) + "\n");
    const json cfg{{"family", to_json(spec)}, {"first_index", first}, {"count", count}, {"format", ext}};
    write_run_manifest(run_manifest("gen-data", cfg, {{"family", spec.seed}}, {{"directory", out}}),
                       fs::path(out) / "run.json");
    std::cout << json{{"written", count}, {"directory", out}}.dump() << '\n';
  }
};

struct SpectrumCmd {
  std::string in, out, order = "cubic";
  int k = 30;
  const Common* common = nullptr;

  void add(CLI::App& app, const Common& c) {
    common = &c;
    auto* s = app.add_subcommand("spectrum", "Laplace-Beltrami spectrum of a mesh or contour");
    s->add_option("--in", in, "Shape file (.off, .obj, contour .json)")->required();
    s->add_option("--k", k, "Number of eigenvalues")->capture_default_str()->check(CLI::PositiveNumber);
    s->add_option("--order", order, "FEM order for meshes (linear, cubic)")->capture_default_str();
    s->add_option("--out", out, "Spectrum JSON output; printed to stdout when omitted");
    s->callback([this] { run(); });
  }

  void run() const {
    auto cache = open_cache(common->cache);
    const Spectrum s = spectrum_of(load_shape(in), k, fem_order_from_string(order), cache.get());
    if (out.empty()) {
      std::cout << to_json(s).dump() << '\n';
      return;
    }
    save_spectrum(s, out);
    write_run_manifest(run_manifest("spectrum", {{"in", in}, {"k", k}, {"order", order}}, json::object(), {{"spectrum", out}}),
                       manifest_path(out));
  }
};

struct TrainCmd {
  std::string config, out, log;
  std::optional<int> epochs, k, batch;
  std::optional<double> alpha, lr;
  std::optional<std::uint64_t> seed;
  bool no_rho = false;
  bool verbose = false;
  const Common* common = nullptr;

  void add(CLI::App& app, const Common& c) {
    common = &c;
    const TrainConfig d;
    auto* t = app.add_subcommand("train", "Train the spectral autoencoder; writes a checkpoint, CSV log and run manifest");
    t->add_option("--config", config,
                  "Run config JSON with sections family, data, train, paths; unknown keys are rejected");
    t->add_option("--out", out, "Checkpoint path")->required();
    t->add_option("--log", log, "Per-epoch CSV (default: <out>.csv)");
    t->add_option("--alpha", alpha, "Spectral loss weight [default 1e-4, published value]");
    t->add_option("--k", k, "Eigenvalues per spectrum and latent size [default 30, published value]");
    t->add_option("--batch", batch, "Minibatch size [default 16, published value]");
    t->add_option("--lr", lr, "Adam learning rate [default 1e-4, published value]");
    t->add_option("--epochs", epochs, "Training epochs [default " + std::to_string(d.epochs) + "]");
    t->add_option("--seed", seed, "Initialization and shuffling seed [default 1]");
    t->add_flag("--no-rho", no_rho, "Drop the rho term (ablation)");
    t->add_flag("--verbose", verbose, "Print the loss every epoch");
    t->callback([this] { run(); });
  }

  void run() const {
    RunConfig rc = config.empty() ? RunConfig{} : RunConfig::load(config);
    json tj = rc.train.to_json();
    if (alpha) tj["alpha"] = *alpha;
    if (k) tj["k"] = *k;
    if (batch) tj["batch"] = *batch;
    if (lr) tj["lr"] = *lr;
    if (epochs) tj["epochs"] = *epochs;
    if (seed) tj["seed"] = *seed;
    if (no_rho) tj["use_rho"] = false;
    json cj = rc.to_json();
    cj["train"] = tj;
    if (!common->cache.empty()) cj["paths"]["cache"] = common->cache;
    rc = RunConfig::from_json(cj);

    auto cache = open_cache(rc.cache);
    const Dataset data = make_dataset(rc.dataset_options(), cache.get());
    ModelBundle model = rc.input == InputKind::pointcloud
                            ? build_pointcloud_model(rc.train.k, data.n, rc.train.seed)
                            : build_dense_model(data.n, rc.train.k, data.dim, rc.train.seed);

    TrainOptions opt;
    opt.rescue_checkpoint = fs::path(out + ".rescue");
    if (verbose) {
      opt.on_epoch = [](const EpochLog& e) {
        std::cerr << "epoch " << e.epoch << " loss " << e.loss.total << " l_x " << e.loss.recon << " l_lambda "
                  << e.loss.spectral << '\n';
        return true;
      };
    }
    TrainResult result = train(std::move(model), data, rc.train, opt);
    // The cache location does not influence the weights; keep it out of the
    // checkpoint so identical runs give identical files.
    json recorded = rc.to_json();
    recorded.erase("paths");
    result.bundle.info["run_config"] = recorded;
    save_bundle(result.bundle, out);

    const std::string csv = log.empty() ? out + ".csv" : log;
    std::ofstream lf(csv);
    write_training_csv(result.log, lf);
    if (!lf) throw DataError("cannot write " + csv);

    write_run_manifest(run_manifest("train", rc.to_json(), {{"family", rc.family.seed}, {"train", rc.train.seed}},
                                    {{"checkpoint", out}, {"log", csv}}),
                       manifest_path(out));
    const auto& last = result.log.back().loss;
    std::cout << json{{"checkpoint", out},
                      {"epochs", result.log.size()},
                      {"loss", last.total},
                      {"loss_x", last.recon},
                      {"loss_lambda", last.spectral}}
                     .dump()
              << '\n';
  }
};

struct EvalCmd {
  std::string checkpoint, ablation, testset, out;
  std::vector<double> fractions{0.5, 0.25, 0.1};
  const Common* common = nullptr;

  void add(CLI::App& app, const Common& c) {
    common = &c;
    auto* e = app.add_subcommand("eval", "Held-out evaluation");
    e->require_subcommand(1);

    auto* t = e->add_subcommand("table1", "Shape-from-spectrum MSE: ours, ours without rho, nearest neighbour");
    t->add_option("--checkpoint", checkpoint, "Model trained with rho")->required();
    t->add_option("--ablation", ablation, "Model trained with --no-rho on the same data")->required();
    t->add_option("--testset", testset, "gen-data directory or manifest of held-out shapes")->required();
    t->add_option("--out", out, "Also write the table as JSON");
    t->callback([this] { table1(); });

    auto* y = e->add_subcommand("cycle", "Relative error of rho(pi(lambda)) against lambda");
    y->add_option("--checkpoint", checkpoint, "Model")->required();
    y->add_option("--testset", testset, "gen-data directory or manifest")->required();
    y->callback([this] { cycle(); });

    auto* s = e->add_subcommand("superres", "Reconstruction MSE from decimated inputs");
    s->add_option("--checkpoint", checkpoint, "Model")->required();
    s->add_option("--testset", testset, "gen-data directory or manifest")->required();
    s->add_option("--fractions", fractions, "Vertex fractions kept by decimation")->capture_default_str();
    s->callback([this] { superres(); });
  }

  void table1() const {
    auto cache = open_cache(common->cache);
    const ModelBundle ours = load_bundle(checkpoint);
    const ModelBundle no_rho = load_bundle(ablation);
    const auto a = run_config_of(ours), b = run_config_of(no_rho);
    if (!a || !b) throw ConfigError("both checkpoints must be written by 'specshape train'");
    json ja = a->to_json(), jb = b->to_json();
    ja["train"].erase("use_rho");
    jb["train"].erase("use_rho");
    if (ja != jb) throw ConfigError("the ablation was trained with a different configuration");
    if (!a->train.use_rho || b->train.use_rho) throw ConfigError("--checkpoint needs rho, --ablation must be trained with --no-rho");

    const Dataset train = training_set(ours, cache.get());
    const Dataset test = test_set(ours, testset, cache.get());
    const Table1 t = evaluate_table1(ours, no_rho, train, test);
    write_table1(t, std::cout);
    const json j{{"ours", t.ours}, {"ours_without_rho", t.no_rho}, {"nn", t.nn}, {"count", t.count}};
    if (!out.empty()) {
      write_text(out, j.dump(2) + "\n");
      write_run_manifest(run_manifest("eval table1", {{"checkpoint", checkpoint}, {"ablation", ablation}, {"testset", testset}},
                                      json::object(), {{"table", out}}),
                         manifest_path(out));
    }
  }

  void cycle() const {
    auto cache = open_cache(common->cache);
    const ModelBundle bundle = load_bundle(checkpoint);
    std::cout << json{{"cycle_error", cycle_error(bundle, test_set(bundle, testset, cache.get()))}}.dump() << '\n';
  }

  void superres() const {
    auto cache = open_cache(common->cache);
    const ModelBundle bundle = load_bundle(checkpoint);
    const Dataset test = test_set(bundle, testset, cache.get());
    json rows = json::array();
    for (const double f : fractions) {
      const auto e = super_resolution_errors(bundle, test, f, order_of(bundle), cache.get());
      double mean = 0.0;
      for (const double v : e) mean += v / e.size();
      rows.push_back({{"fraction", f}, {"mse", mean}});
    }
    std::cout << json{{"superres", rows}}.dump() << '\n';
  }
};

struct ReconstructCmd {
  std::string checkpoint, spectrum, out;

  void add(CLI::App& app) {
    auto* r = app.add_subcommand("reconstruct", "Shape from spectrum: D(pi(lambda))");
    r->add_option("--checkpoint", checkpoint, "Model")->required();
    r->add_option("--spectrum", spectrum, "Spectrum JSON")->required();
    r->add_option("--out", out, "Output shape (.off, .obj, .json, .xyz)")->required();
    r->callback([this] { run(); });
  }

  void run() const {
    const ModelBundle bundle = load_bundle(checkpoint);
    const auto rec = shape_from_spectrum(bundle, read_spectrum(spectrum));
    save_shape(rec.shape, out);
    write_run_manifest(run_manifest("reconstruct", {{"checkpoint", checkpoint}, {"spectrum", spectrum}}, json::object(),
                                    {{"shape", out}}),
                       manifest_path(out));
    std::cout << json{{"shape", out}, {"milliseconds", rec.seconds * 1e3}}.dump() << '\n';
  }
};

struct SuperresCmd {
  std::string checkpoint, in, out, order;
  const Common* common = nullptr;

  void add(CLI::App& app, const Common& c) {
    common = &c;
    auto* s = app.add_subcommand("superres", "Spectrum of a low-resolution shape decoded on the template");
    s->add_option("--checkpoint", checkpoint, "Model")->required();
    s->add_option("--in", in, "Low-resolution mesh or contour")->required();
    s->add_option("--order", order, "FEM order (default: the training order)");
    s->add_option("--out", out, "Output shape")->required();
    s->callback([this] { run(); });
  }

  void run() const {
    auto cache = open_cache(common->cache);
    const ModelBundle bundle = load_bundle(checkpoint);
    const FemOrder o = order.empty() ? order_of(bundle) : fem_order_from_string(order);
    const auto sr = super_resolve(bundle, load_shape(in), o, cache.get());
    save_shape(sr.result.shape, out);
    save_spectrum(sr.spectrum, out + ".spectrum.json");
    write_run_manifest(run_manifest("superres", {{"checkpoint", checkpoint}, {"in", in}, {"order", to_string(o)}},
                                    json::object(), {{"shape", out}, {"spectrum", out + ".spectrum.json"}}),
                       manifest_path(out));
  }
};

struct StyleCmd {
  std::string checkpoint, style, pose, out, curve, config;
  std::optional<double> w, lr;
  std::optional<int> steps;

  void add(CLI::App& app) {
    const StyleTransferConfig d;
    auto* s = app.add_subcommand("style-transfer", "Optimize the latent of a pose shape toward a target spectrum");
    s->add_option("--checkpoint", checkpoint, "Model")->required();
    s->add_option("--style", style, "Target spectrum JSON")->required();
    s->add_option("--pose", pose, "Pose shape (template connectivity)")->required();
    s->add_option("--config", config, "Style-transfer config JSON (w, steps, lr)");
    s->add_option("--w", w, "Weight keeping v near E(pose) [default 1e-2, chosen by sweep]");
    s->add_option("--steps", steps, "Adam steps [default " + std::to_string(d.steps) + "]");
    s->add_option("--lr", lr, "Adam learning rate [default 1e-2]");
    s->add_option("--out", out, "Output shape")->required();
    s->add_option("--curve", curve, "Alignment CSV (default: <out>.curve.csv)");
    s->callback([this] { run(); });
  }

  void run() const {
    json cj = StyleTransferConfig{}.to_json();
    if (!config.empty()) {
      std::ifstream in(config);
      if (!in) throw DataError("cannot open " + config);
      cj = StyleTransferConfig::from_json(json::parse(in)).to_json();
    }
    if (w) cj["w"] = *w;
    if (steps) cj["steps"] = *steps;
    if (lr) cj["lr"] = *lr;
    const StyleTransferConfig cfg = StyleTransferConfig::from_json(cj);

    const ModelBundle bundle = load_bundle(checkpoint);
    const auto r = style_transfer(bundle, read_spectrum(style), load_shape(pose), cfg);
    save_shape(r.shape, out);
    const std::string csv = curve.empty() ? out + ".curve.csv" : curve;
    std::ofstream cf(csv);
    write_alignment_csv(r.curve, cf);
    if (!cf) throw DataError("cannot write " + csv);
    write_run_manifest(run_manifest("style-transfer", {{"checkpoint", checkpoint}, {"style", style}, {"pose", pose}, {"config", cj}},
                                    json::object(), {{"shape", out}, {"curve", csv}}),
                       manifest_path(out));
    std::cout << json{{"pose_gap", r.pose_gap}, {"final_alignment", r.curve.back().alignment}}.dump() << '\n';
  }
};

struct InterpolateCmd {
  std::string checkpoint, out_dir, ext = "off";
  std::vector<std::string> spectra;
  int grid = 5;

  void add(CLI::App& app) {
    auto* s = app.add_subcommand("interpolate",
                                 "Two spectra: blend eigenvalues at grid steps. Four spectra: bilinear latent grid");
    s->add_option("--checkpoint", checkpoint, "Model")->required();
    s->add_option("--spectra", spectra, "Two or four spectrum JSON files")->required();
    s->add_option("--grid", grid, "Steps per side")->capture_default_str()->check(CLI::Range(2, 1000));
    s->add_option("--format", ext, "Output extension (off, obj, json, xyz)")->capture_default_str();
    s->add_option("--out-dir", out_dir, "Output directory")->required();
    s->callback([this] { run(); });
  }

  void run() const {
    if (spectra.size() != 2 && spectra.size() != 4) throw ConfigError("--spectra takes two or four files");
    const ModelBundle bundle = load_bundle(checkpoint);
    std::vector<std::vector<double>> s;
    for (const auto& f : spectra) s.push_back(read_spectrum(f));
    std::vector<Shape> shapes;
    if (s.size() == 2) {
      for (int i = 0; i < grid; ++i) shapes.push_back(interpolate_spectra(bundle, s[0], s[1], double(i) / (grid - 1)));
    } else {
      shapes = interpolate_latent(bundle, {s[0], s[1], s[2], s[3]}, grid);
    }
    fs::create_directories(out_dir);
    json files = json::array();
    for (std::size_t i = 0; i < shapes.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "interp_%04zu.%s", i, ext.c_str());
      save_shape(shapes[i], fs::path(out_dir) / name);
      files.push_back(name);
    }
    write_run_manifest(run_manifest("interpolate", {{"checkpoint", checkpoint}, {"spectra", spectra}, {"grid", grid}},
                                    json::object(), {{"files", files}}),
                       fs::path(out_dir) / "run.json");
  }
};

struct BandCmd {
  std::string spectrum, out, checkpoint, shape_out;
  int lo = 1, hi = 12;
  double factor = 1.0;

  void add(CLI::App& app) {
    auto* b = app.add_subcommand("band", "Scale eigenvalues lo..hi and optionally decode the result");
    b->add_option("--spectrum", spectrum, "Base spectrum JSON")->required();
    b->add_option("--lo", lo, "First index")->capture_default_str();
    b->add_option("--hi", hi, "Last index (inclusive)")->capture_default_str();
    b->add_option("--factor", factor, "Multiplier")->capture_default_str();
    b->add_option("--out", out, "Modified spectrum JSON; stdout when omitted");
    b->add_option("--checkpoint", checkpoint, "Model for decoding");
    b->add_option("--shape-out", shape_out, "Decoded shape (needs --checkpoint)");
    b->callback([this] { run(); });
  }

  void run() const {
    if (shape_out.empty() != checkpoint.empty()) throw ConfigError("--shape-out and --checkpoint go together");
    Spectrum s = load_spectrum(spectrum);
    validate(s);
    s.values = band_modify(s.values, lo, hi, factor);
    if (out.empty()) std::cout << to_json(s).dump() << '\n';
    else save_spectrum(s, out);
    if (!checkpoint.empty()) save_shape(shape_from_spectrum(load_bundle(checkpoint), s.values).shape, shape_out);
    if (!out.empty()) {
      write_run_manifest(run_manifest("band", {{"spectrum", spectrum}, {"lo", lo}, {"hi", hi}, {"factor", factor}},
                                      json::object(), {{"spectrum", out}, {"shape", shape_out}}),
                         manifest_path(out));
    }
  }
};

struct EstimateCmd {
  std::string checkpoint, in, out;

  void add(CLI::App& app) {
    auto* e = app.add_subcommand("estimate-spectrum", "Spectrum of a point cloud from a point-cloud model");
    e->add_option("--checkpoint", checkpoint, "Point-cloud model")->required();
    e->add_option("--in", in, "Point cloud (.xyz or vertex-only .obj)")->required();
    e->add_option("--out", out, "Spectrum JSON; stdout when omitted");
    e->callback([this] { run(); });
  }

  void run() const {
    const ModelBundle bundle = load_bundle(checkpoint);
    const Shape shape = load_shape(in);
    const PointCloud cloud{points_of(shape)};
    Spectrum s;
    s.values = estimate_spectrum(bundle, cloud);
    s.disc = order_of(bundle) == FemOrder::cubic ? Discretization::cubic_fem : Discretization::linear_fem;
    if (out.empty()) {
      std::cout << to_json(s).dump() << '\n';
      return;
    }
    save_spectrum(s, out);
    write_run_manifest(run_manifest("estimate-spectrum", {{"checkpoint", checkpoint}, {"in", in}}, json::object(),
                                    {{"spectrum", out}}),
                       manifest_path(out));
  }
};

struct MatchCmd {
  std::string checkpoint, a, b, spec_a, spec_b, labels, labels_out, out;
  bool icp = false;
  const Common* common = nullptr;

  void add(CLI::App& app, const Common& c) {
    common = &c;
    auto* m = app.add_subcommand("match", "Correspondence from A to B through the decoder template");
    m->add_option("--checkpoint", checkpoint, "Model")->required();
    m->add_option("--a", a, "Source shape")->required();
    m->add_option("--b", b, "Target shape")->required();
    m->add_option("--spec-a", spec_a, "Spectrum of A (computed from the mesh when omitted)");
    m->add_option("--spec-b", spec_b, "Spectrum of B (computed from the mesh when omitted)");
    m->add_option("--labels", labels, "Integer label per point of A, one per line");
    m->add_option("--labels-out", labels_out, "Transferred labels for B");
    m->add_flag("--icp", icp, "Use the rigid ICP baseline instead");
    m->add_option("--out", out, "Correspondence JSON")->required();
    m->callback([this] { run(); });
  }

  void run() const {
    if (!labels.empty() && labels_out.empty()) throw ConfigError("--labels needs --labels-out");
    auto cache = open_cache(common->cache);
    const ModelBundle bundle = load_bundle(checkpoint);
    const Points3 pa = points_of(load_shape(a)), pb = points_of(load_shape(b));
    const FemOrder order = order_of(bundle);
    const auto sa = spec_a.empty() ? spectrum_of_file(a, bundle.k, order, cache.get()) : read_spectrum(spec_a);
    const auto sb = spec_b.empty() ? spectrum_of_file(b, bundle.k, order, cache.get()) : read_spectrum(spec_b);
    const Correspondence c = icp ? icp_match(pa, pb) : match_points(bundle, pa, sa, pb, sb);
    write_text(out, json{{"map", c.map}, {"quality", c.quality}}.dump() + "\n");
    if (!labels.empty()) {
      std::ifstream in(labels);
      if (!in) throw DataError("cannot open " + labels);
      std::vector<int> la;
      for (int v; in >> v;) la.push_back(v);
      if (!in.eof()) throw DataError(labels + ": labels must be integers");
      const auto lb = transfer_labels(bundle, pa, la, sa, pb, sb);
      std::ofstream lo(labels_out);
      for (const int v : lb) lo << v << '\n';
      if (!lo) throw DataError("cannot write " + labels_out);
    }
    write_run_manifest(run_manifest("match", {{"checkpoint", checkpoint}, {"a", a}, {"b", b}, {"icp", icp}},
                                    json::object(), {{"correspondence", out}, {"labels", labels_out}}),
                       manifest_path(out));
    std::cout << json{{"quality", c.quality}}.dump() << '\n';
  }
};

struct ServeCmd {
  std::string checkpoint, samples, ui_dir;
  ServerOptions opt;
  bool no_cors = false;
  const Common* common = nullptr;

  void add(CLI::App& app, const Common& c) {
    common = &c;
    auto* s = app.add_subcommand("serve", "HTTP inference service for scripts and the explorer UI");
    s->add_option("--checkpoint", checkpoint, "Model")->required();
    s->add_option("--samples", samples, "gen-data directory or manifest for GET /samples and style-transfer poses");
    s->add_option("--host", opt.host, "Listen address")->capture_default_str();
    s->add_option("--port", opt.port, "Port (0 picks a free one)")->capture_default_str();
    s->add_option("--ui-dir", ui_dir, "Static explorer assets served at /ui");
    s->add_flag("--no-cors", no_cors, "Do not answer cross-origin requests from localhost");
    s->callback([this] { run(); });
  }

  void run() {
    auto cache = open_cache(common->cache);
    auto session = std::make_shared<Session>();
    session->bundle = load_bundle(checkpoint);
    session->id = fs::path(checkpoint).filename().string();
    if (!samples.empty()) session->samples = test_set(session->bundle, samples, cache.get());
    InferenceService service;
    service.load(session);
    opt.ui_dir = ui_dir;
    opt.cors_localhost = !no_cors;
    HttpServer server(service, opt);
    const int port = server.bind();
    std::cerr << json{{"listening", "http://" + opt.host + ":" + std::to_string(port)}}.dump() << std::endl;
    server.serve();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"specshape: shapes from Laplacian spectra"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--cache", common.cache, "Spectrum cache directory shared between runs");

  GenData gen;
  SpectrumCmd spectrum;
  TrainCmd train_cmd;
  EvalCmd eval;
  ReconstructCmd reconstruct;
  SuperresCmd superres;
  StyleCmd style;
  InterpolateCmd interp;
  BandCmd band;
  EstimateCmd estimate;
  MatchCmd match;
  ServeCmd serve;
  gen.add(app);
  spectrum.add(app, common);
  train_cmd.add(app, common);
  eval.add(app, common);
  reconstruct.add(app);
  superres.add(app, common);
  style.add(app);
  interp.add(app);
  band.add(app);
  estimate.add(app);
  match.add(app, common);
  serve.add(app, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    report_error("config", e.what());
    return 1;
  } catch (const Error& e) {
    report_error(to_string(e.kind()), e.what());
    return exit_code(e.kind());
  } catch (const nlohmann::json::exception& e) {
    report_error("config", e.what());
    return 1;
  } catch (const std::exception& e) {
    report_error("internal", e.what());
    return 3;
  }
  return 0;
}
