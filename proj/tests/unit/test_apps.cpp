#include <cmath>
#include <numeric>
#include <sstream>

#include <Eigen/Geometry>

#include "doctest.h"
#include "specshape/apps.hpp"
#include "specshape/error.hpp"
#include "specshape/random.hpp"

using namespace specshape;

namespace {

std::vector<double> row_of(const Eigen::MatrixXd& m, int r) {
  std::vector<double> out(m.cols());
  for (Eigen::Index c = 0; c < m.cols(); ++c) out[c] = m(r, c);
  return out;
}

Points3 vertices_of(const Shape& s) {
  if (const auto* m = std::get_if<Mesh>(&s)) return m->vertices;
  return std::get<PointCloud>(s).points;
}

// Small blob model (subdivision 1, 42 vertices) trained for a few epochs.
struct BlobFixture {
  Dataset data;
  ModelBundle bundle;

  BlobFixture() {
    DatasetOptions opt;
    opt.family = FamilySpec::defaults(FamilyKind::blob3d);
    opt.family.resolution = 1;
    opt.count = 24;
    opt.k = 8;
    opt.order = FemOrder::cubic;
    data = make_dataset(opt);
    TrainConfig cfg;
    cfg.epochs = 10;
    cfg.batch = 8;
    cfg.k = 8;
    cfg.lr = 1e-3;
    bundle = train(build_dense_model(data.n, 8, 3, 2), data, cfg).bundle;
  }
};

const BlobFixture& blobs() {
  static const BlobFixture f;
  return f;
}

}  // namespace

TEST_CASE("shape from spectrum is the composition D(pi(lambda))") {
  const auto& f = blobs();
  const auto s = row_of(f.data.spectra, 3);
  const Reconstruction r = shape_from_spectrum(f.bundle, s);
  CHECK(r.latent == spec_to_latent(f.bundle, s));
  CHECK(vertices_of(r.shape) == vertices_of(decode(f.bundle, r.latent)));
  CHECK(std::get<Mesh>(r.shape).faces == f.data.faces);
  CHECK(r.seconds >= 0.0);
  // Pure function of its inputs.
  CHECK(vertices_of(shape_from_spectrum(f.bundle, s).shape) == vertices_of(r.shape));
  CHECK_THROWS_AS(shape_from_spectrum(f.bundle, std::vector<double>(7, 1.0)), DataError);

  // A rigid motion leaves the spectrum unchanged up to solver tolerance.
  FamilySample moved = f.data.samples[3];
  moved.pose[1] = 0.7;
  moved.pose[5] = 2.0;
  const Spectrum sm = spectrum_of(generate(moved), 8, FemOrder::cubic);
  const Reconstruction rm = shape_from_spectrum(f.bundle, sm.values);
  CHECK((vertices_of(rm.shape) - vertices_of(r.shape)).cwiseAbs().maxCoeff() < 1e-5);
}

TEST_CASE("super-resolution at template resolution equals shape from spectrum") {
  const auto& f = blobs();
  const Shape mesh = generate(f.data.samples[5]);
  const SuperResolution sr = super_resolve(f.bundle, mesh, FemOrder::cubic);
  const Spectrum direct = spectrum_of(mesh, 8, FemOrder::cubic);
  CHECK(sr.spectrum.values == direct.values);
  CHECK(vertices_of(sr.result.shape) == vertices_of(shape_from_spectrum(f.bundle, direct.values).shape));

  const Mesh low = decimate(std::get<Mesh>(mesh), 30);
  const SuperResolution up = super_resolve(f.bundle, low, FemOrder::linear);
  CHECK(vertices_of(up.result.shape).rows() == f.data.n);
  CHECK_THROWS_AS(super_resolve(f.bundle, PointCloud{std::get<Mesh>(mesh).vertices}), ConfigError);
}

TEST_CASE("style transfer") {
  const auto& f = blobs();
  const Shape pose = generate(f.data.samples[0]);

  SUBCASE("a style spectrum already produced by the pose is a fixed point") {
    const auto aligned = latent_to_spec(f.bundle, encode(f.bundle, pose));
    const StyleTransferResult r = style_transfer(f.bundle, aligned, pose, {});
    CHECK(r.latent == r.initial);
    CHECK(r.pose_gap == 0.0);
    CHECK(r.curve.back().objective == 0.0);
  }

  SUBCASE("objective never increases and alignment improves") {
    StyleTransferConfig cfg;
    cfg.w = 0.0;
    cfg.steps = 200;
    const auto target = row_of(f.data.spectra, 7);
    const StyleTransferResult r = style_transfer(f.bundle, target, pose, cfg);
    REQUIRE(r.curve.size() == 201);
    for (std::size_t i = 1; i < r.curve.size(); ++i) CHECK(r.curve[i].objective <= r.curve[i - 1].objective);
    CHECK(r.curve.front().alignment == doctest::Approx(r.pose_gap));
    CHECK(r.curve.back().alignment < r.pose_gap);
    // The reported alignment is the distance of rho(v*) to the target.
    const auto produced = latent_to_spec(f.bundle, r.latent);
    double d2 = 0.0;
    for (int i = 0; i < 8; ++i) d2 += (produced[i] - target[i]) * (produced[i] - target[i]);
    CHECK(std::sqrt(d2) == doctest::Approx(r.curve.back().alignment).epsilon(1e-5));
    CHECK(vertices_of(r.shape) == vertices_of(decode(f.bundle, r.latent)));

    std::ostringstream csv;
    write_alignment_csv(r.curve, csv);
    CHECK(csv.str().rfind("step,objective,alignment\n0,", 0) == 0);
  }

  SUBCASE("a huge anchor weight keeps v at v_init") {
    StyleTransferConfig cfg;
    cfg.w = 1e6;
    cfg.steps = 100;
    const StyleTransferResult r = style_transfer(f.bundle, row_of(f.data.spectra, 7), pose, cfg);
    CHECK((r.latent - r.initial).norm() < 1e-3);
  }

  SUBCASE("configuration") {
    const auto c = StyleTransferConfig::from_json(nlohmann::json::parse(R"({"w": 0.5, "steps": 10})"));
    CHECK(c.w == 0.5);
    CHECK(c.steps == 10);
    CHECK(c.lr == 1e-2);
    CHECK(StyleTransferConfig{}.w == 1e-2);
    CHECK(StyleTransferConfig{}.steps == 500);
    CHECK_THROWS_AS(StyleTransferConfig::from_json(nlohmann::json::parse(R"({"weight": 1})")), ConfigError);
    StyleTransferConfig bad;
    bad.lr = 0.0;
    CHECK_THROWS_AS(style_transfer(f.bundle, row_of(f.data.spectra, 1), pose, bad), ConfigError);
    CHECK_THROWS_AS(style_transfer(f.bundle, std::vector<double>(3, 1.0), pose, {}), DataError);
  }
}

TEST_CASE("latent and spectral interpolation") {
  const auto& f = blobs();
  const std::array<std::vector<double>, 4> corners{row_of(f.data.spectra, 0), row_of(f.data.spectra, 1),
                                                   row_of(f.data.spectra, 2), row_of(f.data.spectra, 3)};
  const auto grid = interpolate_latent(f.bundle, corners, 4);
  REQUIRE(grid.size() == 16);
  CHECK(vertices_of(grid[0]) == vertices_of(shape_from_spectrum(f.bundle, corners[0]).shape));
  CHECK(vertices_of(grid[3]) == vertices_of(shape_from_spectrum(f.bundle, corners[1]).shape));
  CHECK(vertices_of(grid[12]) == vertices_of(shape_from_spectrum(f.bundle, corners[2]).shape));
  CHECK(vertices_of(grid[15]) == vertices_of(shape_from_spectrum(f.bundle, corners[3]).shape));
  CHECK(vertices_of(grid[5]) != vertices_of(grid[0]));

  const std::array<std::vector<double>, 4> same{corners[1], corners[1], corners[1], corners[1]};
  const auto flat = interpolate_latent(f.bundle, same, 3);
  for (const auto& s : flat) CHECK(vertices_of(s) == vertices_of(flat[0]));
  CHECK_THROWS_AS(interpolate_latent(f.bundle, corners, 1), ConfigError);

  CHECK(vertices_of(interpolate_spectra(f.bundle, corners[0], corners[1], 0.0)) ==
        vertices_of(shape_from_spectrum(f.bundle, corners[0]).shape));
  CHECK(vertices_of(interpolate_spectra(f.bundle, corners[0], corners[1], 1.0)) ==
        vertices_of(shape_from_spectrum(f.bundle, corners[1]).shape));
  CHECK_THROWS_AS(interpolate_spectra(f.bundle, corners[0], corners[1], 1.5), ConfigError);
}

TEST_CASE("band modification") {
  std::vector<double> s(30);
  for (int i = 0; i < 30; ++i) s[i] = i * (i + 0.5);
  CHECK(band_modify(s, 1, 12, 1.0) == s);

  const auto low = band_modify(s, 1, 12, 0.7);
  for (int i = 1; i <= 12; ++i) CHECK(low[i] == doctest::Approx(0.7 * s[i]).epsilon(1e-15));
  for (int i = 13; i < 30; ++i) CHECK(low[i] == s[i]);
  const auto back = band_modify(low, 1, 12, 1.0 / 0.7);
  for (int i = 0; i < 30; ++i) CHECK(std::abs(back[i] - s[i]) <= 1e-9 * std::max(1.0, s[i]));

  // Amplifying a middle band past its neighbours is re-sorted.
  const auto high = band_modify(s, 5, 6, 10.0);
  for (int i = 1; i < 30; ++i) CHECK(high[i] >= high[i - 1]);
  CHECK(high[0] == 0.0);
  Spectrum spec;
  spec.values = high;
  CHECK_NOTHROW(validate(spec));

  CHECK_THROWS_AS(band_modify(s, 1, 12, 0.0), ConfigError);
  CHECK_THROWS_AS(band_modify(s, 1, 12, -2.0), ConfigError);
  CHECK_THROWS_AS(band_modify(s, 5, 4, 2.0), ConfigError);
  CHECK_THROWS_AS(band_modify(s, 1, 30, 2.0), ConfigError);
}

TEST_CASE("point-cloud spectrum estimation") {
  DatasetOptions opt;
  opt.family = FamilySpec::defaults(FamilyKind::blob3d);
  opt.family.resolution = 1;
  opt.count = 6;
  opt.k = 5;
  opt.order = FemOrder::linear;
  opt.input = InputKind::pointcloud;
  opt.cloud_fraction = 1.0;
  const Dataset d = make_dataset(opt);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.batch = 3;
  cfg.k = 5;
  const ModelBundle m = train(build_pointcloud_model(5, 42, 4), d, cfg).bundle;

  PointCloud cloud{d.clouds[1]};
  const auto est = estimate_spectrum(m, cloud);
  CHECK(est.size() == 5);
  CHECK(est == latent_to_spec(m, encode(m, cloud)));
  Points3 reversed = cloud.points.colwise().reverse();
  CHECK(estimate_spectrum(m, PointCloud{reversed}) == est);
  CHECK_THROWS_AS(estimate_spectrum(m, PointCloud{}), DataError);
  CHECK_THROWS_AS(estimate_spectrum(blobs().bundle, cloud), ConfigError);
}

TEST_CASE("nearest-neighbour baselines") {
  Eigen::MatrixXd spectra(4, 3);
  spectra << 0, 1, 2,   //
      0, 2, 3,          //
      0, 1, 2,          //
      0, 5, 9;
  const SpectrumIndex index(spectra, 2.0);
  const auto hit = index.nearest({0, 2, 3});
  CHECK(hit.index == 1);
  CHECK(hit.distance == 0.0);
  CHECK(index.nearest({0, 1, 2}).index == 0);  // tie with row 2
  const auto far = index.nearest({0, 5, 8});
  CHECK(far.index == 3);
  CHECK(far.distance == doctest::Approx(0.5));
  CHECK_THROWS_AS(index.nearest({0, 1}), DataError);
  CHECK_THROWS_AS(SpectrumIndex(Eigen::MatrixXd(0, 3), 1.0), DataError);

  Eigen::MatrixXd latents(3, 2);
  latents << 0, 0, 1, 0, 0, 1;
  const LatentIndex li(latents, spectra.topRows(3));
  CHECK(li.spectrum_of_nearest(Eigen::Vector2d(0.9, 0.2)) == std::vector<double>{0, 2, 3});
}

TEST_CASE("ICP recovers rigid motions") {
  const Mesh sphere = generate_blob(std::vector<double>{1.4, 0.9, 0.6, 0.2, 0.1, 0.0, 0.1}, {}, 2);
  const Points3& a = sphere.vertices;

  const RigidFit same = icp_rigid(a, a);
  REQUIRE(!same.residuals.empty());
  CHECK(same.residuals.back() == doctest::Approx(0.0));
  CHECK((same.rotation - Eigen::Matrix3d::Identity()).norm() < 1e-12);

  const Eigen::Matrix3d r = Eigen::AngleAxisd(10.0 * M_PI / 180.0, Eigen::Vector3d(1, 2, 3).normalized()).matrix();
  const Eigen::Vector3d t(0.05, -0.02, 0.03);
  const Points3 b = (a * r.transpose()).rowwise() + t.transpose();
  const RigidFit fit = icp_rigid(a, b);
  const double angle = Eigen::AngleAxisd(fit.rotation * r.transpose()).angle();
  CHECK(angle < 1e-6);
  CHECK((fit.translation - t).norm() < 1e-6);
  CHECK(fit.residuals.back() < 1e-9);
  for (std::size_t i = 1; i < fit.residuals.size(); ++i) CHECK(fit.residuals[i] <= fit.residuals[i - 1] + 1e-15);

  // A bent partner: residuals still nonincreasing.
  const Mesh bent = generate_blob(std::vector<double>{1.4, 0.9, 0.6, 0.2, 0.1, 0.0, 0.1},
                                  std::vector<double>{0.8, 0.3}, 2);
  const RigidFit loose = icp_rigid(a, bent.vertices);
  for (std::size_t i = 1; i < loose.residuals.size(); ++i) CHECK(loose.residuals[i] <= loose.residuals[i - 1] + 1e-15);

  Points3 line(5, 3);
  for (int i = 0; i < 5; ++i) line.row(i) << i, 2.0 * i, 0.0;
  CHECK_THROWS_AS(icp_rigid(line, line), NumericalError);
  CHECK_THROWS_AS(icp_rigid(a.topRows(2), a), DataError);

  const Correspondence c = icp_match(a, b);
  std::vector<int> truth(a.rows());
  std::iota(truth.begin(), truth.end(), 0);
  CHECK(match_accuracy(c, b, truth, 1e-9) == 1.0);
}

TEST_CASE("template matching and label transfer") {
  const auto& f = blobs();
  const auto sa = row_of(f.data.spectra, 2);
  const auto sb = row_of(f.data.spectra, 9);
  const Correspondence self = match_shapes(f.bundle, sa, sa);
  for (std::size_t i = 0; i < self.map.size(); ++i) CHECK(self.map[i] == static_cast<int>(i));
  CHECK(self.quality == 0.0);
  CHECK(match_shapes(f.bundle, sa, sb).quality > 0.0);

  // Points sitting exactly on the decoded template map through it.
  const Points3 ta = vertices_of(shape_from_spectrum(f.bundle, sa).shape);
  const Points3 tb = vertices_of(shape_from_spectrum(f.bundle, sb).shape);
  const Correspondence c = match_points(f.bundle, ta, sa, tb, sb);
  std::vector<int> truth(ta.rows());
  std::iota(truth.begin(), truth.end(), 0);
  CHECK(match_accuracy(c, tb, truth, 0.0) == 1.0);

  std::vector<int> labels(ta.rows());
  for (Eigen::Index i = 0; i < ta.rows(); ++i) labels[i] = static_cast<int>(i % 4);
  CHECK(transfer_labels(f.bundle, ta, labels, sa, tb, sb) == labels);
  CHECK_THROWS_AS(transfer_labels(f.bundle, ta, std::vector<int>(3, 0), sa, tb, sb), DataError);
  CHECK_THROWS_AS(match_points(f.bundle, Points3(0, 3), sa, tb, sb), DataError);
}
