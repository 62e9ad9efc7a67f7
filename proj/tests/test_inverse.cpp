#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <fstream>
#include <limits>

#include "skytomo/inverse.hpp"
#include "skytomo/oracle.hpp"
#include "skytomo/sensor.hpp"
#include "skytomo/presets.hpp"
#include "skytomo/rng.hpp"
#include "test_util.hpp"

using namespace skytomo;

namespace {

std::vector<double> random_field(std::size_t n, double scale, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = scale * (0.2 + rng.uniform());
  return v;
}

Scene small_scene(std::uint64_t seed) {
  VoxelGrid grid(4, 4, 4, Vec3::Zero(), Vec3(500, 500, 250));
  Rng rng(seed, 0);
  Medium m = Medium::empty(grid.size());
  m.aerosol = type6_aerosol();
  m.beta_air = make_air(grid, AirProfile{});
  m.beta_aerosol_green = random_field(grid.size(), 2e-4, rng);
  std::vector<Camera> cams = {Camera(Vec3(800, 900, -100), 8, 8), Camera(Vec3(1300, 600, -50), 8, 8)};
  return Scene{grid, m, cams, Sun{}};
}

FrozenFields random_fields(std::size_t n_cam, std::size_t n, Rng& rng) {
  FrozenFields j;
  for (auto& ch : j) {
    for (std::size_t c = 0; c < n_cam; ++c) ch.push_back(random_field(n, 0.05, rng));
  }
  return j;
}

/// Problem whose measurements are random images comparable to the rendered ones.
struct Toy {
  InverseProblem problem;
  FrozenFields j;
  std::vector<double> beta;
};

Toy make_toy(std::uint64_t seed, ProblemOptions opts = {}) {
  Scene s = small_scene(seed);
  Rng rng(seed, 1);
  const std::size_t n = s.grid.size();
  ImageSet blank(s.cameras.size());
  std::vector<PixelMask> masks;
  for (std::size_t c = 0; c < s.cameras.size(); ++c) {
    for (Image& img : blank[c]) img = Image(s.cameras[c].width(), s.cameras[c].height());
    masks.emplace_back(s.cameras[c].num_pixels(), 1);
  }
  opts.threads = 1;
  Toy t{make_inverse_problem(s, blank, masks, opts), random_fields(s.cameras.size(), n, rng),
        s.medium.beta_aerosol_green};
  const ImageSet rendered = render_frozen(t.problem, t.beta, t.j);
  for (std::size_t c = 0; c < rendered.size(); ++c) {
    for (int ch = 0; ch < kNumChannels; ++ch) {
      t.problem.measured[c][ch] = rendered[c][ch];
      for (double& v : t.problem.measured[c][ch].pixels) v *= 0.5 + rng.uniform();
    }
  }
  return t;
}

}  // namespace

TEST_CASE("channel extinction scales the aerosol by relative cross-section") {
  Medium m = Medium::empty(2);
  m.aerosol = AerosolOptics{{0.5, 1.0, 2.0}, 0.9, {0.7, 0.7, 0.7}};
  m.beta_air = {std::vector<double>{1.0, 2.0}, std::vector<double>{3.0, 4.0},
                std::vector<double>{5.0, 6.0}};
  const std::vector<double> a = {10.0, 20.0};
  const auto b = channel_extinction(a, m);
  CHECK(b[0][0] == doctest::Approx(6.0));
  CHECK(b[1][1] == doctest::Approx(24.0));
  CHECK(b[2][1] == doctest::Approx(46.0));
}

TEST_CASE("smoothness prior") {
  VoxelGrid grid(4, 3, 5, Vec3::Zero(), Vec3(1, 1, 1));
  const std::vector<double> flat(grid.size(), 3.7);
  for (double v : laplacian_apply(grid, flat)) CHECK(v == doctest::Approx(0.0));
  const auto w = altitude_weights(grid, 3000.0);
  CHECK(w[0] == doctest::Approx(std::exp(0.5 / 3000.0)));
  CHECK(regularizer(grid, w, flat) == doctest::Approx(0.0));

  Rng rng(8, 0);
  const std::vector<double> x = random_field(grid.size(), 1.0, rng);
  const std::vector<double> wr = random_field(grid.size(), 1.0, rng);
  const auto g = regularizer_gradient(grid, wr, x);
  for (std::size_t k = 0; k < grid.size(); k += 5) {
    const double h = 1e-5;
    std::vector<double> xp = x;
    std::vector<double> xm = x;
    xp[k] += h;
    xm[k] -= h;
    const double fd = (regularizer(grid, wr, xp) - regularizer(grid, wr, xm)) / (2 * h);
    CHECK(g[k] == doctest::Approx(fd).epsilon(1e-8));
  }
  CHECK_THROWS_AS(altitude_weights(grid, 0.0), ValidationError);
}

TEST_CASE("cost is zero at the generating field and grows with a pixel offset") {
  Toy t = make_toy(3);
  t.problem.measured = render_frozen(t.problem, t.beta, t.j);
  CHECK(cost(t.problem, t.beta, t.j) == doctest::Approx(0.0));
  const std::size_t p = 4 * 8 + 4;
  t.problem.measured[1][2][p] += 0.25;
  CHECK(cost(t.problem, t.beta, t.j) == doctest::Approx(0.0625));
  // Masked pixels do not count.
  t.problem.masks[1][p] = 0;
  CHECK(cost(t.problem, t.beta, t.j) == doctest::Approx(0.0));
  // Prior term.
  t.problem.eta = 2.0;
  const double expected = 2.0 * regularizer(t.problem.scene.grid, t.problem.weights, t.beta);
  CHECK(cost(t.problem, t.beta, t.j) == doctest::Approx(expected));
}

TEST_CASE("one-voxel Jacobian") {
  VoxelGrid grid(1, 1, 1, Vec3::Zero(), Vec3(625, 625, 83));
  Scene s{grid, Medium::empty(1), {Camera(Vec3(0, 312.5, 41.5), 1, 1)}, Sun{}};
  ProjectionMatrix p = build_projection(s, 0, SubpixelPattern({{1.0, 0.5}}));
  const SparseMatrix w = build_los_geometry(grid, s.cameras[0].position());
  const double l = w.coeff(0, 0);
  CHECK(l == doctest::Approx(312.5));
  const std::vector<double> beta = {2e-3};
  const std::vector<double> j = {0.3};
  const std::vector<double> t = los_transmittance(w, beta);
  const std::vector<double> one = {1.0};
  const double pi = p.matrix.coeff(0, 0);
  const double expected = pi * 0.3 * std::exp(-2e-3 * l) * (1.0 - 2e-3 * l);
  CHECK(surrogate_jacobian_forward(one, p, w, j, beta, t)[0] == doctest::Approx(expected));
  CHECK(surrogate_jacobian_apply(one, p, w, j, beta, t)[0] == doctest::Approx(expected));
  const std::vector<double> zero = {0.0};
  CHECK(surrogate_jacobian_apply(one, p, w, zero, beta, t)[0] == 0.0);
}

TEST_CASE("Jacobian apply is the adjoint of the forward product") {
  Toy t = make_toy(5);
  Rng rng(5, 9);
  const auto beta = channel_extinction(t.beta, t.problem.scene.medium);
  const CameraGeometry& geo = t.problem.cameras[0];
  const auto tr = los_transmittance(geo.los, beta[1]);
  const auto v = random_field(t.beta.size(), 1.0, rng);
  const auto r = random_field(static_cast<std::size_t>(geo.projection.matrix.rows()), 1.0, rng);
  const auto jv = surrogate_jacobian_forward(v, geo.projection, geo.los, t.j[1][0], beta[1], tr);
  const auto jtr = surrogate_jacobian_apply(r, geo.projection, geo.los, t.j[1][0], beta[1], tr);
  double a = 0.0;
  double b = 0.0;
  for (std::size_t i = 0; i < r.size(); ++i) a += r[i] * jv[i];
  for (std::size_t k = 0; k < v.size(); ++k) b += v[k] * jtr[k];
  CHECK(a == doctest::Approx(b).epsilon(1e-12));
}

TEST_CASE("gradient matches finite differences") {
  for (std::uint64_t seed = 11; seed < 14; ++seed) {
    Toy t = make_toy(seed);
    t.problem.eta = seed == 12 ? 1e-3 : 0.0;
    const Evaluation e = evaluate(t.problem, t.beta, t.j);
    Rng rng(seed, 2);
    for (int trial = 0; trial < 6; ++trial) {
      const std::size_t k = static_cast<std::size_t>(rng.uniform() * t.beta.size());
      const double h = 1e-4 * t.beta[k];
      std::vector<double> bp = t.beta;
      std::vector<double> bm = t.beta;
      bp[k] += h;
      bm[k] -= h;
      const double fd = (cost(t.problem, bp, t.j) - cost(t.problem, bm, t.j)) / (2 * h);
      CHECK(e.gradient[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("masked pixels drop out of the gradient") {
  Toy t = make_toy(21);
  const auto g0 = evaluate(t.problem, t.beta, t.j).gradient;
  for (auto& m : t.problem.masks) m[9] = 0;
  const auto g1 = evaluate(t.problem, t.beta, t.j).gradient;
  for (auto& cam : t.problem.measured) {
    for (Image& img : cam) img[9] += 1e3;
  }
  const auto g2 = evaluate(t.problem, t.beta, t.j).gradient;
  CHECK_FALSE(g0 == g1);
  for (std::size_t k = 0; k < g1.size(); ++k) CHECK(g2[k] == doctest::Approx(g1[k]));
}

TEST_CASE("conditioning rescales each voxel by its ray count") {
  Toy t = make_toy(4);
  t.problem.cameras.resize(1);
  t.problem.measured.resize(1);
  t.problem.masks.resize(1);
  t.problem.scene.cameras.erase(t.problem.scene.cameras.begin() + 1, t.problem.scene.cameras.end());
  for (auto& ch : t.j) ch.resize(1);
  const auto plain = evaluate(t.problem, t.beta, t.j).gradient;
  const auto cond = evaluate(t.problem, t.beta, t.j, {.conditioned = true}).gradient;
  const auto& counts = t.problem.cameras[0].projection.ray_counts;
  int unseen = 0;
  for (std::size_t k = 0; k < plain.size(); ++k) {
    if (counts[k] == 0) {
      CHECK(cond[k] == 0.0);
      ++unseen;
    } else {
      CHECK(cond[k] == doctest::Approx(plain[k] / counts[k]));
    }
  }
  CHECK(unseen < static_cast<int>(plain.size()));
}

TEST_CASE("projection") {
  Toy t = make_toy(6, {.blocks = {2, 2, 2}});
  std::vector<double> x(t.beta.size());
  Rng rng(6, 3);
  for (double& v : x) v = rng.uniform() - 0.3;
  t.problem.support[0] = 0;
  const auto p1 = project(t.problem, x);
  const auto p2 = project(t.problem, p1);
  for (std::size_t k = 0; k < p1.size(); ++k) {
    CHECK(p1[k] >= 0.0);
    CHECK(p2[k] == doctest::Approx(p1[k]));
  }
  CHECK(p1[0] == 0.0);
  const VoxelGrid& g = t.problem.scene.grid;
  CHECK(p1[g.linear_index(2, 2, 2)] == doctest::Approx(p1[g.linear_index(3, 3, 3)]));
  CHECK(p1[g.linear_index(1, 0, 0)] == doctest::Approx(p1[g.linear_index(1, 1, 1)]));
  const std::vector<double> neg(x.size(), -1.0);
  for (double v : project(t.problem, neg)) CHECK(v == 0.0);
}

TEST_CASE("automatic step matches the largest Gauss-Newton eigenvalue") {
  Toy t = make_toy(7, {.conditioning = false});
  const std::size_t n = t.beta.size();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  const auto beta = channel_extinction(t.beta, t.problem.scene.medium);
  for (std::size_t c = 0; c < t.problem.cameras.size(); ++c) {
    const CameraGeometry& geo = t.problem.cameras[c];
    for (int ch = 0; ch < kNumChannels; ++ch) {
      const auto tr = los_transmittance(geo.los, beta[ch]);
      const double s = t.problem.scene.medium.aerosol.relative_sigma(ch);
      Eigen::MatrixXd jac(geo.projection.matrix.rows(), static_cast<Eigen::Index>(n));
      for (std::size_t k = 0; k < n; ++k) {
        std::vector<double> e(n, 0.0);
        e[k] = 1.0;
        const auto col = surrogate_jacobian_forward(e, geo.projection, geo.los, t.j[ch][c], beta[ch], tr);
        for (std::size_t p = 0; p < col.size(); ++p) jac(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(k)) = s * col[p];
      }
      h += 2.0 * jac.transpose() * jac;
    }
  }
  const double lambda = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(h).eigenvalues().maxCoeff();
  CHECK(1.0 / estimate_step_size(t.problem, t.beta, t.j, 300) == doctest::Approx(lambda).epsilon(1e-3));
}

TEST_CASE("error metrics") {
  const std::vector<double> truth = {1.0, 2.0, 0.0};
  const std::vector<double> est = {2.0, 2.0, 0.0};
  const ErrorMetrics m = error_metrics(est, truth);
  CHECK(m.delta_mass == doctest::Approx(1.0 / 3.0));
  CHECK(m.epsilon == doctest::Approx(1.0 / 3.0));
  const ErrorMetrics z = error_metrics(truth, truth);
  CHECK(z.delta_mass == 0.0);
  CHECK(z.epsilon == 0.0);
  CHECK_THROWS_AS(error_metrics(truth, std::vector<double>(3, 0.0)), ValidationError);
}

namespace {

/// Problem whose measurements come from the single-scatter model at the stored truth.
Toy single_scatter_toy() {
  Toy t = make_toy(31);
  t.j = refresh_fields(t.problem, t.beta, ForwardModel::SingleScatter, 1, 0);
  t.problem.measured = render_frozen(t.problem, t.beta, t.j);
  return t;
}

SolveOptions single_scatter_options(int blocks) {
  SolveOptions o;
  o.forward = ForwardModel::SingleScatter;
  o.max_q = blocks;
  o.plateau_window = 0;
  return o;
}

}  // namespace

TEST_CASE("frozen single-scatter rendering matches the closed-form image") {
  // Isotropic aerosol keeps voxel-center phase sampling exact near the cameras.
  Scene s = small_scene(5);
  s.medium.aerosol = isotropic_aerosol();
  for (double& v : s.medium.beta_aerosol_green) v *= 0.1;
  ImageSet blank(s.cameras.size());
  std::vector<PixelMask> masks;
  for (std::size_t c = 0; c < s.cameras.size(); ++c) {
    for (Image& img : blank[c]) img = Image(8, 8);
    masks.push_back(build_sun_mask(s.cameras[c], s.sun, 15.0));
  }
  const InverseProblem p = make_inverse_problem(s, blank, masks, {.threads = 1});
  const auto& beta = s.medium.beta_aerosol_green;
  const FrozenFields j = refresh_fields(p, beta, ForwardModel::SingleScatter, 1, 0);
  const ImageSet frozen = render_frozen(p, beta, j);
  for (std::size_t c = 0; c < s.cameras.size(); ++c) {
    for (int ch = 0; ch < kNumChannels; ++ch) {
      const Image oracle = render_single_scatter(s, ch, c, {8});
      CHECK(fit_scale(oracle, frozen[c][ch], masks[c]) == doctest::Approx(1.0).epsilon(0.03));
    }
  }
}

TEST_CASE("the generating field is a fixed point") {
  const Toy t = single_scatter_toy();
  const SolveResult r = solve(t.problem, t.beta, single_scatter_options(2), t.beta);
  for (const TraceRow& row : r.trace) CHECK(row.cost == doctest::Approx(0.0).epsilon(1e-20));
  for (std::size_t k = 0; k < t.beta.size(); ++k) CHECK(r.beta[k] == doctest::Approx(t.beta[k]));
}

TEST_CASE("descent from zero reduces cost and error") {
  const Toy t = single_scatter_toy();
  const std::vector<double> zero(t.beta.size(), 0.0);
  const SolveResult r = solve(t.problem, zero, single_scatter_options(15), t.beta);
  REQUIRE(r.trace.size() == 15u * 6u);
  CHECK(r.trace.back().cost < 0.5 * r.trace.front().cost);
  CHECK(r.trace.front().metrics->epsilon == 1.0);
  CHECK(r.trace.back().metrics->epsilon < 1.0);
  CHECK(r.nonincreasing_fraction() == 1.0);
  CHECK(r.step_halvings == 0);
}

TEST_CASE("non-finite cost raises a divergence error") {
  Toy t = single_scatter_toy();
  t.problem.measured[0][0][3] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(solve(t.problem, t.beta, single_scatter_options(1)), DivergenceError);
}

TEST_CASE("oversized steps trigger step halving") {
  // Prior-only problem: the checkerboard mode grows geometrically once the step exceeds 2 / lambda_max.
  Toy t = single_scatter_toy();
  for (auto& m : t.problem.masks) std::fill(m.begin(), m.end(), 0);
  t.problem.eta = 1.0;
  SolveOptions o = single_scatter_options(12);
  o.step = 4.0 * estimate_step_size(t.problem, t.beta, t.j, 300);
  const SolveResult r = solve(t.problem, t.beta, o);
  CHECK(r.step_halvings >= 1);
  CHECK(r.trace.back().step_size < o.step);
  CHECK(std::isfinite(r.trace.back().cost));

  o.step *= 0.25;
  CHECK(solve(t.problem, t.beta, o).step_halvings == 0);
}

TEST_CASE("solver validates options") {
  const Toy t = single_scatter_toy();
  SolveOptions o = single_scatter_options(1);
  o.n_gd = 0;
  CHECK_THROWS_AS(solve(t.problem, t.beta, o), ValidationError);
  CHECK_THROWS_AS(solve(t.problem, std::vector<double>(3, 0.0), single_scatter_options(1)),
                  ValidationError);
}

TEST_CASE("trace CSV") {
  skytomo::testing::TempDir dir("trace");
  const Toy t = single_scatter_toy();
  const SolveResult r = solve(t.problem, t.beta, single_scatter_options(1), t.beta);
  r.write_trace_csv(dir.path() / "trace.csv");
  std::ifstream in(dir.path() / "trace.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "block,step,cost,step_size,delta_mass,epsilon");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 6);
}
