// Acceptance suite: one PASS/FAIL line per criterion.
//
//   skytomo_acceptance <id>...    run the listed criteria (1..10, 8b)
//   skytomo_acceptance all        run every criterion

#include <Eigen/Core>
#include <unsupported/Eigen/SpecialFunctions>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <thread>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "skytomo/inverse.hpp"
#include "skytomo/optics.hpp"
#include "skytomo/oracle.hpp"
#include "skytomo/parallel.hpp"
#include "skytomo/presets.hpp"
#include "skytomo/rng.hpp"
#include "skytomo/sensor.hpp"
#include "skytomo/transport.hpp"
#include "skytomo/vfmc.hpp"

using namespace skytomo;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

TransportOptions transport_options(int threads = 0) {
  TransportOptions o;
  o.threads = threads;
  return o;
}

double chi_square_p(double chi2, int dof) {
  Eigen::ArrayXd a(1);
  Eigen::ArrayXd x(1);
  a << 0.5 * dof;
  x << 0.5 * chi2;
  return Eigen::igammac(a, x)(0);
}

double hg_cdf(double mu, double g) {
  if (g == 0.0) return 0.5 * (mu + 1.0);
  const double a = 1.0 + g * g - 2.0 * g * mu;
  return (1.0 - g * g) / (2.0 * g) * (1.0 / std::sqrt(a) - 1.0 / (1.0 + g));
}

double rayleigh_cdf(double mu) { return (mu * mu * mu + 3.0 * mu + 4.0) / 8.0; }

/// Pearson correlation and scale-fitted relative RMS of a against reference b.
/// Largest optical depth along any pixel-center ray and any voxel-to-sun path.
double max_optical_depth(const Scene& s) {
  double worst = 0.0;
  for (int ch = 0; ch < kNumChannels; ++ch) {
    const std::vector<double> beta = s.medium.total_field(ch);
    for (const Camera& cam : s.cameras) {
      for (int p = 0; p < cam.num_pixels(); ++p) {
        if (!cam.valid(p)) continue;
        worst = std::max(worst, optical_depth_along(s.grid, beta, cam.position(), cam.direction(p), 1e12));
      }
    }
    const Vec3 to_sun = -s.sun.direction();
    for (std::size_t k = 0; k < s.grid.size(); ++k) {
      worst = std::max(worst, optical_depth_along(s.grid, beta, s.grid.center(k), to_sun, 1e12));
    }
  }
  return worst;
}

// ---------------------------------------------------------------------------
// 1. Sampler correctness

Outcome sampler_chi_square() {
  const int n = 1000000;
  const int bins = 64;
  const Vec3 psi = Vec3(0.3, -0.5, 0.8).normalized();
  struct Family {
    std::string name;
    std::function<ScatterSample(double, double)> sample;
    std::function<double(double)> cdf;
  };
  std::vector<Family> families;
  for (double g : {0.0, 0.5, 0.775}) {
    families.push_back({fmt::format("hg(g={})", g),
                        [=](double u1, double u2) { return sample_hg_direction(psi, g, u1, u2); },
                        [=](double mu) { return hg_cdf(mu, g); }});
  }
  families.push_back({"rayleigh",
                      [=](double u1, double u2) { return sample_rayleigh_direction(psi, u1, u2); },
                      rayleigh_cdf});

  bool pass = true;
  std::string detail;
  std::uint64_t stream = 0;
  for (const Family& f : families) {
    Rng rng(0xacce55, stream++);
    std::vector<double> mu_counts(bins, 0.0);
    std::vector<double> phi_counts(bins, 0.0);
    const auto [t1, t2] = orthonormal_frame(psi);
    for (int i = 0; i < n; ++i) {
      const double u1 = rng.uniform();
      const double u2 = rng.uniform();
      const Vec3 d = f.sample(u1, u2).direction;
      const double mu = std::clamp(d.dot(psi), -1.0, 1.0);
      double phi = std::atan2(d.dot(t2), d.dot(t1));
      if (phi < 0.0) phi += 2.0 * kPi;
      mu_counts[std::min(bins - 1, static_cast<int>((mu + 1.0) * 0.5 * bins))] += 1.0;
      phi_counts[std::min(bins - 1, static_cast<int>(phi / (2.0 * kPi) * bins))] += 1.0;
    }
    double chi_mu = 0.0;
    double chi_phi = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double lo = -1.0 + 2.0 * b / bins;
      const double hi = -1.0 + 2.0 * (b + 1) / bins;
      const double e_mu = n * (f.cdf(hi) - f.cdf(lo));
      const double e_phi = static_cast<double>(n) / bins;
      chi_mu += (mu_counts[b] - e_mu) * (mu_counts[b] - e_mu) / e_mu;
      chi_phi += (phi_counts[b] - e_phi) * (phi_counts[b] - e_phi) / e_phi;
    }
    const double p_mu = chi_square_p(chi_mu, bins - 1);
    const double p_phi = chi_square_p(chi_phi, bins - 1);
    pass = pass && p_mu > 0.01 && p_phi > 0.01;
    detail += fmt::format("{} p_mu={:.3f} p_phi={:.3f}; ", f.name, p_mu, p_phi);
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 2. Phase normalization

Outcome phase_normalization() {
  auto integrate = [](const std::function<double(double)>& phase) {
    const int n = 200000;
    const double h = 2.0 / n;
    double s = phase(-1.0) + phase(1.0);
    for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * phase(-1.0 + i * h);
    return 2.0 * kPi * s * h / 3.0;
  };
  bool pass = true;
  std::string detail;
  for (double g : {-0.5, 0.0, 0.5, 0.775, 0.786}) {
    const double err = std::abs(integrate([g](double mu) { return phase_hg(mu, g); }) - 1.0);
    pass = pass && err < 1e-6;
    detail += fmt::format("hg(g={}) err={:.1e}; ", g, err);
  }
  const double err = std::abs(integrate(phase_rayleigh) - 1.0);
  pass = pass && err < 1e-6;
  detail += fmt::format("rayleigh err={:.1e}", err);
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 3. Single-scatter oracle

Scene oracle_scene() {
  const int n = 16;
  const double side = 2000.0;
  VoxelGrid grid(n, n, n, Vec3::Zero(), Vec3(side / n, side / n, side / 2 / n));
  BlobParams b;
  b.blobs = {{Vec3(side / 2, side / 2, side / 4), Vec3(side / 5, side / 5, side * 0.4 / 3), 1.0}};
  b.scale_height = 1e9;
  Medium m = make_haze_blobs(grid, 7.5e5, type6_aerosol(), b);
  AirProfile air;
  for (double& v : air.sea_level) v *= 0.375;
  m.beta_air = make_air(grid, air);
  // Far enough below the grid that a voxel subtends less than a pixel.
  return Scene{grid, m, {Camera(Vec3(side / 2, side / 2, -1000), 16, 16)}, Sun{}};
}

Outcome single_scatter_oracle() {
  const Scene s = oracle_scene();
  const double tau = max_optical_depth(s);
  const PixelMask mask = build_sun_mask(s.cameras[0], s.sun, 15.0);
  const std::uint64_t photons = 4000000;
  const int batches = 50;
  const std::uint64_t per_pixel = 20000;
  const std::vector<ProjectionMatrix> proj = {build_projection(s, 0, 64)};

  std::array<int, 3> agree = {0, 0, 0};
  std::array<int, 3> agree_lit = {0, 0, 0};
  int total = 0;
  int lit = 0;
  for (int ch = 0; ch < kNumChannels; ++ch) {
    const Image oracle = render_single_scatter(s, ch, 0, {8});
    std::vector<Image> fmc;
    std::vector<Image> vfmc;
    for (int b = 0; b < batches; ++b) {
      const std::uint64_t seed = derive_seed(derive_seed(3, static_cast<std::uint64_t>(ch)), static_cast<std::uint64_t>(b));
      fmc.push_back(trace_fmc(s, ch, photons / batches, {}, seed, transport_options()).images[0]);
      vfmc.push_back(render_vfmc(s, ch, photons / batches, seed, proj, transport_options()).images[0]);
    }
    const BmcImage bmc = render_bmc(s, ch, 0, per_pixel, derive_seed(4, static_cast<std::uint64_t>(ch)), transport_options());
    auto within = [&](const std::vector<Image>& runs, std::size_t p) {
      double mean = 0.0;
      for (const Image& r : runs) mean += r[p];
      mean /= batches;
      double var = 0.0;
      for (const Image& r : runs) var += (r[p] - mean) * (r[p] - mean);
      const double se = std::sqrt(var / (batches - 1) / batches);
      return std::abs(mean - oracle[p]) <= 3.0 * se;
    };
    for (std::size_t p = 0; p < mask.size(); ++p) {
      if (!mask[p]) continue;
      const std::array<bool, 3> ok = {within(fmc, p), within(vfmc, p),
                                      std::abs(bmc.mean[p] - oracle[p]) <= 3.0 * bmc.std_error[p]};
      ++total;
      lit += oracle[p] > 0.0;
      for (int r = 0; r < 3; ++r) {
        agree[r] += ok[r];
        if (oracle[p] > 0.0) agree_lit[r] += ok[r];
      }
    }
  }
  const double f_fmc = static_cast<double>(agree[0]) / total;
  const double f_vfmc = static_cast<double>(agree[1]) / total;
  const double f_bmc = static_cast<double>(agree[2]) / total;
  const bool pass = tau < 0.05 && f_fmc >= 0.99 && f_vfmc >= 0.99 && f_bmc >= 0.99;
  auto f_lit = [&](int r) { return static_cast<double>(agree_lit[r]) / lit; };
  return {pass, fmt::format("max tau={:.4f}; within 3 sigma: fmc={:.4f} vfmc={:.4f} bmc={:.4f} of {} pixels "
                            "(on the {} pixels that see the medium: {:.4f} {:.4f} {:.4f})",
                            tau, f_fmc, f_vfmc, f_bmc, total, lit, f_lit(0), f_lit(1), f_lit(2))};
}

// ---------------------------------------------------------------------------
// 4. In-situ stability

Outcome in_situ_stability() {
  Scene s = make_preset("atm1", {.nx = 16, .ny = 16, .nz = 16, .pixels = 16});
  const BlobParams blobs = default_blobs(s.grid);
  s.cameras = {Camera(blobs.blobs[0].center, 16, 16)};
  const PixelMask mask = build_sun_mask(s.cameras[0], s.sun, 15.0);
  const std::vector<ProjectionMatrix> proj = {build_projection(s, 0, 10)};
  const std::uint64_t photons = 200000;
  const int runs = 20;
  const int ch = 1;
  std::vector<Image> fmc;
  std::vector<Image> vfmc;
  for (int r = 0; r < runs; ++r) {
    const std::uint64_t seed = derive_seed(40, static_cast<std::uint64_t>(r));
    fmc.push_back(trace_fmc(s, ch, photons, {}, seed, transport_options()).images[0]);
    vfmc.push_back(render_vfmc(s, ch, photons, seed, proj, transport_options()).images[0]);
  }
  auto variance = [&](const std::vector<Image>& imgs, std::size_t p) {
    double mean = 0.0;
    for (const Image& i : imgs) mean += i[p];
    mean /= runs;
    double v = 0.0;
    for (const Image& i : imgs) v += (i[p] - mean) * (i[p] - mean);
    return v / (runs - 1);
  };
  int good = 0;
  int total = 0;
  std::vector<double> ratios;
  for (std::size_t p = 0; p < mask.size(); ++p) {
    if (!mask[p]) continue;
    ++total;
    const double vf = variance(fmc, p);
    const double vv = variance(vfmc, p);
    good += vf >= 10.0 * vv;
    ratios.push_back(vv > 0.0 ? vf / vv : std::numeric_limits<double>::infinity());
  }
  std::nth_element(ratios.begin(), ratios.begin() + ratios.size() / 2, ratios.end());
  const double frac = static_cast<double>(good) / total;
  return {frac >= 0.8, fmt::format("var(fmc) >= 10 var(vfmc) on {:.3f} of {} pixels; median ratio {:.1f}",
                                   frac, total, ratios[ratios.size() / 2])};
}

// ---------------------------------------------------------------------------
// 5. Cross-renderer consistency

Outcome cross_renderer() {
  std::string detail;
  bool pass = true;
  std::vector<double> scales;
  for (const char* name : {"atm1", "atm2"}) {
    Scene s = make_preset(name, {.nx = 24, .ny = 24, .nz = 24, .pixels = 24});
    // Eight of the 36 cameras, spread over the layout.
    std::vector<Camera> cams;
    for (std::size_t c : {0, 4, 9, 14, 21, 26, 31, 35}) cams.push_back(s.cameras[c]);
    s.cameras = cams;
    const std::vector<PixelMask> masks = build_sun_masks(s, 15.0);
    std::vector<ProjectionMatrix> proj;
    for (std::size_t c = 0; c < s.cameras.size(); ++c) proj.push_back(build_projection(s, c, 10));
    std::vector<Image> a;
    std::vector<Image> b;
    std::vector<PixelMask> m;
    for (int ch = 0; ch < kNumChannels; ++ch) {
      const VfmcResult v = render_vfmc(s, ch, 10000000, derive_seed(50, static_cast<std::uint64_t>(ch)), proj, transport_options());
      for (std::size_t c = 0; c < s.cameras.size(); ++c) {
        a.push_back(v.images[c]);
        b.push_back(render_bmc(s, ch, c, 4000, derive_seed(51, c * 3 + static_cast<std::uint64_t>(ch)), transport_options()).mean);
        m.push_back(masks[c]);
      }
    }
    const ImageAgreement g = compare_images(b, a, m);
    scales.push_back(g.scale);
    pass = pass && g.correlation > 0.95 && g.relative_rms < 0.10;
    detail += fmt::format("{}: s={:.4f} r={:.4f} rel_rms={:.4f}; ", name, g.scale, g.correlation, g.relative_rms);
  }
  const double spread = std::abs(scales[0] - scales[1]) / scales[0];
  pass = pass && spread < 0.05;
  detail += fmt::format("scale difference {:.4f}", spread);
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 6. Gradient check

Outcome gradient_check() {
  double worst = 0.0;
  const int trials = 20;
  for (int trial = 0; trial < trials; ++trial) {
    Rng rng(60, static_cast<std::uint64_t>(trial));
    const int n = trial % 2 == 0 ? 4 : 5;
    VoxelGrid grid(n, n, n, Vec3::Zero(), Vec3(400, 400, 200));
    Medium m = Medium::empty(grid.size());
    m.aerosol = trial % 3 == 0 ? isotropic_aerosol() : type6_aerosol();
    m.beta_air = make_air(grid, AirProfile{});
    for (double& v : m.beta_aerosol_green) v = 1e-3 * rng.uniform();
    const double ext = n * 400.0;
    std::vector<Camera> cams;
    for (int c = 0; c < 2; ++c) {
      cams.emplace_back(Vec3(ext * rng.uniform(), ext * rng.uniform(), -200.0 * rng.uniform()), 8, 8);
    }
    Scene s{grid, m, cams, Sun{}};
    ImageSet meas(2);
    std::vector<PixelMask> masks;
    for (std::size_t c = 0; c < 2; ++c) {
      for (Image& img : meas[c]) img = Image(8, 8);
      PixelMask mk(64, 1);
      for (auto& x : mk) x = rng.uniform() < 0.8 ? 1 : 0;
      masks.push_back(mk);
    }
    ProblemOptions po;
    po.eta = trial % 4 == 0 ? 1e-9 : 0.0;
    po.threads = 1;
    InverseProblem problem = make_inverse_problem(s, meas, masks, po);
    FrozenFields j;
    for (auto& per_ch : j) {
      for (int c = 0; c < 2; ++c) {
        std::vector<double> f(grid.size());
        for (double& v : f) v = 0.1 * rng.uniform();
        per_ch.push_back(f);
      }
    }
    const std::vector<double>& beta = s.medium.beta_aerosol_green;
    // Measurements near the rendered images keep the cost and its slope on the same scale.
    problem.measured = render_frozen(problem, beta, j);
    for (auto& cam : problem.measured) {
      for (Image& img : cam) {
        for (double& v : img.pixels) v *= 0.5 + rng.uniform();
      }
    }
    const Evaluation e = evaluate(problem, beta, j);
    // Five-point central differences per voxel; h moves tau by about 1e-3.
    const double h = 1e-6;
    double diff2 = 0.0;
    double norm2 = 0.0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
      auto at = [&](double offset) {
        std::vector<double> b = beta;
        b[k] += offset;
        return cost(problem, b, j);
      };
      const double fd = (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h);
      diff2 += (e.gradient[k] - fd) * (e.gradient[k] - fd);
      norm2 += fd * fd;
    }
    worst = std::max(worst, std::sqrt(diff2 / norm2));
  }
  return {worst < 1e-5, fmt::format("max relative gradient error {:.2e} over {} trials", worst, trials)};
}

// ---------------------------------------------------------------------------
// 7. Conditioning

Outcome conditioning() {
  const Scene truth = make_preset("toy-conditioning", {.nx = 24, .ny = 24, .nz = 24, .pixels = 32});
  const VoxelGrid& grid = truth.grid;
  std::vector<ProjectionMatrix> proj;
  for (std::size_t c = 0; c < truth.cameras.size(); ++c) proj.push_back(build_projection(truth, c, 10));
  ImageSet measured(truth.cameras.size());
  for (int ch = 0; ch < kNumChannels; ++ch) {
    const VfmcResult v = render_vfmc(truth, ch, 2000000, derive_seed(70, static_cast<std::uint64_t>(ch)), proj, transport_options());
    for (std::size_t c = 0; c < truth.cameras.size(); ++c) measured[c][ch] = v.images[c];
  }
  const std::vector<PixelMask> masks = build_sun_masks(truth, 15.0);
  const std::vector<double> zero(grid.size(), 0.0);

  auto first_step = [&](bool conditioned) {
    ProblemOptions po;
    po.conditioning = conditioned;
    const InverseProblem problem = make_inverse_problem(truth, measured, masks, po);
    const FrozenFields j = refresh_fields(problem, zero, ForwardModel::MultiScatter, 2000000, 71);
    const double step = estimate_step_size(problem, zero, j);
    const std::vector<double> g = gradient(problem, zero, j);
    std::vector<double> next(g.size());
    for (std::size_t k = 0; k < g.size(); ++k) next[k] = -step * g[k];
    return project(problem, next);
  };

  std::vector<std::uint8_t> near_camera(grid.size(), 0);
  for (const Camera& cam : truth.cameras) {
    const auto v = grid.voxel_of_point(cam.position());
    const VoxelCoord at = v ? grid.unravel(*v) : VoxelCoord{};
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const VoxelCoord q = grid.unravel(k);
      if (std::abs(q.ix - at.ix) <= 1 && std::abs(q.iy - at.iy) <= 1 && std::abs(q.iz - at.iz) <= 1) {
        near_camera[k] = 1;
      }
    }
  }
  const auto& beta_true = truth.medium.beta_aerosol_green;
  const double peak = *std::max_element(beta_true.begin(), beta_true.end());
  auto ratio = [&](const std::vector<double>& beta) {
    double near = 0.0;
    double cloud = 0.0;
    for (std::size_t k = 0; k < beta.size(); ++k) {
      if (near_camera[k]) near = std::max(near, beta[k]);
      if (beta_true[k] >= 0.1 * peak && !near_camera[k]) cloud = std::max(cloud, beta[k]);
    }
    return near / cloud;
  };
  const double off = ratio(first_step(false));
  const double on = ratio(first_step(true));
  const double reduction = off / on;
  return {reduction >= 5.0, fmt::format("near-camera/cloud ratio: plain={:.3g} conditioned={:.3g}; reduction {:.1f}x",
                                        off, on, reduction)};
}

// ---------------------------------------------------------------------------
// 8, 8b, 9. End-to-end recovery

struct RecoverySetup {
  Scene truth;
  InverseProblem problem;
};

RecoverySetup recovery_setup() {
  const Scene truth = make_preset("toy-recovery", {.pixels = 32});
  const std::vector<PixelMask> masks = build_sun_masks(truth, 15.0);
  ImageSet clean(truth.cameras.size());
  for (std::size_t c = 0; c < truth.cameras.size(); ++c) {
    for (int ch = 0; ch < kNumChannels; ++ch) {
      clean[c][ch] = render_bmc(truth, ch, c, 2000, derive_seed(80, c * 3 + static_cast<std::uint64_t>(ch)), transport_options()).mean;
    }
  }
  const Measurement m = apply_sensor(clean, masks, SensorModel{}, 81);
  ProblemOptions po;
  po.eta = 0.0;
  return {truth, make_inverse_problem(truth, to_radiance(m), masks, po)};
}

SolveOptions recovery_options() {
  SolveOptions o;
  o.n_gd = 5;
  o.max_q = 80;
  o.photons = 200000;
  o.seed = 82;
  return o;
}

struct RecoveryRun {
  SolveResult result;
  ErrorMetrics metrics;
  double seconds = 0.0;
};

const RecoveryRun& recovery_run() {
  static const RecoveryRun run = [] {
    const auto t0 = Clock::now();
    const RecoverySetup s = recovery_setup();
    const std::vector<double> zero(s.truth.grid.size(), 0.0);
    RecoveryRun r;
    r.result = solve(s.problem, zero, recovery_options(), s.truth.medium.beta_aerosol_green);
    r.metrics = error_metrics(r.result.beta, s.truth.medium.beta_aerosol_green);
    r.seconds = seconds_since(t0);
    return r;
  }();
  return run;
}

Outcome end_to_end_recovery() {
  const RecoveryRun& r = recovery_run();
  const double eps0 = r.result.trace.front().metrics->epsilon;
  const bool pass = r.metrics.epsilon < 0.60 && std::abs(r.metrics.delta_mass) < 0.15 &&
                    r.metrics.epsilon < eps0 && r.seconds < 1800.0;
  return {pass, fmt::format("epsilon={:.3f} delta_mass={:+.3f} (zero-init epsilon {:.3f}); {} blocks, {} halvings",
                            r.metrics.epsilon, r.metrics.delta_mass, eps0, r.result.blocks,
                            r.result.step_halvings)};
}

Outcome multi_vs_single_scatter() {
  const RecoverySetup s = recovery_setup();
  const double tau = max_optical_depth(s.truth);
  const auto& truth = s.truth.medium.beta_aerosol_green;
  const std::vector<double> zero(truth.size(), 0.0);
  SolveOptions single = recovery_options();
  single.forward = ForwardModel::SingleScatter;
  const SolveResult baseline = solve(s.problem, zero, single);
  SolveOptions multi = recovery_options();
  multi.max_q = 40;
  const SolveResult refined = solve(s.problem, baseline.beta, multi);
  const ErrorMetrics eb = error_metrics(baseline.beta, truth);
  const ErrorMetrics er = error_metrics(refined.beta, truth);
  return {tau > 1.0 && er.epsilon < eb.epsilon,
          fmt::format("max tau={:.2f}; single-scatter epsilon={:.3f}, multi-scatter from it epsilon={:.3f}",
                      tau, eb.epsilon, er.epsilon)};
}

Outcome cost_behavior() {
  const RecoveryRun& r = recovery_run();
  const double frac = r.result.nonincreasing_fraction();
  return {frac >= 0.9, fmt::format("non-increasing in {:.3f} of {} surrogate blocks", frac, r.result.blocks)};
}

// ---------------------------------------------------------------------------
// 10. Scaling

Outcome scaling() {
  const Scene base = make_preset("atm1", {.nx = 24, .ny = 24, .nz = 24, .pixels = 32});
  auto with_views = [&](std::size_t n) {
    Scene s = base;
    s.cameras.assign(base.cameras.begin(), base.cameras.begin() + static_cast<std::ptrdiff_t>(n));
    return s;
  };
  const std::uint64_t photons = 2000000;
  auto time_vfmc = [&](const Scene& s, int threads) {
    std::vector<ProjectionMatrix> proj;
    for (std::size_t c = 0; c < s.cameras.size(); ++c) proj.push_back(build_projection(s, c, 10));
    const auto t0 = Clock::now();
    render_vfmc(s, 1, photons, 100, proj, transport_options(threads));
    return seconds_since(t0);
  };
  auto time_bmc = [&](const Scene& s) {
    const auto t0 = Clock::now();
    for (std::size_t c = 0; c < s.cameras.size(); ++c) render_bmc(s, 1, c, 100, 101 + c, transport_options(1));
    return seconds_since(t0);
  };
  const Scene s4 = with_views(4);
  const Scene s16 = with_views(16);
  const double v4 = time_vfmc(s4, 1);
  const double v16 = time_vfmc(s16, 1);
  const double b4 = time_bmc(s4);
  const double b16 = time_bmc(s16);
  const double v16_4 = time_vfmc(s16, 4);
  const double vfmc_growth = v16 / v4;
  const double bmc_growth = b16 / b4;
  const double speedup = v16 / v16_4;
  const bool pass = vfmc_growth < 1.3 && bmc_growth >= 3.5 && speedup >= 2.5;
  return {pass, fmt::format("vfmc 4->16 views x{:.2f}; bmc x{:.2f}; 4-worker speedup x{:.2f} ({} hardware threads)",
                            vfmc_growth, bmc_growth, speedup, std::thread::hardware_concurrency())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"1", sampler_chi_square},   {"2", phase_normalization},     {"3", single_scatter_oracle},
      {"4", in_situ_stability},    {"5", cross_renderer},          {"6", gradient_check},
      {"7", conditioning},         {"8", end_to_end_recovery},     {"8b", multi_vs_single_scatter},
      {"9", cost_behavior},        {"10", scaling}};
  std::vector<std::string> wanted(argv + 1, argv + argc);
  if (wanted.empty() || (wanted.size() == 1 && wanted[0] == "all")) {
    wanted.clear();
    for (const auto& c : criteria) wanted.push_back(c.first);
  }
  int failures = 0;
  for (const std::string& id : wanted) {
    const auto it = std::find_if(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == id; });
    if (it == criteria.end()) {
      std::fprintf(stderr, "unknown criterion '%s'\n", id.c_str());
      return 2;
    }
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = it->second();
    } catch (const std::exception& e) {
      o = {false, fmt::format("error: {}", e.what())};
    }
    std::printf("criterion %s: %s (%.1fs) %s\n", id.c_str(), o.pass ? "PASS" : "FAIL", seconds_since(t0),
                o.detail.c_str());
    std::fflush(stdout);
    failures += o.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
