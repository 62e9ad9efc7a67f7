#include "skytomo/inverse.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <fmt/format.h>

#include "skytomo/oracle.hpp"
#include "skytomo/parallel.hpp"
#include "skytomo/rng.hpp"

namespace skytomo {

namespace {

using Eigen::VectorXd;

Eigen::Map<const VectorXd> as_vector(std::span<const double> x) {
  return {x.data(), static_cast<Eigen::Index>(x.size())};
}

std::vector<double> to_std(const VectorXd& v) { return {v.data(), v.data() + v.size()}; }

void check_size(std::size_t got, std::size_t want, const char* field) {
  if (got != want) {
    throw ValidationError(field, fmt::format("expected {} entries, got {}", want, got));
  }
}

double norm(std::span<const double> x) { return as_vector(x).norm(); }

}  // namespace

std::array<std::vector<double>, kNumChannels> channel_extinction(
    std::span<const double> beta_aerosol_green, const Medium& medium) {
  std::array<std::vector<double>, kNumChannels> out;
  for (int ch = 0; ch < kNumChannels; ++ch) {
    const double s = medium.aerosol.relative_sigma(ch);
    check_size(medium.beta_air[ch].size(), beta_aerosol_green.size(), "beta_air");
    out[ch].resize(beta_aerosol_green.size());
    for (std::size_t k = 0; k < beta_aerosol_green.size(); ++k) {
      out[ch][k] = medium.beta_air[ch][k] + s * beta_aerosol_green[k];
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> laplacian_apply(const VoxelGrid& grid, std::span<const double> x) {
  check_size(x.size(), grid.size(), "x");
  std::vector<double> out(x.size(), 0.0);
  const int n[3] = {grid.nx(), grid.ny(), grid.nz()};
  for (int iz = 0; iz < n[2]; ++iz) {
    for (int iy = 0; iy < n[1]; ++iy) {
      for (int ix = 0; ix < n[0]; ++ix) {
        const std::size_t k = grid.linear_index(ix, iy, iz);
        double acc = 0.0;
        auto add = [&](int jx, int jy, int jz) {
          if (jx < 0 || jy < 0 || jz < 0 || jx >= n[0] || jy >= n[1] || jz >= n[2]) return;
          acc += x[grid.linear_index(jx, jy, jz)] - x[k];
        };
        add(ix - 1, iy, iz);
        add(ix + 1, iy, iz);
        add(ix, iy - 1, iz);
        add(ix, iy + 1, iz);
        add(ix, iy, iz - 1);
        add(ix, iy, iz + 1);
        out[k] = acc;
      }
    }
  }
  return out;
}

std::vector<double> altitude_weights(const VoxelGrid& grid, double scale_height) {
  if (!(scale_height > 0.0)) throw ValidationError("prior_scale_height", "must be > 0");
  std::vector<double> w(grid.size());
  for (std::size_t k = 0; k < w.size(); ++k) w[k] = std::exp(grid.center(k).z() / scale_height);
  return w;
}

double regularizer(const VoxelGrid& grid, std::span<const double> weights,
                   std::span<const double> x) {
  check_size(weights.size(), grid.size(), "weights");
  const std::vector<double> lx = laplacian_apply(grid, x);
  double s = 0.0;
  for (std::size_t k = 0; k < lx.size(); ++k) s += weights[k] * weights[k] * lx[k] * lx[k];
  return s;
}

std::vector<double> regularizer_gradient(const VoxelGrid& grid, std::span<const double> weights,
                                         std::span<const double> x) {
  check_size(weights.size(), grid.size(), "weights");
  std::vector<double> lx = laplacian_apply(grid, x);
  for (std::size_t k = 0; k < lx.size(); ++k) lx[k] *= 2.0 * weights[k] * weights[k];
  return laplacian_apply(grid, lx);
}

// ---------------------------------------------------------------------------

InverseProblem make_inverse_problem(const Scene& scene, ImageSet measured,
                                    std::vector<PixelMask> masks, const ProblemOptions& options) {
  scene.validate();
  check_size(measured.size(), scene.cameras.size(), "measured images");
  check_size(masks.size(), scene.cameras.size(), "masks");
  for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
    const Camera& cam = scene.cameras[c];
    check_size(masks[c].size(), static_cast<std::size_t>(cam.num_pixels()), "mask pixels");
    for (const Image& img : measured[c]) {
      if (img.width != cam.width() || img.height != cam.height()) {
        throw ValidationError("measured images",
                              fmt::format("camera {} expects {}x{} images, got {}x{}", c,
                                          cam.width(), cam.height(), img.width, img.height));
      }
    }
  }
  if (options.blocks.bx < 1 || options.blocks.by < 1 || options.blocks.bz < 1) {
    throw ValidationError("blocks", "block dimensions must be >= 1");
  }
  if (!(options.eta >= 0.0)) throw ValidationError("eta", "must be >= 0");

  InverseProblem p(scene);
  p.measured = std::move(measured);
  p.masks = std::move(masks);
  p.weights = altitude_weights(scene.grid, options.prior_scale_height);
  p.support = options.support.empty() ? std::vector<std::uint8_t>(scene.grid.size(), 1)
                                      : options.support;
  check_size(p.support.size(), scene.grid.size(), "support");
  p.blocks = options.blocks;
  p.eta = options.eta;
  p.conditioning = options.conditioning;
  p.threads = options.threads;
  p.cameras.resize(scene.cameras.size());
  parallel_for(scene.cameras.size(), resolve_threads(options.threads), [&](std::size_t c) {
    p.cameras[c].projection = build_projection(scene, c, options.n_rays);
    p.cameras[c].los = build_los_geometry(scene.grid, scene.cameras[c].position());
  });
  return p;
}

// ---------------------------------------------------------------------------

std::vector<double> surrogate_jacobian_apply(std::span<const double> residual,
                                             const ProjectionMatrix& projection,
                                             const SparseMatrix& los, std::span<const double> j,
                                             std::span<const double> beta,
                                             std::span<const double> transmittance) {
  const auto n = static_cast<std::size_t>(projection.matrix.cols());
  check_size(residual.size(), static_cast<std::size_t>(projection.matrix.rows()), "residual");
  check_size(j.size(), n, "j");
  check_size(beta.size(), n, "beta");
  check_size(transmittance.size(), n, "transmittance");
  VectorXd z = projection.matrix.transpose() * as_vector(residual);
  VectorXd tbz(z.size());
  for (Eigen::Index k = 0; k < z.size(); ++k) {
    const auto i = static_cast<std::size_t>(k);
    z[k] *= j[i];
    tbz[k] = transmittance[i] * beta[i] * z[k];
  }
  VectorXd out = -(los.transpose() * tbz);
  for (Eigen::Index k = 0; k < z.size(); ++k) out[k] += transmittance[static_cast<std::size_t>(k)] * z[k];
  return to_std(out);
}

std::vector<double> surrogate_jacobian_forward(std::span<const double> v,
                                               const ProjectionMatrix& projection,
                                               const SparseMatrix& los,
                                               std::span<const double> j,
                                               std::span<const double> beta,
                                               std::span<const double> transmittance) {
  const auto n = static_cast<std::size_t>(projection.matrix.cols());
  check_size(v.size(), n, "v");
  check_size(j.size(), n, "j");
  check_size(beta.size(), n, "beta");
  check_size(transmittance.size(), n, "transmittance");
  const VectorXd wv = los * as_vector(v);
  VectorXd y(static_cast<Eigen::Index>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const auto e = static_cast<Eigen::Index>(k);
    y[e] = j[k] * transmittance[k] * (v[k] - beta[k] * wv[e]);
  }
  return to_std(projection.matrix * y);
}

std::vector<double> conditioning_weights(const ProjectionMatrix& projection) {
  std::vector<double> q(projection.ray_counts.size(), 0.0);
  for (std::size_t k = 0; k < q.size(); ++k) {
    if (projection.ray_counts[k] > 0) q[k] = 1.0 / projection.ray_counts[k];
  }
  return q;
}

namespace {

struct PairTerm {
  double cost = 0.0;
  std::vector<double> gradient;
};

void check_fields(const InverseProblem& problem, const FrozenFields& j) {
  for (int ch = 0; ch < kNumChannels; ++ch) {
    check_size(j[ch].size(), problem.cameras.size(), "frozen fields");
    for (const auto& f : j[ch]) check_size(f.size(), problem.scene.grid.size(), "frozen field");
  }
}

}  // namespace

ImageSet render_frozen(const InverseProblem& problem, std::span<const double> beta_aerosol,
                       const FrozenFields& j) {
  check_fields(problem, j);
  const auto beta = channel_extinction(beta_aerosol, problem.scene.medium);
  ImageSet out(problem.cameras.size());
  for (std::size_t c = 0; c < problem.cameras.size(); ++c) {
    for (int ch = 0; ch < kNumChannels; ++ch) {
      const auto t = los_transmittance(problem.cameras[c].los, beta[ch]);
      out[c][ch] = render(problem.cameras[c].projection, problem.scene.cameras[c], j[ch][c],
                          beta[ch], t);
    }
  }
  return out;
}

Evaluation evaluate(const InverseProblem& problem, std::span<const double> beta_aerosol,
                    const FrozenFields& j, GradientMode mode) {
  const std::size_t n = problem.scene.grid.size();
  check_size(beta_aerosol.size(), n, "beta");
  check_fields(problem, j);
  const auto beta = channel_extinction(beta_aerosol, problem.scene.medium);
  const std::size_t n_cam = problem.cameras.size();
  std::vector<PairTerm> terms(n_cam * kNumChannels);

  parallel_for(terms.size(), resolve_threads(problem.threads), [&](std::size_t i) {
    const std::size_t c = i / kNumChannels;
    const int ch = static_cast<int>(i % kNumChannels);
    const CameraGeometry& geo = problem.cameras[c];
    const auto t = los_transmittance(geo.los, beta[ch]);
    const Image img = render(geo.projection, problem.scene.cameras[c], j[ch][c], beta[ch], t);
    const Image& meas = problem.measured[c][ch];
    const PixelMask& mask = problem.masks[c];
    std::vector<double> r(img.size(), 0.0);
    double s = 0.0;
    for (std::size_t p = 0; p < r.size(); ++p) {
      if (!mask[p]) continue;
      r[p] = img[p] - meas[p];
      s += r[p] * r[p];
    }
    terms[i].cost = s;
    if (!mode.enabled) return;
    std::vector<double> g = surrogate_jacobian_apply(r, geo.projection, geo.los, j[ch][c],
                                                     beta[ch], t);
    const double scale = 2.0 * problem.scene.medium.aerosol.relative_sigma(ch);
    if (mode.conditioned) {
      const std::vector<double> q = conditioning_weights(geo.projection);
      for (std::size_t k = 0; k < n; ++k) g[k] *= scale * q[k];
    } else {
      for (double& v : g) v *= scale;
    }
    terms[i].gradient = std::move(g);
  });

  Evaluation out;
  for (const PairTerm& t : terms) out.data_cost += t.cost;
  out.cost = out.data_cost;
  if (problem.eta > 0.0) {
    out.cost += problem.eta * regularizer(problem.scene.grid, problem.weights, beta_aerosol);
  }
  if (mode.enabled) {
    out.gradient.assign(n, 0.0);
    for (const PairTerm& t : terms) {
      for (std::size_t k = 0; k < n; ++k) out.gradient[k] += t.gradient[k];
    }
    if (problem.eta > 0.0) {
      const auto rg = regularizer_gradient(problem.scene.grid, problem.weights, beta_aerosol);
      for (std::size_t k = 0; k < n; ++k) out.gradient[k] += problem.eta * rg[k];
    }
    if (mode.projected) out.gradient = project_direction(problem, out.gradient);
  }
  return out;
}

double cost(const InverseProblem& problem, std::span<const double> beta_aerosol,
            const FrozenFields& j) {
  return evaluate(problem, beta_aerosol, j, {.enabled = false}).cost;
}

std::vector<double> gradient(const InverseProblem& problem, std::span<const double> beta_aerosol,
                             const FrozenFields& j) {
  return evaluate(problem, beta_aerosol, j,
                  {.enabled = true, .conditioned = problem.conditioning, .projected = true})
      .gradient;
}

std::vector<double> project_direction(const InverseProblem& problem,
                                      std::span<const double> direction) {
  const VoxelGrid& grid = problem.scene.grid;
  check_size(direction.size(), grid.size(), "direction");
  std::vector<double> out(direction.begin(), direction.end());
  if (!problem.blocks.trivial()) {
    const BlockShape& b = problem.blocks;
    const int mx = (grid.nx() + b.bx - 1) / b.bx;
    const int my = (grid.ny() + b.by - 1) / b.by;
    const int mz = (grid.nz() + b.bz - 1) / b.bz;
    const std::size_t n_blocks = static_cast<std::size_t>(mx) * my * mz;
    std::vector<double> sum(n_blocks, 0.0);
    std::vector<int> count(n_blocks, 0);
    std::vector<std::size_t> block_of(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const VoxelCoord v = grid.unravel(k);
      block_of[k] = (static_cast<std::size_t>(v.iz / b.bz) * my + v.iy / b.by) * mx + v.ix / b.bx;
      if (!problem.support[k]) continue;
      sum[block_of[k]] += out[k];
      ++count[block_of[k]];
    }
    for (std::size_t k = 0; k < grid.size(); ++k) {
      const std::size_t blk = block_of[k];
      out[k] = count[blk] > 0 ? sum[blk] / count[blk] : 0.0;
    }
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (!problem.support[k]) out[k] = 0.0;
  }
  return out;
}

std::vector<double> project(const InverseProblem& problem, std::span<const double> beta) {
  std::vector<double> clipped(beta.begin(), beta.end());
  for (double& v : clipped) v = std::max(0.0, v);
  return project_direction(problem, clipped);
}

double estimate_step_size(const InverseProblem& problem, std::span<const double> beta_aerosol,
                          const FrozenFields& j, int iterations) {
  const std::size_t n = problem.scene.grid.size();
  check_size(beta_aerosol.size(), n, "beta");
  check_fields(problem, j);
  const auto beta = channel_extinction(beta_aerosol, problem.scene.medium);
  const std::size_t n_cam = problem.cameras.size();
  std::vector<std::vector<double>> transmittance(n_cam * kNumChannels);
  std::vector<std::vector<double>> q(n_cam);
  for (std::size_t c = 0; c < n_cam; ++c) {
    for (int ch = 0; ch < kNumChannels; ++ch) {
      transmittance[c * kNumChannels + ch] = los_transmittance(problem.cameras[c].los, beta[ch]);
    }
    q[c] = problem.conditioning ? conditioning_weights(problem.cameras[c].projection)
                                : std::vector<double>(n, 1.0);
  }

  auto apply = [&](const std::vector<double>& v) {
    std::vector<std::vector<double>> parts(n_cam * kNumChannels);
    parallel_for(parts.size(), resolve_threads(problem.threads), [&](std::size_t i) {
      const std::size_t c = i / kNumChannels;
      const int ch = static_cast<int>(i % kNumChannels);
      const CameraGeometry& geo = problem.cameras[c];
      const double s = problem.scene.medium.aerosol.relative_sigma(ch);
      std::vector<double> jv = surrogate_jacobian_forward(v, geo.projection, geo.los, j[ch][c],
                                                          beta[ch], transmittance[i]);
      for (std::size_t p = 0; p < jv.size(); ++p) {
        jv[p] = problem.masks[c][p] ? s * jv[p] : 0.0;
      }
      std::vector<double> g = surrogate_jacobian_apply(jv, geo.projection, geo.los, j[ch][c],
                                                       beta[ch], transmittance[i]);
      for (std::size_t k = 0; k < n; ++k) g[k] *= 2.0 * s * q[c][k];
      parts[i] = std::move(g);
    });
    std::vector<double> out(n, 0.0);
    for (const auto& part : parts) {
      for (std::size_t k = 0; k < n; ++k) out[k] += part[k];
    }
    if (problem.eta > 0.0) {
      const auto rg = regularizer_gradient(problem.scene.grid, problem.weights, v);
      for (std::size_t k = 0; k < n; ++k) out[k] += problem.eta * rg[k];
    }
    return project_direction(problem, out);
  };

  std::vector<double> v(n);
  Rng rng(0x57e9, 0);
  for (double& x : v) x = 0.5 + rng.uniform();
  v = project_direction(problem, v);
  double lambda = 0.0;
  double nv = norm(v);
  if (!(nv > 0.0)) throw ValidationError("support", "no free voxels");
  for (double& x : v) x /= nv;
  for (int it = 0; it < iterations; ++it) {
    std::vector<double> hv = apply(v);
    lambda = norm(hv);
    if (!(lambda > 0.0)) break;
    for (std::size_t k = 0; k < n; ++k) v[k] = hv[k] / lambda;
  }
  if (!(lambda > 0.0) || !std::isfinite(lambda)) {
    throw ValidationError("step", "cost curvature vanishes; supply an explicit step size");
  }
  return 1.0 / lambda;
}

// ---------------------------------------------------------------------------

FrozenFields refresh_fields(const InverseProblem& problem, std::span<const double> beta_aerosol,
                            ForwardModel model, std::uint64_t photons, std::uint64_t seed,
                            const TransportOptions& transport) {
  check_size(beta_aerosol.size(), problem.scene.grid.size(), "beta");
  Scene scene = problem.scene;
  scene.medium.beta_aerosol_green.assign(beta_aerosol.begin(), beta_aerosol.end());
  FrozenFields j;
  for (int ch = 0; ch < kNumChannels; ++ch) {
    j[ch].resize(scene.cameras.size());
    if (model == ForwardModel::SingleScatter) {
      // Pi integrates voxel power, so the pointwise source carries the voxel volume.
      const double volume = scene.grid.voxel_volume();
      for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
        j[ch][c] = single_scatter_field(scene, ch, c);
        for (double& v : j[ch][c]) v *= volume;
      }
      continue;
    }
    const std::vector<double> beta = scene.medium.total_field(ch);
    ScatterFields fields = accumulate_scatter(scene, ch, photons,
                                              derive_seed(seed, static_cast<std::uint64_t>(ch)),
                                              transport);
    for (std::size_t c = 0; c < scene.cameras.size(); ++c) {
      j[ch][c] = in_scatter_field(fields.radiance[c], beta);
    }
  }
  return j;
}

ErrorMetrics error_metrics(std::span<const double> estimate, std::span<const double> truth) {
  check_size(estimate.size(), truth.size(), "estimate");
  double mass_true = 0.0;
  double mass_est = 0.0;
  double diff = 0.0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    mass_true += std::abs(truth[k]);
    mass_est += std::abs(estimate[k]);
    diff += std::abs(estimate[k] - truth[k]);
  }
  if (!(mass_true > 0.0)) throw ValidationError("truth", "ground truth has zero mass");
  return {(mass_est - mass_true) / mass_true, diff / mass_true};
}

double SolveResult::nonincreasing_fraction() const {
  int blocks_seen = 0;
  int good = 0;
  std::size_t i = 0;
  while (i < trace.size()) {
    const int b = trace[i].block;
    const double start = trace[i].cost;
    double end = start;
    while (i < trace.size() && trace[i].block == b) end = trace[i++].cost;
    ++blocks_seen;
    if (end <= start) ++good;
  }
  return blocks_seen > 0 ? static_cast<double>(good) / blocks_seen : 1.0;
}

void SolveResult::write_trace_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
  out << "block,step,cost,step_size,delta_mass,epsilon\n";
  for (const TraceRow& r : trace) {
    out << fmt::format("{},{},{:.17g},{:.17g},", r.block, r.step, r.cost, r.step_size);
    if (r.metrics) {
      out << fmt::format("{:.17g},{:.17g}\n", r.metrics->delta_mass, r.metrics->epsilon);
    } else {
      out << ",\n";
    }
  }
}

SolveResult solve(const InverseProblem& problem, std::span<const double> init,
                  const SolveOptions& options, std::optional<std::span<const double>> truth) {
  const std::size_t n = problem.scene.grid.size();
  check_size(init.size(), n, "init");
  if (truth) check_size(truth->size(), n, "truth");
  if (options.n_gd < 1) throw ValidationError("n_gd", "must be >= 1");
  if (options.max_q < 1) throw ValidationError("max_q", "must be >= 1");
  if (options.photons < 1) throw ValidationError("photons", "must be >= 1");

  SolveResult result;
  result.beta = project(problem, init);
  double step_factor = 1.0;
  int rising = 0;
  std::optional<double> previous_start;
  std::vector<double> block_end_costs;

  auto metrics = [&]() -> std::optional<ErrorMetrics> {
    if (!truth) return std::nullopt;
    return error_metrics(result.beta, *truth);
  };
  auto check_finite = [&](double c, int q, int d) {
    if (!std::isfinite(c)) {
      throw DivergenceError(fmt::format("non-finite cost at block {} step {}", q, d));
    }
  };

  const bool polish = options.polish_photons > 0;
  const int total_blocks = options.max_q + (polish ? 1 : 0);
  for (int q = 0; q < total_blocks; ++q) {
    const bool is_polish = polish && q == total_blocks - 1;
    const std::uint64_t photons = is_polish ? options.polish_photons : options.photons;
    const FrozenFields j =
        refresh_fields(problem, result.beta, options.forward, photons,
                       derive_seed(options.seed, static_cast<std::uint64_t>(q)), options.transport);
    const GradientMode mode{.enabled = true, .conditioned = problem.conditioning, .projected = true};
    Evaluation e = evaluate(problem, result.beta, j, mode);
    check_finite(e.cost, q, 0);

    // Divergence guard over the fresh-field cost at successive block starts.
    if (previous_start) rising = e.cost > *previous_start ? rising + 1 : 0;
    previous_start = e.cost;
    if (rising >= options.divergence_patience) {
      step_factor *= 0.5;
      ++result.step_halvings;
      rising = 0;
    }
    const double base_step =
        options.step > 0.0 ? options.step : estimate_step_size(problem, result.beta, j);
    const double step = base_step * step_factor;
    result.trace.push_back({q, 0, e.cost, step, metrics()});
    for (int d = 1; d <= options.n_gd; ++d) {
      std::vector<double> next(n);
      for (std::size_t k = 0; k < n; ++k) next[k] = result.beta[k] - step * e.gradient[k];
      result.beta = project(problem, next);
      e = evaluate(problem, result.beta, j,
                   {.enabled = d < options.n_gd, .conditioned = problem.conditioning,
                    .projected = true});
      check_finite(e.cost, q, d);
      result.trace.push_back({q, d, e.cost, step, metrics()});
    }
    ++result.blocks;

    if (is_polish) break;
    block_end_costs.push_back(e.cost);
    const std::size_t w = static_cast<std::size_t>(options.plateau_window);
    if (w > 0 && block_end_costs.size() > w) {
      const double before = block_end_costs[block_end_costs.size() - 1 - w];
      const double now = block_end_costs.back();
      if (before > 0.0 && std::abs(now - before) / before < options.plateau_tolerance) {
        result.plateaued = true;
        if (!polish) break;
        q = total_blocks - 2;
      }
    }
  }
  return result;
}

}  // namespace skytomo
