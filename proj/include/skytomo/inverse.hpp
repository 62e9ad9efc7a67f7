#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "skytomo/image.hpp"
#include "skytomo/scene.hpp"
#include "skytomo/transport.hpp"
#include "skytomo/vfmc.hpp"

namespace skytomo {

/// beta_mu = beta_air_mu + (sigma_mu / sigma_G) * beta_aerosol_G for each channel.
std::array<std::vector<double>, kNumChannels> channel_extinction(
    std::span<const double> beta_aerosol_green, const Medium& medium);

// ---------------------------------------------------------------------------
// Smoothness prior

/// Graph Laplacian with 6-neighborhoods: (L x)_k = sum over neighbors n of (x_n - x_k).
std::vector<double> laplacian_apply(const VoxelGrid& grid, std::span<const double> x);

/// exp(z / scale_height) at voxel-center altitude z.
std::vector<double> altitude_weights(const VoxelGrid& grid, double scale_height = 3000.0);

/// || diag(w) L x ||^2
double regularizer(const VoxelGrid& grid, std::span<const double> weights,
                   std::span<const double> x);
/// 2 L diag(w^2) L x
std::vector<double> regularizer_gradient(const VoxelGrid& grid, std::span<const double> weights,
                                         std::span<const double> x);

// ---------------------------------------------------------------------------
// Problem setup

struct BlockShape {
  int bx = 1;
  int by = 1;
  int bz = 1;
  bool trivial() const { return bx == 1 && by == 1 && bz == 1; }
};

/// Channel-independent camera geometry.
struct CameraGeometry {
  ProjectionMatrix projection;
  SparseMatrix los;
};

/// Frozen in-scatter fields, indexed [channel][camera][voxel].
using FrozenFields = std::array<std::vector<std::vector<double>>, kNumChannels>;

struct InverseProblem {
  explicit InverseProblem(Scene s) : scene(std::move(s)) {}

  Scene scene;  // geometry, air, aerosol optics; its aerosol field is ignored
  std::vector<CameraGeometry> cameras;
  ImageSet measured;  // radiance
  std::vector<PixelMask> masks;
  std::vector<double> weights;   // altitude weights of the prior
  std::vector<std::uint8_t> support;  // 1 = free voxel
  BlockShape blocks;
  double eta = 0.0;
  bool conditioning = true;
  int threads = 0;
};

struct ProblemOptions {
  int n_rays = 10;
  double eta = 0.0;
  double prior_scale_height = 3000.0;
  bool conditioning = true;
  BlockShape blocks;
  std::vector<std::uint8_t> support;  // empty: every voxel
  int threads = 0;
};

InverseProblem make_inverse_problem(const Scene& scene, ImageSet measured,
                                    std::vector<PixelMask> masks,
                                    const ProblemOptions& options = {});

// ---------------------------------------------------------------------------
// Cost and derivatives with frozen in-scatter fields

/// Frozen-j images i_c = Pi_c (j . beta_mu . exp(-W_c beta_mu)).
ImageSet render_frozen(const InverseProblem& problem, std::span<const double> beta_aerosol,
                       const FrozenFields& j);

/// J^T r with J = Pi diag(j) (diag(T) - diag(beta T) W).
std::vector<double> surrogate_jacobian_apply(std::span<const double> residual,
                                             const ProjectionMatrix& projection,
                                             const SparseMatrix& los, std::span<const double> j,
                                             std::span<const double> beta,
                                             std::span<const double> transmittance);

/// J v, the forward counterpart of surrogate_jacobian_apply.
std::vector<double> surrogate_jacobian_forward(std::span<const double> v,
                                               const ProjectionMatrix& projection,
                                               const SparseMatrix& los,
                                               std::span<const double> j,
                                               std::span<const double> beta,
                                               std::span<const double> transmittance);

/// Per-camera conditioning weights: 1 / ray count, 0 where no ray passes.
std::vector<double> conditioning_weights(const ProjectionMatrix& projection);

struct Evaluation {
  double cost = 0.0;
  double data_cost = 0.0;
  std::vector<double> gradient;  // empty unless requested
};

struct GradientMode {
  bool enabled = true;
  bool conditioned = false;
  bool projected = false;
};

/// Masked least-squares cost plus eta * prior, and optionally its gradient in
/// beta_aerosol_G. The conditioned gradient reweights each camera's data term.
Evaluation evaluate(const InverseProblem& problem, std::span<const double> beta_aerosol,
                    const FrozenFields& j, GradientMode mode = {});

double cost(const InverseProblem& problem, std::span<const double> beta_aerosol,
            const FrozenFields& j);

/// Conditioned, projected descent direction.
std::vector<double> gradient(const InverseProblem& problem, std::span<const double> beta_aerosol,
                             const FrozenFields& j);

/// Non-negativity, block averaging over support voxels, zero outside support.
std::vector<double> project(const InverseProblem& problem, std::span<const double> beta);

/// Block average over support voxels and zero outside support (no clipping).
std::vector<double> project_direction(const InverseProblem& problem,
                                      std::span<const double> direction);

/// 1 / lambda_max of the conditioned Gauss-Newton operator (power iteration).
double estimate_step_size(const InverseProblem& problem, std::span<const double> beta_aerosol,
                          const FrozenFields& j, int iterations = 30);

// ---------------------------------------------------------------------------
// Frozen fields

enum class ForwardModel { MultiScatter, SingleScatter };

/// Renders j for every channel and camera with the given aerosol field.
FrozenFields refresh_fields(const InverseProblem& problem, std::span<const double> beta_aerosol,
                            ForwardModel model, std::uint64_t photons, std::uint64_t seed,
                            const TransportOptions& transport = {});

// ---------------------------------------------------------------------------
// Solver

struct ErrorMetrics {
  double delta_mass = 0.0;
  double epsilon = 0.0;
};

ErrorMetrics error_metrics(std::span<const double> estimate, std::span<const double> truth);

struct SolveOptions {
  double step = 0.0;  // <= 0: automatic
  int n_gd = 5;
  int max_q = 200;
  double plateau_tolerance = 1e-4;
  int plateau_window = 10;
  /// Halve the step after this many consecutive rises of the block-start cost.
  int divergence_patience = 5;
  std::uint64_t photons = 100000;        // per surrogate block
  std::uint64_t polish_photons = 0;      // final full-budget block; 0 disables
  std::uint64_t seed = 1;
  ForwardModel forward = ForwardModel::MultiScatter;
  TransportOptions transport;
};

struct TraceRow {
  int block = 0;
  int step = 0;  // 0 = block start, before any update
  double cost = 0.0;
  double step_size = 0.0;
  std::optional<ErrorMetrics> metrics;
};

struct SolveResult {
  std::vector<double> beta;
  std::vector<TraceRow> trace;
  int blocks = 0;
  int step_halvings = 0;
  bool plateaued = false;
  /// Fraction of blocks whose end cost does not exceed their start cost.
  double nonincreasing_fraction() const;
  void write_trace_csv(const std::filesystem::path& path) const;
};

SolveResult solve(const InverseProblem& problem, std::span<const double> init,
                  const SolveOptions& options,
                  std::optional<std::span<const double>> truth = std::nullopt);

}  // namespace skytomo
