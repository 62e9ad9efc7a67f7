#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>

#include "skytomo/image.hpp"
#include "skytomo/scene.hpp"
#include "skytomo/transport.hpp"

namespace skytomo {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Fixed sub-pixel sample offsets in [0,1)^2 shared by every pixel.
class SubpixelPattern {
 public:
  /// Hammersley set: ((i + 0.5) / n, radical_inverse_2(i)).
  static SubpixelPattern stratified(int n_rays);
  explicit SubpixelPattern(std::vector<std::pair<double, double>> offsets);

  int size() const { return static_cast<int>(offsets_.size()); }
  const std::vector<std::pair<double, double>>& offsets() const { return offsets_; }

 private:
  std::vector<std::pair<double, double>> offsets_;
};

/// Pixel-by-voxel projection, entries l / (n_rays * V_voxel) in 1/m^2.
struct ProjectionMatrix {
  SparseMatrix matrix;
  /// Sub-pixel rays crossing each voxel (conditioning weights).
  std::vector<std::uint32_t> ray_counts;
  int n_rays = 0;
};

ProjectionMatrix build_projection(const Scene& scene, std::size_t camera,
                                  const SubpixelPattern& pattern);
ProjectionMatrix build_projection(const Scene& scene, std::size_t camera, int n_rays = 10);

/// Voxel-by-voxel line-of-sight lengths (m) from each voxel center to the
/// camera. When `rows` is non-empty only those rows are filled.
SparseMatrix build_los_geometry(const VoxelGrid& grid, const Vec3& camera,
                                std::span<const std::size_t> rows = {});

/// exp(-W beta), per voxel.
std::vector<double> los_transmittance(const SparseMatrix& los, std::span<const double> beta);

/// Same transmittance without materializing the matrix.
std::vector<double> los_transmittance_direct(const VoxelGrid& grid, const Vec3& camera,
                                             std::span<const double> beta);

struct LosMatrix {
  SparseMatrix matrix;
  std::vector<double> transmittance;
};

LosMatrix build_los(const Scene& scene, std::size_t camera, int channel);

/// Per-camera scattered power toward each camera, accumulated over events.
///
/// Every event adds packet_power * albedo * I * P(cos to camera) to every
/// camera's entry of the event voxel. Storage is voxel-major so one event
/// touches contiguous memory.
class ScatterCache final : public EventSink {
 public:
  ScatterCache(const Scene& scene, int channel);

  void on_scatter(const ScatterEvent& e) override;
  std::unique_ptr<EventSink> fork() const override;
  void merge(const EventSink& other) override;

  std::size_t num_cameras() const { return n_cameras_; }
  std::size_t num_voxels() const { return n_voxels_; }
  /// L_c over all voxels.
  std::vector<double> view(std::size_t camera) const;
  const std::vector<std::uint64_t>& event_counts() const { return counts_; }

 private:
  const Scene* scene_;
  int channel_;
  std::size_t n_cameras_;
  std::size_t n_voxels_;
  std::vector<double> camera_xyz_;
  std::vector<double> values_;  // [k * n_cameras + c]
  std::vector<std::uint64_t> counts_;
};

struct ScatterFields {
  std::vector<std::vector<double>> radiance;  // L_c per camera
  std::vector<std::uint64_t> event_counts;
  TransportStats stats;
};

/// Forward traces n_packets and caches scattered power toward every camera.
ScatterFields accumulate_scatter(const Scene& scene, int channel, std::uint64_t n_packets,
                                 std::uint64_t seed, const TransportOptions& options = {});

/// j = L / beta, and 0 where beta = 0.
std::vector<double> in_scatter_field(std::span<const double> radiance,
                                     std::span<const double> beta);

/// i = Pi (j . beta . T).
Image render(const ProjectionMatrix& projection, const Camera& camera, std::span<const double> j,
             std::span<const double> beta, std::span<const double> transmittance);

/// i = Pi (L . T).
Image render_radiance(const ProjectionMatrix& projection, const Camera& camera,
                      std::span<const double> radiance, std::span<const double> transmittance);

struct VfmcResult {
  std::vector<Image> images;
  TransportStats stats;
};

/// Full voxelized forward render of every camera for one channel.
VfmcResult render_vfmc(const Scene& scene, int channel, std::uint64_t n_packets,
                       std::uint64_t seed, std::span<const ProjectionMatrix> projections,
                       const TransportOptions& options = {});

/// Least-squares s minimizing the masked || a - s b ||^2.
double fit_scale(const Image& a, const Image& b, const PixelMask& mask);
double fit_scale(std::span<const Image> a, std::span<const Image> b,
                 std::span<const PixelMask> masks);

struct ImageAgreement {
  double scale = 0.0;        // s fitting b to a
  double correlation = 0.0;  // Pearson, a vs b
  double relative_rms = 0.0; // ||a - s b|| / ||a||
  double rms = 0.0;          // per-pixel RMS of a - s b
  std::size_t pixels = 0;
};

ImageAgreement compare_images(std::span<const Image> a, std::span<const Image> b,
                              std::span<const PixelMask> masks);

/// "row col value" lines, one per stored entry.
void write_triplets(const SparseMatrix& matrix, const std::filesystem::path& path);

}  // namespace skytomo
