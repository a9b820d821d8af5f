#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "lfsep/grid.hpp"

namespace lfsep {

/// Geometric description of a microlens-array (plenoptic 1.0) camera.
///
/// The optical axis pierces the sensor at a unit-cell corner near the sensor
/// centre. Texture pixel (i, j) is the scene point whose chief ray through the
/// main-lens centre would reach the sensor plane at sensor-pixel coordinate
/// ((i + 0.5) * texture_downsample, (j + 0.5) * texture_downsample), so one
/// texture-phase period maps to exactly one unit cell.
struct CameraConfig {
  std::string name = "custom";
  double main_focal_length = 0.0;       // m
  double aperture_diameter = 0.0;       // m
  double mla_distance = 0.0;            // m, main lens -> microlens array
  double microlens_focal_length = 0.0;  // m
  double sensor_distance = 0.0;         // m, microlens array -> sensor
  double pixel_pitch = 0.0;             // m
  Extent unit_cell;                     // sensor px period of the microlens pattern
  int microlenses_per_cell = 1;         // 1: rectangular, 2: hexagonal super-cell
  int texture_downsample = 4;
  Extent sensor_size;                   // px
  int aperture_samples = 64;            // A, stratified A x A grid

  /// Throws InvalidArgument when an invariant is violated.
  void validate() const;

  [[nodiscard]] Extent units() const;
  [[nodiscard]] Extent texture_size() const;
  [[nodiscard]] Extent phase_period() const;
  /// Sensor pixel where the optical axis meets the sensor (a cell corner).
  [[nodiscard]] Pixel axis_pixel() const;
  /// Scene depth imaged exactly onto the microlens array.
  [[nodiscard]] double focal_conjugate_depth() const;
  /// Main-lens blur-circle diameter on the microlens plane for a point at `depth` (m).
  [[nodiscard]] double blur_diameter(double depth) const;
  /// Horizontal microlens pitch on the MLA plane (m).
  [[nodiscard]] double microlens_pitch() const;
  /// Microlens centres inside one unit cell, in sensor-pixel coordinates relative
  /// to the cell corner (projected through the main-lens centre).
  [[nodiscard]] std::vector<std::pair<double, double>> lens_centres_in_cell() const;

  /// Same optics on a sensor of `units` whole cells.
  [[nodiscard]] CameraConfig with_units(Extent units) const;

  friend bool operator==(const CameraConfig&, const CameraConfig&) = default;
};

/// Desk-scale rectangular lattice: 12x12 px cells, 3x3 texture phases, focal
/// conjugate at 0.5 m.
CameraConfig desk_camera(Extent units = {16, 16});
/// 28x16 px hexagonal super-cell with 7x4 texture phases (Lytro Illum layout).
CameraConfig reference_camera();
/// "desk" or "reference"; throws InvalidArgument otherwise.
CameraConfig camera_preset(std::string_view name);

/// Quantized scene depths, strictly increasing.
class DepthLevelSet {
 public:
  DepthLevelSet() = default;
  explicit DepthLevelSet(std::vector<double> depths);

  [[nodiscard]] const std::vector<double>& depths() const { return depths_; }
  [[nodiscard]] int size() const { return static_cast<int>(depths_.size()); }
  [[nodiscard]] double operator[](int i) const { return depths_.at(static_cast<std::size_t>(i)); }
  /// Index of the level closest in inverse depth.
  [[nodiscard]] int nearest(double depth) const;

 private:
  std::vector<double> depths_;
};

/// Levels uniform in inverse depth between d_min and d_max (both included).
DepthLevelSet make_depth_levels(double d_min, double d_max, int count);

/// Continuous scene point in texture-pixel coordinates (pixel centres at integers).
struct TexturePoint {
  double row = 0.0;
  double col = 0.0;
};

struct RayHit {
  double row = 0.0;  // continuous sensor px coordinate
  double col = 0.0;
  Pixel lens;        // microlens identifier on a half-cell lattice
};

/// Traces the stratified aperture rays of a point source directly, without any
/// cell decomposition. Hits are in absolute sensor-pixel coordinates and are
/// not clipped to the sensor.
std::vector<RayHit> trace_rays(const CameraConfig& cfg, TexturePoint point, double depth);

/// Sparse window of a sensor image: `values` placed at `top_left`.
struct SensorPatch {
  Pixel top_left;
  Image values;

  [[nodiscard]] Image to_dense(Extent sensor) const;
  [[nodiscard]] double total() const;
};

/// Point-source footprint (a column of H_d), normalized to unit mass before
/// sensor clipping, scaled by `weight`. Throws EmptyFootprint if no ray lands
/// on the sensor.
SensorPatch trace_point_psf(const CameraConfig& cfg, TexturePoint point, double depth, double weight = 1.0);

/// Kernel of one texture phase. A texture pixel q = n * period + phase has its
/// kernel top-left at n * unit_cell + anchor on the sensor.
struct PhaseKernel {
  Pixel phase;
  Pixel anchor;
  Image kernel;
};

/// Nonzero kernel entry; `offset` is relative to the cell corner of the texture pixel.
struct KernelTap {
  Pixel offset;
  double weight = 0.0;
};

/// Depth-dependent PSF realized as one small kernel per texture phase.
class PsfKernelBank {
 public:
  PsfKernelBank(CameraConfig camera, double depth, std::vector<PhaseKernel> phases);

  [[nodiscard]] const CameraConfig& camera() const { return camera_; }
  [[nodiscard]] double depth() const { return depth_; }
  [[nodiscard]] Extent period() const { return period_; }
  [[nodiscard]] const std::vector<PhaseKernel>& phases() const { return phases_; }
  [[nodiscard]] const PhaseKernel& kernel_for(Pixel phase) const;
  /// Nonzero entries of phases()[i], row-major.
  [[nodiscard]] const std::vector<KernelTap>& taps(std::size_t i) const { return taps_.at(i); }

 private:
  CameraConfig camera_;
  double depth_;
  Extent period_;
  std::vector<PhaseKernel> phases_;
  std::vector<std::vector<KernelTap>> taps_;
};

PsfKernelBank build_psf_bank(const CameraConfig& cfg, double depth);

/// Full-size sensor image of the column of H_d for texture pixel q.
Image dense_column(const PsfKernelBank& bank, Pixel q);

/// Number of distinct microlenses reached by a point source.
int footprint_lens_count(const CameraConfig& cfg, TexturePoint point, double depth);

}  // namespace lfsep
