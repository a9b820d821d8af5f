#pragma once

#include <vector>

#include "lfsep/grid.hpp"
#include "lfsep/optics.hpp"

namespace lfsep {

/// Raw sensor mosaic, one plane per colour channel.
class LightFieldImage {
 public:
  LightFieldImage() = default;
  LightFieldImage(CameraConfig camera, std::vector<Image> planes);
  LightFieldImage(CameraConfig camera, Image plane);

  [[nodiscard]] const CameraConfig& camera() const { return camera_; }
  [[nodiscard]] int channels() const { return static_cast<int>(planes_.size()); }
  [[nodiscard]] const Image& plane(int c) const { return planes_.at(static_cast<std::size_t>(c)); }
  [[nodiscard]] Image& plane(int c) { return planes_.at(static_cast<std::size_t>(c)); }
  [[nodiscard]] const std::vector<Image>& planes() const { return planes_; }
  [[nodiscard]] Extent extent() const { return camera_.sensor_size; }

 private:
  CameraConfig camera_;
  std::vector<Image> planes_;
};

/// Default border radius factor: keeps 296 of the 448 positions of the 28x16
/// hexagonal super-cell.
inline constexpr double kBorderRadiusFactor = 0.86;

/// Intra-cell offsets kept as views, in row-major order. An offset is kept when
/// its pixel centre lies within rho * min(cell)/2 of the nearest microlens centre.
std::vector<Pixel> kept_positions(const CameraConfig& cfg, double rho = kBorderRadiusFactor);

/// units_h x units_w x (V*C) array; channel k holds view k % V of colour k / V.
class ViewTensor {
 public:
  ViewTensor() = default;
  ViewTensor(int units_h, int units_w, std::vector<Pixel> kept, int colours);

  [[nodiscard]] int units_h() const { return units_h_; }
  [[nodiscard]] int units_w() const { return units_w_; }
  [[nodiscard]] int depth() const { return static_cast<int>(kept_.size()) * colours_; }
  [[nodiscard]] int views() const { return static_cast<int>(kept_.size()); }
  [[nodiscard]] int colours() const { return colours_; }
  [[nodiscard]] const std::vector<Pixel>& kept_positions() const { return kept_; }

  double& at(int i, int j, int k) { return data_[index(i, j, k)]; }
  [[nodiscard]] double at(int i, int j, int k) const { return data_[index(i, j, k)]; }
  [[nodiscard]] const std::vector<double>& data() const { return data_; }

  friend bool operator==(const ViewTensor&, const ViewTensor&) = default;

 private:
  [[nodiscard]] std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(i) * static_cast<std::size_t>(units_w_) + static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(depth()) +
           static_cast<std::size_t>(k);
  }

  int units_h_ = 0;
  int units_w_ = 0;
  int colours_ = 0;
  std::vector<Pixel> kept_;
  std::vector<double> data_;
};

ViewTensor rearrange_views(const LightFieldImage& lf, double rho = kBorderRadiusFactor);

/// Inverse of rearrange_views: a mosaic whose kept pixels come from the tensor
/// and whose border pixels are zero.
LightFieldImage scatter_views(const ViewTensor& vt, const CameraConfig& cfg);

ViewTensor extract_patch(const ViewTensor& vt, Pixel top_left_unit, int p);

/// Crops whole units from a mosaic.
LightFieldImage crop_units(const LightFieldImage& lf, Pixel top_left_unit, Extent units);

}  // namespace lfsep
