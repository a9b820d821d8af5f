#pragma once

#include <cstdint>
#include <optional>

#include "lfsep/grid.hpp"
#include "lfsep/lightfield.hpp"
#include "lfsep/optics.hpp"

namespace lfsep {

/// Transmitted and reflected layer textures with their depths.
struct TextureVolume {
  Image layer_t;
  Image layer_r;
  double depth_t = 0.0;
  double depth_r = 0.0;

  /// Checks shapes against the camera's texture grid and that active layers sit at distinct depths.
  void validate(const CameraConfig& cfg) const;
};

/// Nonnegative odd-sized kernel with unit sum.
class BlurKernel {
 public:
  /// Validates; throws InvalidArgument.
  explicit BlurKernel(Image weights);

  static BlurKernel delta(int size);
  static BlurKernel box(int size);
  /// Rasterized linear motion path of `length` px at `angle_deg`, on a size x size support.
  static BlurKernel line(int size, double length, double angle_deg);

  [[nodiscard]] const Image& weights() const { return weights_; }
  [[nodiscard]] int size() const { return weights_.rows(); }
  [[nodiscard]] int radius() const { return weights_.rows() / 2; }

 private:
  Image weights_;
};

/// Sum of the L1 distances between two kernels of equal size.
double kernel_l1_distance(const BlurKernel& a, const BlurKernel& b);

/// H_d f: per-phase strided convolutions of the texture with the bank kernels.
Image apply_psf(const PsfKernelBank& bank, const Image& texture);
/// H_d^T l.
Image apply_psf_adjoint(const PsfKernelBank& bank, const Image& sensor);

/// l = H_t f_t + H_r f_r.
Image forward_model(const TextureVolume& vol, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r);

/// Circular 2D convolution with an odd square weight array (no normalization checks).
Image convolve_circular(const Image& texture, const Image& weights);
/// Adjoint of convolve_circular with respect to the texture.
Image correlate_circular(const Image& image, const Image& weights);

/// Circular 2D convolution.
Image blur_texture(const Image& texture, const BlurKernel& m);
/// Adjoint of blur_texture with respect to the texture (circular correlation).
Image blur_texture_adjoint(const Image& image, const BlurKernel& m);
/// Adjoint of blur_texture with respect to the kernel: out(k) = sum_y g(y) u(y - k),
/// on a size x size support centred at zero offset.
Image blur_kernel_adjoint(const Image& g, const Image& texture, int size);

struct ObservationOptions {
  std::optional<BlurKernel> blur_t;
  std::optional<BlurKernel> blur_r;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
};

/// Forward model of the (optionally blurred) layers plus seeded Gaussian noise, clamped at zero.
LightFieldImage simulate_observation(const TextureVolume& vol, const CameraConfig& cfg,
                                     const ObservationOptions& options = {});
/// Same with prebuilt banks at the volume's depths.
LightFieldImage simulate_observation(const TextureVolume& vol, const PsfKernelBank& bank_t,
                                     const PsfKernelBank& bank_r, const ObservationOptions& options = {});

}  // namespace lfsep
