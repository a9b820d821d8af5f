#include "lfsep/operators.hpp"

#include <cmath>
#include <numbers>
#include <random>

namespace lfsep {

namespace {

bool any_nonzero(const Image& img) {
  for (double v : img) {
    if (v != 0.0) return true;
  }
  return false;
}

/// Range of cell indices n in [0, count) with 0 <= n * cell + offset < limit.
std::pair<int, int> valid_cells(int count, int cell, int offset, int limit) {
  // n * cell + offset >= 0  <=>  n >= ceil(-offset / cell)
  int lo = offset >= 0 ? 0 : (-offset + cell - 1) / cell;
  // n * cell + offset <= limit - 1
  const int top = limit - 1 - offset;
  int hi = top < 0 ? -1 : top / cell;
  lo = std::max(lo, 0);
  hi = std::min(hi, count - 1);
  return {lo, hi};
}

/// Visits every (texture index, sensor index, weight) triple of H_d.
template <class Visit>
void for_each_entry(const PsfKernelBank& bank, Visit&& visit) {
  const CameraConfig& cfg = bank.camera();
  const Extent period = bank.period();
  const Extent tex = cfg.texture_size();
  const Extent sensor = cfg.sensor_size;
  for (std::size_t p = 0; p < bank.phases().size(); ++p) {
    const PhaseKernel& pk = bank.phases()[p];
    // Cells whose texture pixel of this phase exists.
    const int cells_h = (tex.height - pk.phase.row + period.height - 1) / period.height;
    const int cells_w = (tex.width - pk.phase.col + period.width - 1) / period.width;
    for (const KernelTap& tap : bank.taps(p)) {
      const int dr = tap.offset.row;
      const int dc = tap.offset.col;
      const auto [r_lo, r_hi] = valid_cells(cells_h, cfg.unit_cell.height, dr, sensor.height);
      const auto [c_lo, c_hi] = valid_cells(cells_w, cfg.unit_cell.width, dc, sensor.width);
      for (int nr = r_lo; nr <= r_hi; ++nr) {
        const std::size_t t_row = static_cast<std::size_t>(nr * period.height + pk.phase.row) * tex.width;
        const std::size_t s_row = static_cast<std::size_t>(nr * cfg.unit_cell.height + dr) * sensor.width;
        for (int nc = c_lo; nc <= c_hi; ++nc) {
          visit(t_row + static_cast<std::size_t>(nc * period.width + pk.phase.col),
                s_row + static_cast<std::size_t>(nc * cfg.unit_cell.width + dc), tap.weight);
        }
      }
    }
  }
}

}  // namespace

void TextureVolume::validate(const CameraConfig& cfg) const {
  const Extent tex = cfg.texture_size();
  if (layer_t.extent() != tex || layer_r.extent() != tex) {
    throw InvalidArgument("TextureVolume: layers must match the camera texture grid");
  }
  for (const Image* layer : {&layer_t, &layer_r}) {
    for (double v : *layer) {
      if (!(v >= 0.0)) throw InvalidArgument("TextureVolume: layers must be nonnegative");
    }
  }
  if (!(depth_t > cfg.main_focal_length) || !(depth_r > cfg.main_focal_length)) {
    throw InvalidArgument("TextureVolume: depths must exceed the main focal length");
  }
  if (depth_t == depth_r && any_nonzero(layer_t) && any_nonzero(layer_r)) {
    throw InvalidArgument("TextureVolume: active layers must be at distinct depths");
  }
}

BlurKernel::BlurKernel(Image weights) : weights_(std::move(weights)) {
  if (weights_.rows() != weights_.cols() || weights_.rows() % 2 == 0) {
    throw InvalidArgument("BlurKernel: kernel must be square with odd size");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0)) throw InvalidArgument("BlurKernel: weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("BlurKernel: weights must sum to one");
}

BlurKernel BlurKernel::delta(int size) {
  Image w(size, size);
  if (size > 0) w(size / 2, size / 2) = 1.0;
  return BlurKernel(std::move(w));
}

BlurKernel BlurKernel::box(int size) {
  return BlurKernel(Image(size, size, 1.0 / (static_cast<double>(size) * size)));
}

BlurKernel BlurKernel::line(int size, double length, double angle_deg) {
  if (size < 1 || size % 2 == 0) throw InvalidArgument("BlurKernel::line: size must be odd");
  if (!(length >= 0.0) || length > size) throw InvalidArgument("BlurKernel::line: length must fit the support");
  Image w(size, size);
  const int centre = size / 2;
  const double theta = angle_deg * std::numbers::pi / 180.0;
  const int samples = 64 * size + 1;
  for (int i = 0; i < samples; ++i) {
    const double t = samples == 1 ? 0.0 : (static_cast<double>(i) / (samples - 1) - 0.5) * length;
    const double y = centre - t * std::sin(theta);
    const double x = centre + t * std::cos(theta);
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const double fy = y - y0;
    const double fx = x - x0;
    const double taps[4] = {(1 - fy) * (1 - fx), (1 - fy) * fx, fy * (1 - fx), fy * fx};
    const int rows[4] = {y0, y0, y0 + 1, y0 + 1};
    const int cols[4] = {x0, x0 + 1, x0, x0 + 1};
    for (int k = 0; k < 4; ++k) {
      if (w.contains(rows[k], cols[k])) w(rows[k], cols[k]) += taps[k];
    }
  }
  const double total = sum(w);
  for (double& v : w) v /= total;
  return BlurKernel(std::move(w));
}

double kernel_l1_distance(const BlurKernel& a, const BlurKernel& b) {
  require_same_shape(a.weights(), b.weights(), "kernel_l1_distance");
  double d = 0.0;
  for (std::size_t i = 0; i < a.weights().size(); ++i) d += std::abs(a.weights()[i] - b.weights()[i]);
  return d;
}

Image apply_psf(const PsfKernelBank& bank, const Image& texture) {
  const CameraConfig& cfg = bank.camera();
  if (texture.extent() != cfg.texture_size()) throw InvalidArgument("apply_psf: texture does not match the bank");
  Image out(cfg.sensor_size);
  double* o = out.data();
  const double* t = texture.data();
  for_each_entry(bank, [&](std::size_t ti, std::size_t si, double w) { o[si] += w * t[ti]; });
  return out;
}

Image apply_psf_adjoint(const PsfKernelBank& bank, const Image& sensor) {
  const CameraConfig& cfg = bank.camera();
  if (sensor.extent() != cfg.sensor_size) throw InvalidArgument("apply_psf_adjoint: image does not match the sensor");
  Image out(cfg.texture_size());
  double* o = out.data();
  const double* s = sensor.data();
  for_each_entry(bank, [&](std::size_t ti, std::size_t si, double w) { o[ti] += w * s[si]; });
  return out;
}

Image forward_model(const TextureVolume& vol, const PsfKernelBank& bank_t, const PsfKernelBank& bank_r) {
  const auto same_depth = [](double a, double b) { return std::abs(a - b) <= 1e-12 * std::max(a, b); };
  if (!same_depth(bank_t.depth(), vol.depth_t) || !same_depth(bank_r.depth(), vol.depth_r)) {
    throw InvalidArgument("forward_model: kernel banks were built for different depths");
  }
  if (!(bank_t.camera() == bank_r.camera())) throw InvalidArgument("forward_model: banks use different cameras");
  vol.validate(bank_t.camera());
  Image out = apply_psf(bank_t, vol.layer_t);
  axpy(out, 1.0, apply_psf(bank_r, vol.layer_r));
  return out;
}

Image convolve_circular(const Image& texture, const Image& weights) {
  const int h = texture.rows();
  const int w = texture.cols();
  const int k = weights.rows();
  if (weights.cols() != k || k % 2 == 0) throw InvalidArgument("convolve_circular: weights must be odd and square");
  if (k > h || k > w) throw InvalidArgument("convolve_circular: kernel larger than texture");
  const int rad = k / 2;
  Image out(h, w);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double wt = weights(i, j);
      if (wt == 0.0) continue;
      const int dr = i - rad;
      const int dc = j - rad;
      for (int r = 0; r < h; ++r) {
        const int sr = ((r - dr) % h + h) % h;
        for (int c = 0; c < w; ++c) out(r, c) += wt * texture(sr, ((c - dc) % w + w) % w);
      }
    }
  }
  return out;
}

Image correlate_circular(const Image& image, const Image& weights) {
  const int h = image.rows();
  const int w = image.cols();
  const int k = weights.rows();
  if (weights.cols() != k || k % 2 == 0) throw InvalidArgument("correlate_circular: weights must be odd and square");
  if (k > h || k > w) throw InvalidArgument("correlate_circular: kernel larger than texture");
  const int rad = k / 2;
  Image out(h, w);
  for (int i = 0; i < k; ++i) {
    for (int j = 0; j < k; ++j) {
      const double wt = weights(i, j);
      if (wt == 0.0) continue;
      const int dr = i - rad;
      const int dc = j - rad;
      for (int r = 0; r < h; ++r) {
        const int sr = ((r + dr) % h + h) % h;
        for (int c = 0; c < w; ++c) out(r, c) += wt * image(sr, ((c + dc) % w + w) % w);
      }
    }
  }
  return out;
}

Image blur_texture(const Image& texture, const BlurKernel& m) { return convolve_circular(texture, m.weights()); }

Image blur_texture_adjoint(const Image& image, const BlurKernel& m) { return correlate_circular(image, m.weights()); }

Image blur_kernel_adjoint(const Image& g, const Image& texture, int size) {
  require_same_shape(g, texture, "blur_kernel_adjoint");
  const int h = g.rows();
  const int w = g.cols();
  if (size < 1 || size % 2 == 0 || size > h || size > w) throw InvalidArgument("blur_kernel_adjoint: bad kernel size");
  const int rad = size / 2;
  Image out(size, size);
  for (int i = 0; i < size; ++i) {
    for (int j = 0; j < size; ++j) {
      const int dr = i - rad;
      const int dc = j - rad;
      double acc = 0.0;
      for (int r = 0; r < h; ++r) {
        const int sr = ((r - dr) % h + h) % h;
        for (int c = 0; c < w; ++c) acc += g(r, c) * texture(sr, ((c - dc) % w + w) % w);
      }
      out(i, j) = acc;
    }
  }
  return out;
}

LightFieldImage simulate_observation(const TextureVolume& vol, const CameraConfig& cfg,
                                     const ObservationOptions& options) {
  cfg.validate();
  vol.validate(cfg);
  return simulate_observation(vol, build_psf_bank(cfg, vol.depth_t), build_psf_bank(cfg, vol.depth_r), options);
}

LightFieldImage simulate_observation(const TextureVolume& vol, const PsfKernelBank& bank_t,
                                     const PsfKernelBank& bank_r, const ObservationOptions& options) {
  const CameraConfig& cfg = bank_t.camera();
  vol.validate(cfg);
  if (!(options.noise_sigma >= 0.0)) throw InvalidArgument("simulate_observation: noise sigma must be >= 0");
  TextureVolume blurred = vol;
  if (options.blur_t) blurred.layer_t = blur_texture(vol.layer_t, *options.blur_t);
  if (options.blur_r) blurred.layer_r = blur_texture(vol.layer_r, *options.blur_r);
  Image l = forward_model(blurred, bank_t, bank_r);
  if (options.noise_sigma > 0.0) {
    std::mt19937_64 rng(options.seed);
    std::normal_distribution<double> noise(0.0, options.noise_sigma);
    for (double& v : l) v += noise(rng);
  }
  for (double& v : l) v = std::max(v, 0.0);
  return LightFieldImage(cfg, std::move(l));
}

}  // namespace lfsep
