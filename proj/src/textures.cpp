#include "lfsep/textures.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace lfsep {

Image rescale(const Image& img, double lo, double hi) {
  if (img.empty()) return img;
  const auto [mn, mx] = std::minmax_element(img.begin(), img.end());
  const double span = *mx - *mn;
  Image out(img.extent(), lo);
  if (span <= 0.0) return out;
  for (std::size_t i = 0; i < img.size(); ++i) out[i] = lo + (hi - lo) * (img[i] - *mn) / span;
  return out;
}

Image dead_leaves(Extent size, std::uint64_t seed, double r_min, double r_max) {
  if (size.height < 1 || size.width < 1 || !(r_min > 0.0) || r_max < r_min) {
    throw InvalidArgument("dead_leaves: bad parameters");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image out(size, -1.0);
  long long uncovered = size.area();
  const long long max_draws = 64 * static_cast<long long>(std::ceil(static_cast<double>(size.area()) / (r_min * r_min)));
  // Discs are drawn front to back; a pixel keeps the first disc that covers it.
  for (long long n = 0; n < max_draws && uncovered > 0; ++n) {
    const double u = unit(rng);
    const double inv2 = 1.0 / (r_min * r_min) - u * (1.0 / (r_min * r_min) - 1.0 / (r_max * r_max));
    const double radius = 1.0 / std::sqrt(inv2);
    const double cy = unit(rng) * size.height;
    const double cx = unit(rng) * size.width;
    const double value = 0.1 + 0.9 * unit(rng);
    const int r0 = std::max(0, static_cast<int>(std::floor(cy - radius)));
    const int r1 = std::min(size.height - 1, static_cast<int>(std::ceil(cy + radius)));
    const int c0 = std::max(0, static_cast<int>(std::floor(cx - radius)));
    const int c1 = std::min(size.width - 1, static_cast<int>(std::ceil(cx + radius)));
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        if (out(r, c) >= 0.0) continue;
        const double dy = r + 0.5 - cy;
        const double dx = c + 0.5 - cx;
        if (dy * dy + dx * dx <= radius * radius) {
          out(r, c) = value;
          --uncovered;
        }
      }
    }
  }
  const double background = 0.1 + 0.9 * unit(rng);
  for (double& v : out) {
    if (v < 0.0) v = background;
  }
  return out;
}

Image fractal_noise(Extent size, std::uint64_t seed, int octaves, int base_cell) {
  if (size.height < 1 || size.width < 1 || octaves < 1 || base_cell < 1) {
    throw InvalidArgument("fractal_noise: bad parameters");
  }
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Image out(size);
  double amplitude = 1.0;
  double cell = base_cell;
  for (int o = 0; o < octaves && cell >= 1.0; ++o) {
    const int gh = static_cast<int>(std::ceil(size.height / cell)) + 2;
    const int gw = static_cast<int>(std::ceil(size.width / cell)) + 2;
    Image lattice(gh, gw);
    for (double& v : lattice) v = unit(rng);
    for (int r = 0; r < size.height; ++r) {
      const double y = r / cell;
      const int y0 = static_cast<int>(y);
      const double fy = y - y0;
      const double sy = fy * fy * (3.0 - 2.0 * fy);
      for (int c = 0; c < size.width; ++c) {
        const double x = c / cell;
        const int x0 = static_cast<int>(x);
        const double fx = x - x0;
        const double sx = fx * fx * (3.0 - 2.0 * fx);
        const double top = lattice(y0, x0) * (1 - sx) + lattice(y0, x0 + 1) * sx;
        const double bottom = lattice(y0 + 1, x0) * (1 - sx) + lattice(y0 + 1, x0 + 1) * sx;
        out(r, c) += amplitude * (top * (1 - sy) + bottom * sy);
      }
    }
    amplitude *= 0.5;
    cell *= 0.5;
  }
  return rescale(out, 0.1, 1.0);
}

std::vector<Image> texture_corpus(Extent size, int count, std::uint64_t seed) {
  if (count < 1) throw InvalidArgument("texture_corpus: count must be >= 1");
  std::vector<Image> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    const std::uint64_t s = seed * 1000003ULL + static_cast<std::uint64_t>(i);
    out.push_back(i % 2 == 0 ? dead_leaves(size, s) : fractal_noise(size, s));
  }
  return out;
}

}  // namespace lfsep
