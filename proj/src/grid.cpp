#include "lfsep/grid.hpp"

#include <cmath>

namespace lfsep {

double dot(const Image& a, const Image& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double sum(const Image& a) {
  double s = 0.0;
  for (double v : a) s += v;
  return s;
}

double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void axpy(Image& a, double alpha, const Image& b) {
  require_same_shape(a, b, "axpy");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += alpha * b[i];
}

Image scaled(const Image& a, double alpha) {
  Image out = a;
  for (double& v : out) v *= alpha;
  return out;
}

Image operator+(const Image& a, const Image& b) {
  Image out = a;
  axpy(out, 1.0, b);
  return out;
}

Image operator-(const Image& a, const Image& b) {
  Image out = a;
  axpy(out, -1.0, b);
  return out;
}

Image cyclic_shift(const Image& in, int dr, int dc) {
  Image out(in.extent());
  const int h = in.rows();
  const int w = in.cols();
  for (int r = 0; r < h; ++r) {
    const int sr = ((r - dr) % h + h) % h;
    for (int c = 0; c < w; ++c) out(r, c) = in(sr, ((c - dc) % w + w) % w);
  }
  return out;
}

Image crop(const Image& in, Pixel top_left, Extent size) {
  if (top_left.row < 0 || top_left.col < 0 || top_left.row + size.height > in.rows() ||
      top_left.col + size.width > in.cols() || size.height < 0 || size.width < 0) {
    throw InvalidArgument("crop: window outside image");
  }
  Image out(size);
  for (int r = 0; r < size.height; ++r) {
    for (int c = 0; c < size.width; ++c) out(r, c) = in(top_left.row + r, top_left.col + c);
  }
  return out;
}

}  // namespace lfsep
