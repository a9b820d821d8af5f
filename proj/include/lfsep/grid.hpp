#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "lfsep/errors.hpp"

namespace lfsep {

/// Integer (row, col) pair used for pixel positions, offsets and sizes.
struct Pixel {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const Pixel&, const Pixel&) = default;
  friend Pixel operator+(Pixel a, Pixel b) { return {a.row + b.row, a.col + b.col}; }
  friend Pixel operator-(Pixel a, Pixel b) { return {a.row - b.row, a.col - b.col}; }
};

/// Height/width extent in pixels (or units, depending on context).
struct Extent {
  int height = 0;
  int width = 0;

  friend auto operator<=>(const Extent&, const Extent&) = default;
  [[nodiscard]] long long area() const { return static_cast<long long>(height) * width; }
};

/// Dense row-major 2D array.
template <class T>
class Grid2 {
 public:
  Grid2() = default;
  Grid2(int rows, int cols, T value = T{}) : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0) throw InvalidArgument("Grid2: negative dimensions");
    data_.assign(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), value);
  }
  explicit Grid2(Extent e, T value = T{}) : Grid2(e.height, e.width, value) {}

  [[nodiscard]] int rows() const { return rows_; }
  [[nodiscard]] int cols() const { return cols_; }
  [[nodiscard]] Extent extent() const { return {rows_, cols_}; }
  [[nodiscard]] std::size_t size() const { return data_.size(); }
  [[nodiscard]] bool empty() const { return data_.empty(); }
  [[nodiscard]] bool contains(int r, int c) const { return r >= 0 && c >= 0 && r < rows_ && c < cols_; }

  T& operator()(int r, int c) { return data_[index(r, c)]; }
  const T& operator()(int r, int c) const { return data_[index(r, c)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  auto begin() { return data_.begin(); }
  auto end() { return data_.end(); }
  auto begin() const { return data_.begin(); }
  auto end() const { return data_.end(); }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  friend bool operator==(const Grid2&, const Grid2&) = default;

 private:
  [[nodiscard]] std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
  }

  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> data_;
};

using Image = Grid2<double>;

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) throw InvalidArgument(std::string(what) + ": shape mismatch");
}

double dot(const Image& a, const Image& b);
double sum(const Image& a);
double max_abs_diff(const Image& a, const Image& b);
/// a += alpha * b
void axpy(Image& a, double alpha, const Image& b);
Image scaled(const Image& a, double alpha);
Image operator+(const Image& a, const Image& b);
Image operator-(const Image& a, const Image& b);

/// Cyclic shift: out(r, c) = in(r - dr, c - dc) modulo the extent.
Image cyclic_shift(const Image& in, int dr, int dc);

/// Sub-window copy; the window must lie inside the image.
Image crop(const Image& in, Pixel top_left, Extent size);

}  // namespace lfsep
