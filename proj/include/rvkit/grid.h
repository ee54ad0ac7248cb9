#ifndef RVKIT_GRID_H_
#define RVKIT_GRID_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rvkit/error.h"

namespace rvkit {

// Row-major rows x cols x depth buffer. All per-pixel planes of the range
// image, the targets and the predictions are stored this way.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int rows, int cols, int depth = 1, T fill = T{})
      : rows_(rows),
        cols_(cols),
        depth_(depth),
        data_(static_cast<size_t>(rows) * cols * depth, fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int depth() const { return depth_; }
  int pixel_count() const { return rows_ * cols_; }
  bool empty() const { return data_.empty(); }

  T& operator()(int row, int col, int k = 0) {
    return data_[(static_cast<size_t>(row) * cols_ + col) * depth_ + k];
  }
  const T& operator()(int row, int col, int k = 0) const {
    return data_[(static_cast<size_t>(row) * cols_ + col) * depth_ + k];
  }
  // Access by row-major pixel index.
  T& at(int pixel, int k = 0) {
    return data_[static_cast<size_t>(pixel) * depth_ + k];
  }
  const T& at(int pixel, int k = 0) const {
    return data_[static_cast<size_t>(pixel) * depth_ + k];
  }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  template <typename U>
  bool SamePixels(const Grid<U>& other) const {
    return rows_ == other.rows() && cols_ == other.cols();
  }

  bool operator==(const Grid& other) const = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  int depth_ = 1;
  std::vector<T> data_;
};

template <typename A, typename B>
void RequireSamePixels(const Grid<A>& a, const Grid<B>& b,
                       const std::string& what) {
  if (!a.SamePixels(b)) {
    throw ShapeError(what + ": " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + "x" +
                     std::to_string(b.cols()));
  }
}

}  // namespace rvkit

#endif  // RVKIT_GRID_H_
