#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

#include "debulk/error.hpp"

namespace debulk {

/// Row-major 2D array indexed (col, row). Column index runs along +x, row along +y.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(std::size_t cols, std::size_t rows, const T& fill = T{})
      : cols_(cols), rows_(rows), data_(cols * rows, fill) {}

  std::size_t cols() const { return cols_; }
  std::size_t rows() const { return rows_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(long c, long r) const {
    return c >= 0 && r >= 0 && static_cast<std::size_t>(c) < cols_ &&
           static_cast<std::size_t>(r) < rows_;
  }

  T& operator()(std::size_t c, std::size_t r) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t c, std::size_t r) const { return data_[r * cols_ + c]; }

  T& at(std::size_t c, std::size_t r) {
    if (c >= cols_ || r >= rows_) throw Error("grid index out of range");
    return (*this)(c, r);
  }
  const T& at(std::size_t c, std::size_t r) const {
    if (c >= cols_ || r >= rows_) throw Error("grid index out of range");
    return (*this)(c, r);
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  bool operator==(const Grid& o) const {
    return cols_ == o.cols_ && rows_ == o.rows_ && data_ == o.data_;
  }

 private:
  std::size_t cols_ = 0;
  std::size_t rows_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

}  // namespace debulk
