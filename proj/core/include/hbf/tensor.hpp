#pragma once

#include "hbf/types.hpp"

namespace hbf {

struct InputShape {
  int rows = 0;
  int cols = 0;
  int channels = 0;

  Eigen::Index size() const { return static_cast<Eigen::Index>(rows) * cols * channels; }
  bool operator==(const InputShape&) const = default;
};

/// rows x cols x channels real tensor, stored channel by channel with each
/// channel row-major: data[(c * rows + r) * cols + col].
class Tensor3 {
 public:
  Tensor3() = default;
  Tensor3(int rows, int cols, int channels);
  Tensor3(InputShape shape, RVector data);

  InputShape shape() const { return shape_; }
  int rows() const { return shape_.rows; }
  int cols() const { return shape_.cols; }
  int channels() const { return shape_.channels; }

  double& at(int r, int c, int ch) { return data_(index(r, c, ch)); }
  double at(int r, int c, int ch) const { return data_(index(r, c, ch)); }

  const RVector& data() const { return data_; }
  RVector& data() { return data_; }

 private:
  Eigen::Index index(int r, int c, int ch) const {
    return (static_cast<Eigen::Index>(ch) * shape_.rows + r) * shape_.cols + c;
  }

  InputShape shape_;
  RVector data_;
};

}  // namespace hbf
