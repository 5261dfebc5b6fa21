#include "hbf/tensor.hpp"

namespace hbf {

Tensor3::Tensor3(int rows, int cols, int channels) : shape_{rows, cols, channels} {
  if (rows < 1 || cols < 1 || channels < 1) {
    throw std::invalid_argument("Tensor3: dimensions must be positive");
  }
  data_ = RVector::Zero(shape_.size());
}

Tensor3::Tensor3(InputShape shape, RVector data) : shape_(shape), data_(std::move(data)) {
  if (shape.rows < 1 || shape.cols < 1 || shape.channels < 1) {
    throw std::invalid_argument("Tensor3: dimensions must be positive");
  }
  if (data_.size() != shape_.size()) {
    throw std::invalid_argument("Tensor3: data length does not match shape");
  }
}

}  // namespace hbf
