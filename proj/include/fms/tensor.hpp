#pragma once
// Dense row-major tensor. Training uses float storage; tests instantiate
// double for finite-difference gradient verification.

#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace fms {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

using Shape = std::vector<int64_t>;

inline int64_t shape_numel(const Shape& s) {
  int64_t n = 1;
  for (int64_t d : s) {
    if (d < 0) throw ShapeError("negative dimension in shape");
    n *= d;
  }
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

template <typename T>
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape) : shape_(std::move(shape)) {
    data_.assign(static_cast<size_t>(shape_numel(shape_)), T(0));
  }

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != shape_numel(shape_))
      throw ShapeError("tensor data length does not match shape " + shape_str(shape_));
  }

  static Tensor scalar(T v) { return Tensor({}, {v}); }

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }

  static Tensor full(Shape shape, T v) {
    Tensor t(std::move(shape));
    for (auto& x : t.data_) x = v;
    return t;
  }

  const Shape& shape() const { return shape_; }
  int64_t rank() const { return static_cast<int64_t>(shape_.size()); }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }
  bool is_scalar() const { return shape_.empty(); }

  int64_t dim(int64_t i) const { return shape_.at(static_cast<size_t>(i)); }

  // Rank-2 accessors (rank-1 tensors are treated as a single row).
  int64_t rows() const {
    if (rank() == 2) return shape_[0];
    if (rank() <= 1) return 1;
    throw ShapeError("rows() on tensor of rank > 2");
  }
  int64_t cols() const {
    if (rank() == 2) return shape_[1];
    if (rank() == 1) return shape_[0];
    if (rank() == 0) return 1;
    throw ShapeError("cols() on tensor of rank > 2");
  }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }

  T& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  T operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  T& at(int64_t r, int64_t c) { return data_[static_cast<size_t>(r * cols() + c)]; }
  T at(int64_t r, int64_t c) const { return data_[static_cast<size_t>(r * cols() + c)]; }

  T item() const {
    if (numel() != 1) throw ShapeError("item() on tensor with numel != 1");
    return data_[0];
  }

  void fill(T v) {
    for (auto& x : data_) x = v;
  }

  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> d(data_.size());
    for (size_t i = 0; i < data_.size(); ++i) d[i] = static_cast<U>(data_[i]);
    return Tensor<U>(shape_, std::move(d));
  }

 private:
  Shape shape_;
  std::vector<T> data_;
};

using Tensorf = Tensor<float>;
using Tensord = Tensor<double>;

}  // namespace fms
