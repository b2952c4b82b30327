#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace stan {

/// Dense row-major 2-D array of doubles.
///
/// Zero-sized extents are allowed so that an empty tensor can act as the
/// identity of concat_cols; every other operation expects positive extents.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Throws ShapeError unless data.size() == rows * cols.
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> data);

  /// Builds a tensor from nested row lists, e.g. {{1, 2}, {3, 4}}.
  static Tensor from_rows(
      std::initializer_list<std::initializer_list<double>> rows);
  static Tensor identity(std::size_t n);
  static Tensor zeros_like(const Tensor& other) {
    return Tensor(other.rows_, other.cols_);
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  std::span<double> row(std::size_t r) {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  void fill(double value);

  /// "rows×cols", used in error messages.
  std::string shape_string() const;

  /// Bitwise element equality plus equal shape.
  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class Activation { Tanh, Relu };

// All operations below are pure and throw ShapeError on incompatible shapes.

Tensor matmul(const Tensor& a, const Tensor& b);
/// aᵀ · b
Tensor matmul_tn(const Tensor& a, const Tensor& b);
/// a · bᵀ
Tensor matmul_nt(const Tensor& a, const Tensor& b);

/// out += a · b
void add_matmul(Tensor& out, const Tensor& a, const Tensor& b);
/// out += aᵀ · b
void add_matmul_tn(Tensor& out, const Tensor& a, const Tensor& b);
/// out += a · bᵀ
void add_matmul_nt(Tensor& out, const Tensor& a, const Tensor& b);

Tensor transpose(const Tensor& a);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor hadamard(const Tensor& a, const Tensor& b);
Tensor scaled(const Tensor& a, double factor);
/// a += b
void add_inplace(Tensor& a, const Tensor& b);

/// Row-wise softmax with per-row max subtraction.
Tensor softmax_rows(const Tensor& a);

/// Columns of a followed by columns of b. An operand with zero columns is
/// the identity.
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_cols(std::span<const Tensor> parts);
/// Columns [begin, begin + count) of a.
Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count);

Tensor activate(const Tensor& a, Activation kind);

bool all_finite(const Tensor& a);

}  // namespace stan
