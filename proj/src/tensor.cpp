#include "stan/tensor.hpp"

#include <algorithm>
#include <cmath>

#include "stan/error.hpp"
#include "stan/kernels.hpp"

namespace stan {

Tensor::Tensor(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Tensor::Tensor(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows * cols) {
    throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                     " does not match shape " + shape_string());
  }
}

Tensor Tensor::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r == 0 ? 0 : rows.begin()->size();
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeError("ragged row list");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Tensor(r, c, std::move(data));
}

Tensor Tensor::identity(std::size_t n) {
  Tensor t(n, n);
  for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
  return t;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

std::string Tensor::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

namespace {

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() +
                     " vs " + b.shape_string());
  }
}

void require_inner(std::size_t lhs, std::size_t rhs, const Tensor& a,
                   const Tensor& b, const char* op) {
  if (lhs != rhs) {
    throw ShapeError(std::string(op) + ": inner dimensions differ, " +
                     a.shape_string() + " and " + b.shape_string());
  }
}

void require_out(const Tensor& out, std::size_t r, std::size_t c,
                 const char* op) {
  if (out.rows() != r || out.cols() != c) {
    throw ShapeError(std::string(op) + ": output is " + out.shape_string() +
                     ", expected " + std::to_string(r) + "x" +
                     std::to_string(c));
  }
}

void gemm(const Tensor& a, const Tensor& b, Tensor& out, bool accumulate) {
  if (out.empty()) return;
  if (a.cols() == 0) {
    if (!accumulate) out.fill(0.0);
    return;
  }
  kernels::active().gemm(a.rows(), b.cols(), a.cols(), a.raw(), a.cols(),
                         b.raw(), b.cols(), out.raw(), out.cols(), accumulate);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_inner(a.cols(), b.rows(), a, b, "matmul");
  Tensor out(a.rows(), b.cols());
  gemm(a, b, out, false);
  return out;
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
  require_inner(a.rows(), b.rows(), a, b, "matmul_tn");
  Tensor out(a.cols(), b.cols());
  gemm(transpose(a), b, out, false);
  return out;
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
  require_inner(a.cols(), b.cols(), a, b, "matmul_nt");
  Tensor out(a.rows(), b.rows());
  gemm(a, transpose(b), out, false);
  return out;
}

void add_matmul(Tensor& out, const Tensor& a, const Tensor& b) {
  require_inner(a.cols(), b.rows(), a, b, "add_matmul");
  require_out(out, a.rows(), b.cols(), "add_matmul");
  gemm(a, b, out, true);
}

void add_matmul_tn(Tensor& out, const Tensor& a, const Tensor& b) {
  require_inner(a.rows(), b.rows(), a, b, "add_matmul_tn");
  require_out(out, a.cols(), b.cols(), "add_matmul_tn");
  gemm(transpose(a), b, out, true);
}

void add_matmul_nt(Tensor& out, const Tensor& a, const Tensor& b) {
  require_inner(a.cols(), b.cols(), a, b, "add_matmul_nt");
  require_out(out, a.rows(), b.rows(), "add_matmul_nt");
  gemm(a, transpose(b), out, true);
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    for (std::size_t c = 0; c < a.cols(); ++c) out(c, r) = a(r, c);
  }
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
  return out;
}

Tensor hadamard(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "hadamard");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

Tensor scaled(const Tensor& a, double factor) {
  Tensor out = a;
  for (double& v : out.data()) v *= factor;
  return out;
}

void add_inplace(Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "add_inplace");
  for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
}

Tensor softmax_rows(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto in = a.row(r);
    auto o = out.row(r);
    if (in.empty()) continue;
    const double mx = *std::max_element(in.begin(), in.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < in.size(); ++c) {
      o[c] = std::exp(in[c] - mx);
      sum += o[c];
    }
    const double inv = 1.0 / sum;
    for (double& v : o) v *= inv;
  }
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (b.cols() == 0 && (b.rows() == a.rows() || b.rows() == 0)) return a;
  if (a.cols() == 0 && (a.rows() == b.rows() || a.rows() == 0)) return b;
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row counts differ, " + a.shape_string() +
                     " and " + b.shape_string());
  }
  Tensor out(a.rows(), a.cols() + b.cols());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto o = out.row(r);
    std::copy(a.row(r).begin(), a.row(r).end(), o.begin());
    std::copy(b.row(r).begin(), b.row(r).end(), o.begin() + a.cols());
  }
  return out;
}

Tensor concat_cols(std::span<const Tensor> parts) {
  if (parts.empty()) return Tensor();
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      throw ShapeError("concat_cols: row counts differ, " +
                       parts.front().shape_string() + " and " +
                       p.shape_string());
    }
    cols += p.cols();
  }
  Tensor out(rows, cols);
  for (std::size_t r = 0; r < rows; ++r) {
    auto o = out.row(r).begin();
    for (const auto& p : parts) o = std::copy(p.row(r).begin(), p.row(r).end(), o);
  }
  return out;
}

Tensor slice_cols(const Tensor& a, std::size_t begin, std::size_t count) {
  if (begin + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") out of range for " +
                     a.shape_string());
  }
  Tensor out(a.rows(), count);
  for (std::size_t r = 0; r < a.rows(); ++r) {
    const auto in = a.row(r);
    std::copy(in.begin() + begin, in.begin() + begin + count,
              out.row(r).begin());
  }
  return out;
}

Tensor activate(const Tensor& a, Activation kind) {
  Tensor out = a;
  if (kind == Activation::Tanh) {
    for (double& v : out.data()) v = std::tanh(v);
  } else {
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
  }
  return out;
}

bool all_finite(const Tensor& a) {
  return std::all_of(a.data().begin(), a.data().end(),
                     [](double v) { return std::isfinite(v); });
}

}  // namespace stan
