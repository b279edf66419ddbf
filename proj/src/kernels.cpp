#include "metasre/kernels.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "metasre/error.hpp"

namespace metasre::kernels {

namespace {

void check_matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::ShapeError, "matmul [" + std::to_string(a.rows()) + "x" +
                                    std::to_string(a.cols()) + "] * [" +
                                    std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + "]");
  }
}

inline void matmul_row(const Tensor& a, const Tensor& b, Tensor& out, std::size_t i) {
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  double* row = out.data() + i * n;
  const double* arow = a.data() + i * inner;
  for (std::size_t k = 0; k < inner; ++k) {
    const double aik = arow[k];
    const double* brow = b.data() + k * n;
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) row[j] += aik * brow[j];
  }
}

inline void softmax_row(const double* in, double* out, std::size_t n) {
  double mx = in[0];
  for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, in[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    out[j] = std::exp(in[j] - mx);
    total += out[j];
  }
  for (std::size_t j = 0; j < n; ++j) out[j] /= total;
}

}  // namespace

Tensor matmul_serial(const Tensor& a, const Tensor& b) {
  check_matmul(a, b);
  Tensor out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, out, i);
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_matmul(a, b);
  Tensor out(a.rows(), b.cols());
  const auto rows = static_cast<std::int64_t>(a.rows());
  const bool big = a.rows() * a.cols() * b.cols() >= kParallelWorkThreshold;
#pragma omp parallel for schedule(static) if (big)
  for (std::int64_t i = 0; i < rows; ++i) matmul_row(a, b, out, static_cast<std::size_t>(i));
  return out;
}

Tensor tanh_serial(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::tanh(a[i]);
  return out;
}

Tensor tanh(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  const auto n = static_cast<std::int64_t>(a.size());
#pragma omp parallel for schedule(static) if (a.size() >= kParallelWorkThreshold)
  for (std::int64_t i = 0; i < n; ++i) out[i] = std::tanh(a[i]);
  return out;
}

Tensor softmax_rows_serial(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  if (a.cols() == 0) return out;
  for (std::size_t i = 0; i < a.rows(); ++i) {
    softmax_row(a.data() + i * a.cols(), out.data() + i * a.cols(), a.cols());
  }
  return out;
}

Tensor softmax_rows(const Tensor& a) {
  Tensor out(a.rows(), a.cols());
  if (a.cols() == 0) return out;
  const auto rows = static_cast<std::int64_t>(a.rows());
#pragma omp parallel for schedule(static) if (a.size() >= kParallelWorkThreshold)
  for (std::int64_t i = 0; i < rows; ++i) {
    const auto r = static_cast<std::size_t>(i);
    softmax_row(a.data() + r * a.cols(), out.data() + r * a.cols(), a.cols());
  }
  return out;
}

Tensor transpose(const Tensor& a) {
  Tensor out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  }
  return out;
}

}  // namespace metasre::kernels
