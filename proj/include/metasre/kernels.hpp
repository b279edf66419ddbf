#pragma once

#include "metasre/tensor.hpp"

// Dense kernels behind the autodiff primitives. Each kernel has an OpenMP
// version used by the library and a serial reference kept for tests and the
// benchmark. Both accumulate every output element in the same order, so
// their results are bitwise identical regardless of thread count.
namespace metasre::kernels {

/// Below this many multiply-adds the parallel kernels run inline.
inline constexpr std::size_t kParallelWorkThreshold = 1 << 14;

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor matmul_serial(const Tensor& a, const Tensor& b);

Tensor tanh(const Tensor& a);
Tensor tanh_serial(const Tensor& a);

Tensor softmax_rows(const Tensor& a);
Tensor softmax_rows_serial(const Tensor& a);

Tensor transpose(const Tensor& a);

}  // namespace metasre::kernels
