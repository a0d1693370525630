#pragma once

#include <cstddef>
#include <vector>

#include "nmrl/ad/tape.hpp"
#include "nmrl/ad/tensor.hpp"

// Differentiable primitives. Every op validates shapes, computes its value
// through the kernel table, and registers a VJP on the active tape. VJPs are
// themselves written in terms of these ops, which is what makes gradients
// differentiable again under grad(..., create_graph=true).
namespace nmrl::ad::ops {

// c = a b            a:[m,k] b:[k,n]
Tensor matmul(const Tensor& a, const Tensor& b);
// c = a b^T          a:[m,k] b:[n,k]
Tensor matmul_nt(const Tensor& a, const Tensor& b);
// c = a^T b          a:[k,m] b:[k,n]
Tensor matmul_tn(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor ewise_mul(const Tensor& a, const Tensor& b);
Tensor scalar_mul(const Tensor& a, double c);
Tensor add_const(const Tensor& a, double c);

Tensor relu(const Tensor& x);
Tensor tanh(const Tensor& x);
// +1 where x >= 0, -1 where x < 0; gradient identically zero, so the result
// is treated as a constant (never recorded).
Tensor sign_gate(const Tensor& x);
Tensor exp(const Tensor& x);
Tensor log(const Tensor& x);
Tensor square(const Tensor& x);
Tensor reciprocal(const Tensor& x);
// Pass-through gradient strictly inside (lo, hi), zero at and beyond the
// bounds.
Tensor clip(const Tensor& x, double lo, double hi);

// a:[m,n] combined with a row vector v:[1,n] per row.
Tensor add_rowvec(const Tensor& a, const Tensor& v);
Tensor mul_rowvec(const Tensor& a, const Tensor& v);
// a:[m,n] scaled per row by a column vector v:[m,1].
Tensor mul_colvec(const Tensor& a, const Tensor& v);

Tensor broadcast_rows(const Tensor& v, std::size_t m);              // [1,n] -> [m,n]
Tensor broadcast_cols(const Tensor& v, std::size_t n);              // [m,1] -> [m,n]
Tensor broadcast_scalar(const Tensor& s, std::size_t m, std::size_t n); // [1,1] -> [m,n]

Tensor sum(const Tensor& x);    // [1,1]
Tensor mean(const Tensor& x);   // [1,1]
Tensor rowsum(const Tensor& x); // [m,1]
Tensor colsum(const Tensor& x); // [1,n]

Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor slice_cols(const Tensor& x, std::size_t j0, std::size_t j1);
// Places x:[m,w] at column j0 of an [m,n] zero matrix.
Tensor pad_cols(const Tensor& x, std::size_t j0, std::size_t n);

// out[i,0] = x[i, idx[i]]
Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx);
// out[i, idx[i]] = v[i,0], zero elsewhere; n columns
Tensor scatter_rows(const Tensor& v, const std::vector<std::size_t>& idx, std::size_t n);

// Row-wise log softmax, numerically stabilized.
Tensor log_softmax_rows(const Tensor& logits);

} // namespace nmrl::ad::ops
