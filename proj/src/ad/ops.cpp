#include "nmrl/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nmrl/kernels.hpp"

namespace nmrl::ad::ops {

namespace {

const kern::KernelTable& kt() { return kern::table(); }

[[noreturn]] void shape_fail(const char* op, const Tensor& a, const Tensor& b) {
    throw ShapeError(std::string(op) + ": shapes disagree, " + shape_str(a) + " vs " +
                     shape_str(b));
}

void require_defined(const Tensor& t, const char* op) {
    if (!t.defined()) throw ContractError(std::string(op) + ": undefined tensor");
}

} // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul");
    require_defined(b, "matmul");
    if (a.cols() != b.rows()) shape_fail("matmul", a, b);
    Tensor out = Tensor::zeros(a.rows(), b.cols());
    kt().gemm_nn(a.data(), b.data(), out.mut_data(), a.rows(), a.cols(), b.cols());
    return record("matmul", {a, b}, std::move(out),
                  [a, b](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = matmul_nt(adj, b); // adj b^T
                      if (needs[1]) g[1] = matmul_tn(a, adj); // a^T adj
                      return g;
                  });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul_nt");
    require_defined(b, "matmul_nt");
    if (a.cols() != b.cols()) shape_fail("matmul_nt", a, b);
    Tensor out = Tensor::zeros(a.rows(), b.rows());
    kt().gemm_nt(a.data(), b.data(), out.mut_data(), a.rows(), a.cols(), b.rows());
    return record("matmul_nt", {a, b}, std::move(out),
                  [a, b](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = matmul(adj, b);    // adj b
                      if (needs[1]) g[1] = matmul_tn(adj, a); // adj^T a
                      return g;
                  });
}

Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_defined(a, "matmul_tn");
    require_defined(b, "matmul_tn");
    if (a.rows() != b.rows()) shape_fail("matmul_tn", a, b);
    Tensor out = Tensor::zeros(a.cols(), b.cols());
    kt().gemm_tn(a.data(), b.data(), out.mut_data(), a.cols(), a.rows(), b.cols());
    return record("matmul_tn", {a, b}, std::move(out),
                  [a, b](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = matmul_nt(b, adj); // b adj^T
                      if (needs[1]) g[1] = matmul(a, adj);    // a adj
                      return g;
                  });
}

Tensor add(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "add");
    Tensor out = Tensor::zeros(a.rows(), a.cols());
    kt().ew_add(a.data(), b.data(), out.mut_data(), a.numel());
    return record("add", {a, b}, std::move(out),
                  [](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = adj;
                      if (needs[1]) g[1] = adj;
                      return g;
                  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "sub");
    Tensor out = Tensor::zeros(a.rows(), a.cols());
    kt().ew_sub(a.data(), b.data(), out.mut_data(), a.numel());
    return record("sub", {a, b}, std::move(out),
                  [](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = adj;
                      if (needs[1]) g[1] = scalar_mul(adj, -1.0);
                      return g;
                  });
}

Tensor ewise_mul(const Tensor& a, const Tensor& b) {
    check_same_shape(a, b, "ewise_mul");
    Tensor out = Tensor::zeros(a.rows(), a.cols());
    kt().ew_mul(a.data(), b.data(), out.mut_data(), a.numel());
    return record("ewise_mul", {a, b}, std::move(out),
                  [a, b](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = ewise_mul(adj, b);
                      if (needs[1]) g[1] = ewise_mul(adj, a);
                      return g;
                  });
}

Tensor scalar_mul(const Tensor& a, double c) {
    require_defined(a, "scalar_mul");
    Tensor out = Tensor::zeros(a.rows(), a.cols());
    kt().scale(a.data(), c, out.mut_data(), a.numel());
    return record("scalar_mul", {a}, std::move(out),
                  [c](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = scalar_mul(adj, c);
                      return g;
                  });
}

Tensor add_const(const Tensor& a, double c) {
    require_defined(a, "add_const");
    Tensor out = Tensor::zeros(a.rows(), a.cols());
    const double* x = a.data();
    double* o = out.mut_data();
    for (std::size_t i = 0; i < a.numel(); ++i) o[i] = x[i] + c;
    return record("add_const", {a}, std::move(out),
                  [](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = adj;
                      return g;
                  });
}

Tensor relu(const Tensor& x) {
    require_defined(x, "relu");
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    kt().relu(x.data(), out.mut_data(), x.numel());
    return record("relu", {x}, std::move(out),
                  [x](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) {
                          // Subgradient at 0 is 0: the mask is strict.
                          Tensor mask = Tensor::zeros(x.rows(), x.cols());
                          kt().relu_mask(x.data(), mask.mut_data(), x.numel());
                          g[0] = ewise_mul(adj, mask);
                      }
                      return g;
                  });
}

Tensor tanh(const Tensor& x) {
    require_defined(x, "tanh");
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    kern::map_tanh(x.data(), out.mut_data(), x.numel());
    Tensor saved = out;
    return record("tanh", {x}, std::move(out),
                  [saved](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      // d tanh = 1 - tanh^2, written against the saved output
                      // so a second backward sees the dependence.
                      if (needs[0])
                          g[0] = ewise_mul(adj, add_const(scalar_mul(square(saved), -1.0), 1.0));
                      return g;
                  });
}

Tensor sign_gate(const Tensor& x) {
    require_defined(x, "sign_gate");
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    const double* in = x.data();
    double* o = out.mut_data();
    // Zero maps to +1; gradient is identically zero, so the output is a
    // constant as far as the tape is concerned. In strict gating this
    // freezes W_g and W_m: no gradient ever reaches them.
    for (std::size_t i = 0; i < x.numel(); ++i) o[i] = in[i] < 0.0 ? -1.0 : 1.0;
    return out;
}

Tensor exp(const Tensor& x) {
    require_defined(x, "exp");
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    kern::map_exp(x.data(), out.mut_data(), x.numel());
    Tensor saved = out;
    return record("exp", {x}, std::move(out),
                  [saved](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = ewise_mul(adj, saved);
                      return g;
                  });
}

Tensor log(const Tensor& x) {
    require_defined(x, "log");
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    kern::map_log(x.data(), out.mut_data(), x.numel());
    return record("log", {x}, std::move(out),
                  [x](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = ewise_mul(adj, reciprocal(x));
                      return g;
                  });
}

Tensor square(const Tensor& x) {
    require_defined(x, "square");
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    kt().ew_mul(x.data(), x.data(), out.mut_data(), x.numel());
    return record("square", {x}, std::move(out),
                  [x](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = ewise_mul(adj, scalar_mul(x, 2.0));
                      return g;
                  });
}

Tensor reciprocal(const Tensor& x) {
    require_defined(x, "reciprocal");
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    const double* in = x.data();
    double* o = out.mut_data();
    for (std::size_t i = 0; i < x.numel(); ++i) o[i] = 1.0 / in[i];
    Tensor saved = out;
    return record("reciprocal", {x}, std::move(out),
                  [saved](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = ewise_mul(adj, scalar_mul(square(saved), -1.0));
                      return g;
                  });
}

Tensor clip(const Tensor& x, double lo, double hi) {
    require_defined(x, "clip");
    Tensor out = Tensor::zeros(x.rows(), x.cols());
    kt().clip(x.data(), lo, hi, out.mut_data(), x.numel());
    return record("clip", {x}, std::move(out),
                  [x, lo, hi](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) {
                          Tensor mask = Tensor::zeros(x.rows(), x.cols());
                          kt().clip_mask(x.data(), lo, hi, mask.mut_data(), x.numel());
                          g[0] = ewise_mul(adj, mask);
                      }
                      return g;
                  });
}

Tensor add_rowvec(const Tensor& a, const Tensor& v) {
    require_defined(a, "add_rowvec");
    require_defined(v, "add_rowvec");
    if (v.rows() != 1 || v.cols() != a.cols()) shape_fail("add_rowvec", a, v);
    Tensor out = Tensor::zeros(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        kt().ew_add(a.data() + i * a.cols(), v.data(), out.mut_data() + i * a.cols(), a.cols());
    return record("add_rowvec", {a, v}, std::move(out),
                  [](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = adj;
                      if (needs[1]) g[1] = colsum(adj);
                      return g;
                  });
}

Tensor mul_rowvec(const Tensor& a, const Tensor& v) {
    require_defined(a, "mul_rowvec");
    require_defined(v, "mul_rowvec");
    if (v.rows() != 1 || v.cols() != a.cols()) shape_fail("mul_rowvec", a, v);
    Tensor out = Tensor::zeros(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        kt().ew_mul(a.data() + i * a.cols(), v.data(), out.mut_data() + i * a.cols(), a.cols());
    return record("mul_rowvec", {a, v}, std::move(out),
                  [a, v](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = mul_rowvec(adj, v);
                      if (needs[1]) g[1] = colsum(ewise_mul(adj, a));
                      return g;
                  });
}

Tensor mul_colvec(const Tensor& a, const Tensor& v) {
    require_defined(a, "mul_colvec");
    require_defined(v, "mul_colvec");
    if (v.cols() != 1 || v.rows() != a.rows()) shape_fail("mul_colvec", a, v);
    Tensor out = Tensor::zeros(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        kt().scale(a.data() + i * a.cols(), v.data()[i], out.mut_data() + i * a.cols(), a.cols());
    return record("mul_colvec", {a, v}, std::move(out),
                  [a, v](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = mul_colvec(adj, v);
                      if (needs[1]) g[1] = rowsum(ewise_mul(adj, a));
                      return g;
                  });
}

Tensor broadcast_rows(const Tensor& v, std::size_t m) {
    require_defined(v, "broadcast_rows");
    if (v.rows() != 1)
        throw ShapeError("broadcast_rows: expected a row vector, got " + shape_str(v));
    Tensor out = Tensor::zeros(m, v.cols());
    for (std::size_t i = 0; i < m; ++i)
        std::copy(v.data(), v.data() + v.cols(), out.mut_data() + i * v.cols());
    return record("broadcast_rows", {v}, std::move(out),
                  [](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = colsum(adj);
                      return g;
                  });
}

Tensor broadcast_cols(const Tensor& v, std::size_t n) {
    require_defined(v, "broadcast_cols");
    if (v.cols() != 1)
        throw ShapeError("broadcast_cols: expected a column vector, got " + shape_str(v));
    Tensor out = Tensor::zeros(v.rows(), n);
    for (std::size_t i = 0; i < v.rows(); ++i)
        std::fill(out.mut_data() + i * n, out.mut_data() + (i + 1) * n, v.data()[i]);
    return record("broadcast_cols", {v}, std::move(out),
                  [](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = rowsum(adj);
                      return g;
                  });
}

Tensor broadcast_scalar(const Tensor& s, std::size_t m, std::size_t n) {
    require_defined(s, "broadcast_scalar");
    if (s.numel() != 1)
        throw ShapeError("broadcast_scalar: expected a single element, got " + shape_str(s));
    Tensor out = Tensor::full(m, n, s.data()[0]);
    return record("broadcast_scalar", {s}, std::move(out),
                  [](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = sum(adj);
                      return g;
                  });
}

Tensor sum(const Tensor& x) {
    require_defined(x, "sum");
    Tensor out = Tensor::scalar(kt().reduce_sum(x.data(), x.numel()));
    const std::size_t m = x.rows(), n = x.cols();
    return record("sum", {x}, std::move(out),
                  [m, n](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = broadcast_scalar(adj, m, n);
                      return g;
                  });
}

Tensor mean(const Tensor& x) {
    require_defined(x, "mean");
    if (x.numel() == 0) throw ContractError("mean: empty tensor");
    const double inv = 1.0 / static_cast<double>(x.numel());
    Tensor out = Tensor::scalar(kt().reduce_sum(x.data(), x.numel()) * inv);
    const std::size_t m = x.rows(), n = x.cols();
    return record("mean", {x}, std::move(out),
                  [m, n, inv](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = broadcast_scalar(scalar_mul(adj, inv), m, n);
                      return g;
                  });
}

Tensor rowsum(const Tensor& x) {
    require_defined(x, "rowsum");
    Tensor out = Tensor::zeros(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i)
        out.mut_data()[i] = kt().reduce_sum(x.data() + i * x.cols(), x.cols());
    const std::size_t n = x.cols();
    return record("rowsum", {x}, std::move(out),
                  [n](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = broadcast_cols(adj, n);
                      return g;
                  });
}

Tensor colsum(const Tensor& x) {
    require_defined(x, "colsum");
    Tensor out = Tensor::zeros(1, x.cols());
    for (std::size_t i = 0; i < x.rows(); ++i)
        kt().ew_add(out.data(), x.data() + i * x.cols(), out.mut_data(), x.cols());
    const std::size_t m = x.rows();
    return record("colsum", {x}, std::move(out),
                  [m](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = broadcast_rows(adj, m);
                      return g;
                  });
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
    require_defined(a, "concat_cols");
    require_defined(b, "concat_cols");
    if (a.rows() != b.rows()) shape_fail("concat_cols", a, b);
    const std::size_t m = a.rows(), p = a.cols(), q = b.cols();
    Tensor out = Tensor::zeros(m, p + q);
    for (std::size_t i = 0; i < m; ++i) {
        std::copy(a.data() + i * p, a.data() + (i + 1) * p, out.mut_data() + i * (p + q));
        std::copy(b.data() + i * q, b.data() + (i + 1) * q, out.mut_data() + i * (p + q) + p);
    }
    return record("concat_cols", {a, b}, std::move(out),
                  [p, q](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(2);
                      if (needs[0]) g[0] = slice_cols(adj, 0, p);
                      if (needs[1]) g[1] = slice_cols(adj, p, p + q);
                      return g;
                  });
}

Tensor slice_cols(const Tensor& x, std::size_t j0, std::size_t j1) {
    require_defined(x, "slice_cols");
    if (j0 > j1 || j1 > x.cols())
        throw ShapeError("slice_cols: range [" + std::to_string(j0) + ", " + std::to_string(j1) +
                         ") out of " + shape_str(x));
    const std::size_t m = x.rows(), w = j1 - j0, n = x.cols();
    Tensor out = Tensor::zeros(m, w);
    for (std::size_t i = 0; i < m; ++i)
        std::copy(x.data() + i * n + j0, x.data() + i * n + j1, out.mut_data() + i * w);
    return record("slice_cols", {x}, std::move(out),
                  [j0, n](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = pad_cols(adj, j0, n);
                      return g;
                  });
}

Tensor pad_cols(const Tensor& x, std::size_t j0, std::size_t n) {
    require_defined(x, "pad_cols");
    if (j0 + x.cols() > n)
        throw ShapeError("pad_cols: " + shape_str(x) + " at column " + std::to_string(j0) +
                         " does not fit in " + std::to_string(n) + " columns");
    const std::size_t m = x.rows(), w = x.cols();
    Tensor out = Tensor::zeros(m, n);
    for (std::size_t i = 0; i < m; ++i)
        std::copy(x.data() + i * w, x.data() + (i + 1) * w, out.mut_data() + i * n + j0);
    return record("pad_cols", {x}, std::move(out),
                  [j0, w](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = slice_cols(adj, j0, j0 + w);
                      return g;
                  });
}

Tensor gather_rows(const Tensor& x, const std::vector<std::size_t>& idx) {
    require_defined(x, "gather_rows");
    if (idx.size() != x.rows())
        throw ShapeError("gather_rows: " + std::to_string(idx.size()) + " indices for " +
                         shape_str(x));
    Tensor out = Tensor::zeros(x.rows(), 1);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        if (idx[i] >= x.cols())
            throw ContractError("gather_rows: index " + std::to_string(idx[i]) +
                                " out of range for " + shape_str(x));
        out.mut_data()[i] = x.data()[i * x.cols() + idx[i]];
    }
    const std::size_t n = x.cols();
    return record("gather_rows", {x}, std::move(out),
                  [idx, n](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = scatter_rows(adj, idx, n);
                      return g;
                  });
}

Tensor scatter_rows(const Tensor& v, const std::vector<std::size_t>& idx, std::size_t n) {
    require_defined(v, "scatter_rows");
    if (v.cols() != 1 || idx.size() != v.rows())
        throw ShapeError("scatter_rows: need a column vector matching the index count, got " +
                         shape_str(v) + " with " + std::to_string(idx.size()) + " indices");
    Tensor out = Tensor::zeros(v.rows(), n);
    for (std::size_t i = 0; i < v.rows(); ++i) {
        if (idx[i] >= n)
            throw ContractError("scatter_rows: index " + std::to_string(idx[i]) +
                                " out of range for " + std::to_string(n) + " columns");
        out.mut_data()[i * n + idx[i]] = v.data()[i];
    }
    return record("scatter_rows", {v}, std::move(out),
                  [idx](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      if (needs[0]) g[0] = gather_rows(adj, idx);
                      return g;
                  });
}

Tensor log_softmax_rows(const Tensor& logits) {
    require_defined(logits, "log_softmax_rows");
    if (logits.cols() == 0) throw ContractError("log_softmax_rows: zero-width rows");
    const std::size_t m = logits.rows(), n = logits.cols();
    Tensor out = Tensor::zeros(m, n);
    for (std::size_t i = 0; i < m; ++i) {
        const double* x = logits.data() + i * n;
        double* o = out.mut_data() + i * n;
        double mx = x[0];
        for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, x[j]);
        double z = 0.0;
        for (std::size_t j = 0; j < n; ++j) z += std::exp(x[j] - mx);
        const double lse = mx + std::log(z);
        for (std::size_t j = 0; j < n; ++j) o[j] = x[j] - lse;
    }
    Tensor saved = out;
    return record("log_softmax_rows", {logits}, std::move(out),
                  [saved](const Tensor& adj, const std::vector<char>& needs) {
                      std::vector<Tensor> g(1);
                      // d logits = adj - softmax * rowsum(adj)
                      if (needs[0]) g[0] = sub(adj, mul_colvec(exp(saved), rowsum(adj)));
                      return g;
                  });
}

} // namespace nmrl::ad::ops
