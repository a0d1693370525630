#include "nmrl/ad/tensor.hpp"

#include <cmath>

namespace nmrl::ad {

Tensor Tensor::zeros(std::size_t m, std::size_t n, bool requires_grad) {
    return matrix(m, n, std::vector<double>(m * n, 0.0), requires_grad);
}

Tensor Tensor::full(std::size_t m, std::size_t n, double value, bool requires_grad) {
    return matrix(m, n, std::vector<double>(m * n, value), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
    return matrix(1, 1, {value}, requires_grad);
}

Tensor Tensor::row(std::initializer_list<double> xs, bool requires_grad) {
    return matrix(1, xs.size(), std::vector<double>(xs), requires_grad);
}

Tensor Tensor::row(std::vector<double> xs, bool requires_grad) {
    const std::size_t n = xs.size();
    return matrix(1, n, std::move(xs), requires_grad);
}

Tensor Tensor::matrix(std::size_t m, std::size_t n, std::vector<double> vals,
                      bool requires_grad) {
    if (vals.size() != m * n)
        throw ShapeError("tensor: " + std::to_string(vals.size()) + " values for shape [" +
                         std::to_string(m) + " x " + std::to_string(n) + "]");
    Tensor t;
    t.d_ = std::make_shared<TensorData>();
    t.d_->rows = m;
    t.d_->cols = n;
    t.d_->v = std::move(vals);
    t.rg_ = requires_grad;
    return t;
}

double Tensor::at(std::size_t i, std::size_t j) const {
    if (!d_ || i >= d_->rows || j >= d_->cols)
        throw ContractError("tensor: index (" + std::to_string(i) + "," + std::to_string(j) +
                            ") out of range for " + shape_str(*this));
    return d_->v[i * d_->cols + j];
}

double& Tensor::mut_at(std::size_t i, std::size_t j) {
    if (!d_ || i >= d_->rows || j >= d_->cols)
        throw ContractError("tensor: index (" + std::to_string(i) + "," + std::to_string(j) +
                            ") out of range for " + shape_str(*this));
    return d_->v[i * d_->cols + j];
}

const double* Tensor::data() const {
    if (!d_) throw ContractError("tensor: data() on undefined tensor");
    return d_->v.data();
}

double* Tensor::mut_data() {
    if (!d_) throw ContractError("tensor: mut_data() on undefined tensor");
    return d_->v.data();
}

double Tensor::item() const {
    if (numel() != 1)
        throw ContractError("tensor: item() needs a single element, got " + shape_str(*this));
    return d_->v[0];
}

Tensor Tensor::detach() const {
    Tensor t;
    t.d_ = d_;
    t.rg_ = false;
    return t;
}

Tensor Tensor::clone() const {
    if (!d_) return {};
    return matrix(d_->rows, d_->cols, d_->v, false);
}

bool Tensor::all_finite() const {
    if (!d_) return true;
    for (double x : d_->v)
        if (!std::isfinite(x)) return false;
    return true;
}

std::string shape_str(const Tensor& t) {
    if (!t.defined()) return "[undefined]";
    return "[" + std::to_string(t.rows()) + " x " + std::to_string(t.cols()) + "]";
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError(std::string(op) + ": shapes disagree, " + shape_str(a) + " vs " +
                         shape_str(b));
}

} // namespace nmrl::ad
