#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <string>
#include <vector>

#include "nmrl/common.hpp"

namespace nmrl::ad {

// Dense row-major matrix of doubles. Everything is 2-D: vectors are 1 x n,
// scalars 1 x 1. Storage is shared between handles and treated as immutable
// once a tensor has been consumed by a recorded op (see tape.hpp).
struct TensorData {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> v;
};

class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(std::size_t m, std::size_t n, bool requires_grad = false);
    static Tensor full(std::size_t m, std::size_t n, double value, bool requires_grad = false);
    static Tensor scalar(double value, bool requires_grad = false);
    static Tensor row(std::initializer_list<double> xs, bool requires_grad = false);
    static Tensor row(std::vector<double> xs, bool requires_grad = false);
    static Tensor matrix(std::size_t m, std::size_t n, std::vector<double> vals,
                         bool requires_grad = false);

    bool defined() const { return static_cast<bool>(d_); }
    std::size_t rows() const { return d_ ? d_->rows : 0; }
    std::size_t cols() const { return d_ ? d_->cols : 0; }
    std::size_t numel() const { return d_ ? d_->v.size() : 0; }

    double at(std::size_t i, std::size_t j) const;
    // Setup-time mutation only: never write through these once the tensor is
    // on a tape or shared across threads.
    double& mut_at(std::size_t i, std::size_t j);
    const double* data() const;
    double* mut_data();

    // Value of a single-element tensor.
    double item() const;

    bool requires_grad() const { return rg_; }
    Tensor& set_requires_grad(bool rg) {
        rg_ = rg;
        return *this;
    }

    // Same storage, grad flag dropped.
    Tensor detach() const;
    // Deep copy, grad flag dropped.
    Tensor clone() const;

    bool all_finite() const;

    const std::shared_ptr<TensorData>& ptr() const { return d_; }

private:
    std::shared_ptr<TensorData> d_;
    bool rg_ = false;
};

std::string shape_str(const Tensor& t);
void check_same_shape(const Tensor& a, const Tensor& b, const char* op);

} // namespace nmrl::ad
