#pragma once

#include <functional>
#include <unordered_map>
#include <vector>

#include "nmrl/ad/tensor.hpp"

namespace nmrl::ad {

// VJP callback of one recorded primitive: given the adjoint of the output
// and a mask of which inputs need gradients, return one adjoint per input
// (undefined where the mask is false). Implemented in terms of the public
// ops so that backward passes themselves can be recorded (create_graph).
using BackFn =
    std::function<std::vector<Tensor>(const Tensor& adj, const std::vector<char>& needs)>;

// Recorded computation: an append-only list of primitives in execution
// order plus an identity map from tensor storage to node id. Tensors are
// identified by storage address, so a parameter used twice accumulates both
// adjoint contributions; the tape keeps the storage alive to make that
// identity stable. One tape per logical thread.
class Tape {
public:
    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    std::size_t size() const { return nodes_.size(); }
    bool recording() const { return recording_; }
    void clear();

private:
    struct Node {
        const char* op;
        std::vector<int> in; // node ids; -1 marks a constant input
        std::shared_ptr<TensorData> out;
        BackFn back; // empty for leaves
    };

    int lookup(const TensorData* p) const;

    std::vector<Node> nodes_;
    std::unordered_map<const TensorData*, int> index_;
    bool recording_ = true;

    friend class TapeScope;
    friend class NoGrad;
    friend Tensor record(const char* op, std::initializer_list<Tensor> inputs, Tensor out,
                         BackFn back);
    friend std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& params,
                                    bool create_graph);
};

// Installs a tape as the active record for the current thread.
class TapeScope {
public:
    explicit TapeScope(Tape& t);
    ~TapeScope();
    TapeScope(const TapeScope&) = delete;
    TapeScope& operator=(const TapeScope&) = delete;

private:
    Tape* prev_;
};

// Pauses recording on the active tape (no-op without one). Used around
// rollouts and other value-only computation inside a taped region.
class NoGrad {
public:
    NoGrad();
    ~NoGrad();
    NoGrad(const NoGrad&) = delete;
    NoGrad& operator=(const NoGrad&) = delete;

private:
    Tape* tape_;
    bool prev_ = false;
};

Tape* active_tape();

// d loss / d param for each param. loss must be a single element. Walks the
// active tape in reverse; with create_graph the backward ops are recorded
// too, making the returned gradients differentiable (needed for the outer
// loop's gradient through the inner update). Params the loss never touched
// get zero tensors.
std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& params,
                         bool create_graph = false);

// Appends one primitive to the active tape and returns `out` (flagged as
// requiring grad when the op is recorded). Without an active recording
// tape, or when no input carries grad, this is just a pass-through. For the
// ops library, not for end users.
Tensor record(const char* op, std::initializer_list<Tensor> inputs, Tensor out, BackFn back);

} // namespace nmrl::ad
