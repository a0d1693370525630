#include "nmrl/ad/tape.hpp"

#include "nmrl/ad/ops.hpp"

namespace nmrl::ad {

namespace {
thread_local Tape* g_tape = nullptr;
}

void Tape::clear() {
    nodes_.clear();
    index_.clear();
    recording_ = true;
}

int Tape::lookup(const TensorData* p) const {
    auto it = index_.find(p);
    return it == index_.end() ? -1 : it->second;
}

TapeScope::TapeScope(Tape& t) : prev_(g_tape) { g_tape = &t; }
TapeScope::~TapeScope() { g_tape = prev_; }

NoGrad::NoGrad() : tape_(g_tape) {
    if (tape_) {
        prev_ = tape_->recording_;
        tape_->recording_ = false;
    }
}

NoGrad::~NoGrad() {
    if (tape_) tape_->recording_ = prev_;
}

Tape* active_tape() { return g_tape; }

Tensor record(const char* op, std::initializer_list<Tensor> inputs, Tensor out, BackFn back) {
    Tape* tape = g_tape;
    if (!tape || !tape->recording_) return out;

    bool any = false;
    for (const Tensor& t : inputs) {
        if (t.requires_grad() || tape->lookup(t.ptr().get()) >= 0) {
            any = true;
            break;
        }
    }
    if (!any) return out;

    Tape::Node node;
    node.op = op;
    node.in.reserve(inputs.size());
    for (const Tensor& t : inputs) {
        int id = tape->lookup(t.ptr().get());
        if (id < 0 && t.requires_grad()) {
            // First use of a differentiable leaf: give it a node.
            id = static_cast<int>(tape->nodes_.size());
            tape->nodes_.push_back({"leaf", {}, t.ptr(), BackFn{}});
            tape->index_.emplace(t.ptr().get(), id);
        }
        node.in.push_back(id);
    }
    node.out = out.ptr();
    node.back = std::move(back);

    const int out_id = static_cast<int>(tape->nodes_.size());
    tape->nodes_.push_back(std::move(node));
    tape->index_.emplace(out.ptr().get(), out_id);
    out.set_requires_grad(true);
    return out;
}

std::vector<Tensor> grad(const Tensor& loss, const std::vector<Tensor>& params,
                         bool create_graph) {
    Tape* tape = g_tape;
    if (!tape) throw ContractError("grad: no active tape");
    if (loss.numel() != 1)
        throw ContractError("grad: loss must be a single element, got " + shape_str(loss));

    std::vector<Tensor> out(params.size());
    auto zeros_like = [](const Tensor& p) { return Tensor::zeros(p.rows(), p.cols()); };

    const int loss_id = tape->lookup(loss.ptr().get());
    if (loss_id < 0) {
        for (std::size_t i = 0; i < params.size(); ++i) out[i] = zeros_like(params[i]);
        return out;
    }

    const bool saved_recording = tape->recording_;
    tape->recording_ = create_graph;

    // Adjoints for the backward walk. Node ids appended during the walk (when
    // create_graph records the VJP ops) are all > loss_id and never visited.
    std::vector<Tensor> adj(static_cast<std::size_t>(loss_id) + 1);
    adj[loss_id] = Tensor::full(1, 1, 1.0);

    for (int id = loss_id; id >= 0; --id) {
        if (!adj[id].defined()) continue;
        // Copy what we need: recording new nodes may reallocate nodes_.
        std::vector<int> in = tape->nodes_[id].in;
        BackFn back = tape->nodes_[id].back;
        if (!back) continue; // leaf

        std::vector<char> needs(in.size());
        for (std::size_t i = 0; i < in.size(); ++i) needs[i] = in[i] >= 0;

        std::vector<Tensor> contribs = back(adj[id], needs);
        for (std::size_t i = 0; i < in.size(); ++i) {
            if (in[i] < 0 || i >= contribs.size() || !contribs[i].defined()) continue;
            Tensor& slot = adj[in[i]];
            slot = slot.defined() ? ops::add(slot, contribs[i]) : contribs[i];
        }
    }

    tape->recording_ = saved_recording;

    for (std::size_t i = 0; i < params.size(); ++i) {
        const int id = tape->lookup(params[i].ptr().get());
        if (id >= 0 && id <= loss_id && adj[id].defined())
            out[i] = adj[id];
        else
            out[i] = zeros_like(params[i]);
    }
    return out;
}

} // namespace nmrl::ad
