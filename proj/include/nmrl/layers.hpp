#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nmrl/ad/ops.hpp"
#include "nmrl/ad/tensor.hpp"
#include "nmrl/rng.hpp"

namespace nmrl {

using ad::Tensor;

enum class GateMode { magnitude, strict };
enum class LayerKind { standard, neuromodulated };
enum class HeadKind { categorical, gaussian };

// Plain affine layer.
struct LinearParams {
    Tensor W; // [out, in]
    Tensor b; // [1, out]
};

// Neuromodulated layer: a standard pathway h_s gated elementwise by a
// modulatory pathway h_m computed from the same input through a bottleneck
// of nm units. In strict mode only the sign of h_m is applied, and since
// sign has zero gradient everywhere, W_g/b_g/W_m/b_m receive no updates in
// that mode.
struct NMLinearParams {
    Tensor W_s, b_s; // [out, in], [1, out]
    Tensor W_g, b_g; // [nm, in],  [1, nm]
    Tensor W_m, b_m; // [out, nm], [1, out]
    GateMode gate_mode = GateMode::magnitude;
};

struct PolicySpec {
    std::size_t input_dim = 0;   // observation features
    std::size_t context_dim = 0; // phi length
    std::vector<std::size_t> hidden_sizes{};
    std::size_t nm_size = 0; // per hidden layer, neuromodulated kind only
    LayerKind layer_kind = LayerKind::standard;
    GateMode gate_mode = GateMode::magnitude;
    HeadKind head = HeadKind::categorical;
    std::size_t head_dim = 0; // action count or action dimension
};

// theta = every network weight (hidden layers, output layer, log_std);
// phi = the context vector, concatenated to the observation each forward
// pass. The inner loop updates only phi, the outer loop only theta.
struct PolicyParams {
    std::vector<LinearParams> hidden_std;
    std::vector<NMLinearParams> hidden_nm;
    LinearParams out;
    Tensor log_std; // [1, head_dim], gaussian head only
    Tensor phi;     // [1, context_dim]

    std::vector<Tensor> theta() const;
    PolicyParams with_phi(Tensor new_phi) const;
    PolicyParams with_theta(const std::vector<Tensor>& t) const;
};

Tensor linear_forward(const Tensor& x, const LinearParams& p);
Tensor nm_forward(const Tensor& x, const NMLinearParams& p);

struct Distribution {
    HeadKind kind = HeadKind::categorical;
    Tensor log_probs; // categorical: row-wise log softmax of the logits [B, A]
    Tensor mean;      // gaussian [B, D]
    Tensor log_std;   // gaussian [1, D]
    std::size_t batch() const;
};

// Forward pass over a batch of observations: concat(obs, phi) -> hidden
// stack -> plain linear head. hidden_out, when given, receives each hidden
// layer's post-nonlinearity activations (used by the CKA analysis).
Distribution policy_forward(const Tensor& obs, const PolicyParams& params, const PolicySpec& spec,
                            std::vector<Tensor>* hidden_out = nullptr);

// Sampling consumes the rng but records nothing.
std::vector<std::size_t> sample_categorical(const Distribution& d, Rng& rng, bool greedy = false);
std::vector<std::vector<double>> sample_gaussian(const Distribution& d, Rng& rng,
                                                 bool greedy = false);

// Log probability of given actions under the distribution, differentiable
// back to theta and phi. Result is [B, 1].
Tensor log_prob_categorical(const Distribution& d, const std::vector<std::size_t>& actions);
Tensor log_prob_gaussian(const Distribution& d, const std::vector<std::vector<double>>& actions);

std::size_t count_linear(std::size_t in, std::size_t out);
std::size_t count_nm(std::size_t in, std::size_t out, std::size_t nm);
// Total over theta and phi.
std::size_t count_params(const PolicySpec& spec);

// Width for a standard-layer network of the same depth whose parameter
// count best matches the given spec's. Used to size the SPN (larger)
// control.
std::size_t solve_matched_width(const PolicySpec& spec);
PolicySpec matched_spn_spec(const PolicySpec& spec);

PolicyParams init_policy(const PolicySpec& spec, Rng& rng);

// Flat named-tensor archive, byte-stable: saving the same parameters twice
// produces identical bytes.
struct NamedTensor {
    std::string name;
    Tensor t;
};
std::vector<NamedTensor> pack_params(const PolicyParams& p, const PolicySpec& spec);
PolicyParams unpack_params(const std::vector<NamedTensor>& ts, const PolicySpec& spec);
std::string encode_tensors(const std::vector<NamedTensor>& ts);
std::vector<NamedTensor> decode_tensors(const std::string& bytes);

} // namespace nmrl
