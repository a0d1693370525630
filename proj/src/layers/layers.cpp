#include "nmrl/layers.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <stdexcept>

namespace nmrl {

namespace ops = ad::ops;

std::vector<Tensor> PolicyParams::theta() const {
    std::vector<Tensor> t;
    for (const auto& l : hidden_std) {
        t.push_back(l.W);
        t.push_back(l.b);
    }
    for (const auto& l : hidden_nm) {
        t.push_back(l.W_s);
        t.push_back(l.b_s);
        t.push_back(l.W_g);
        t.push_back(l.b_g);
        t.push_back(l.W_m);
        t.push_back(l.b_m);
    }
    t.push_back(out.W);
    t.push_back(out.b);
    if (log_std.defined()) t.push_back(log_std);
    return t;
}

PolicyParams PolicyParams::with_phi(Tensor new_phi) const {
    PolicyParams p = *this;
    p.phi = std::move(new_phi);
    return p;
}

PolicyParams PolicyParams::with_theta(const std::vector<Tensor>& t) const {
    PolicyParams p = *this;
    std::size_t k = 0;
    auto next = [&]() -> Tensor {
        if (k >= t.size()) throw ContractError("with_theta: too few tensors");
        return t[k++];
    };
    for (auto& l : p.hidden_std) {
        l.W = next();
        l.b = next();
    }
    for (auto& l : p.hidden_nm) {
        l.W_s = next();
        l.b_s = next();
        l.W_g = next();
        l.b_g = next();
        l.W_m = next();
        l.b_m = next();
    }
    p.out.W = next();
    p.out.b = next();
    if (p.log_std.defined()) p.log_std = next();
    if (k != t.size()) throw ContractError("with_theta: too many tensors");
    return p;
}

Tensor linear_forward(const Tensor& x, const LinearParams& p) {
    if (x.cols() != p.W.cols())
        throw ShapeError("linear_forward: input " + ad::shape_str(x) + " vs weight " +
                         ad::shape_str(p.W));
    return ops::add_rowvec(ops::matmul_nt(x, p.W), p.b);
}

Tensor nm_forward(const Tensor& x, const NMLinearParams& p) {
    if (x.cols() != p.W_s.cols())
        throw ShapeError("nm_forward: input " + ad::shape_str(x) + " vs W_s " +
                         ad::shape_str(p.W_s));
    Tensor h_s = ops::add_rowvec(ops::matmul_nt(x, p.W_s), p.b_s);
    Tensor g = ops::relu(ops::add_rowvec(ops::matmul_nt(x, p.W_g), p.b_g));
    Tensor h_m = ops::tanh(ops::add_rowvec(ops::matmul_nt(g, p.W_m), p.b_m));
    Tensor gate = p.gate_mode == GateMode::strict ? ops::sign_gate(h_m) : h_m;
    return ops::relu(ops::ewise_mul(h_s, gate));
}

std::size_t Distribution::batch() const {
    return kind == HeadKind::categorical ? log_probs.rows() : mean.rows();
}

namespace {

void check_policy(const Tensor& obs, const PolicyParams& params, const PolicySpec& spec) {
    if (obs.cols() != spec.input_dim)
        throw ShapeError("policy_forward: observation width " + std::to_string(obs.cols()) +
                         " does not match spec input_dim " + std::to_string(spec.input_dim));
    if (params.phi.rows() != 1 || params.phi.cols() != spec.context_dim)
        throw ConfigError("policy_forward: phi " + ad::shape_str(params.phi) +
                          " does not match context_dim " + std::to_string(spec.context_dim));
    const std::size_t n_hidden = spec.hidden_sizes.size();
    if (spec.layer_kind == LayerKind::standard) {
        if (params.hidden_std.size() != n_hidden || !params.hidden_nm.empty())
            throw ConfigError("policy_forward: params do not match standard layer spec");
    } else {
        if (params.hidden_nm.size() != n_hidden || !params.hidden_std.empty())
            throw ConfigError("policy_forward: params do not match neuromodulated layer spec");
    }
    if (spec.head == HeadKind::gaussian && !params.log_std.defined())
        throw ConfigError("policy_forward: gaussian head needs log_std");
}

} // namespace

Distribution policy_forward(const Tensor& obs, const PolicyParams& params, const PolicySpec& spec,
                            std::vector<Tensor>* hidden_out) {
    check_policy(obs, params, spec);
    Tensor h = spec.context_dim > 0
                   ? ops::concat_cols(obs, ops::broadcast_rows(params.phi, obs.rows()))
                   : obs;
    for (std::size_t i = 0; i < spec.hidden_sizes.size(); ++i) {
        h = spec.layer_kind == LayerKind::standard
                ? ops::relu(linear_forward(h, params.hidden_std[i]))
                : nm_forward(h, params.hidden_nm[i]);
        if (hidden_out) hidden_out->push_back(h);
    }
    Tensor z = linear_forward(h, params.out);

    Distribution d;
    d.kind = spec.head;
    if (spec.head == HeadKind::categorical) {
        d.log_probs = ops::log_softmax_rows(z);
    } else {
        d.mean = z;
        d.log_std = params.log_std;
    }
    return d;
}

std::vector<std::size_t> sample_categorical(const Distribution& d, Rng& rng, bool greedy) {
    if (d.kind != HeadKind::categorical)
        throw ContractError("sample_categorical: not a categorical distribution");
    const std::size_t B = d.log_probs.rows(), A = d.log_probs.cols();
    std::vector<std::size_t> actions(B);
    for (std::size_t i = 0; i < B; ++i) {
        const double* lp = d.log_probs.data() + i * A;
        if (greedy) {
            std::size_t best = 0;
            for (std::size_t j = 1; j < A; ++j)
                if (lp[j] > lp[best]) best = j;
            actions[i] = best;
            continue;
        }
        const double u = rng.uniform();
        double cum = 0.0;
        std::size_t pick = A - 1; // fall through to the last bin on rounding
        for (std::size_t j = 0; j < A; ++j) {
            cum += std::exp(lp[j]);
            if (u < cum) {
                pick = j;
                break;
            }
        }
        actions[i] = pick;
    }
    return actions;
}

std::vector<std::vector<double>> sample_gaussian(const Distribution& d, Rng& rng, bool greedy) {
    if (d.kind != HeadKind::gaussian)
        throw ContractError("sample_gaussian: not a gaussian distribution");
    const std::size_t B = d.mean.rows(), D = d.mean.cols();
    std::vector<std::vector<double>> actions(B, std::vector<double>(D));
    for (std::size_t i = 0; i < B; ++i)
        for (std::size_t j = 0; j < D; ++j) {
            const double mu = d.mean.data()[i * D + j];
            actions[i][j] = greedy ? mu : mu + std::exp(d.log_std.data()[j]) * rng.normal();
        }
    return actions;
}

Tensor log_prob_categorical(const Distribution& d, const std::vector<std::size_t>& actions) {
    if (d.kind != HeadKind::categorical)
        throw ContractError("log_prob_categorical: not a categorical distribution");
    if (actions.size() != d.log_probs.rows())
        throw ContractError("log_prob_categorical: " + std::to_string(actions.size()) +
                            " actions for a batch of " + std::to_string(d.log_probs.rows()));
    for (std::size_t i = 0; i < actions.size(); ++i)
        if (actions[i] >= d.log_probs.cols())
            throw ContractError("log_prob_categorical: action " + std::to_string(actions[i]) +
                                " out of range at row " + std::to_string(i));
    return ops::gather_rows(d.log_probs, actions);
}

Tensor log_prob_gaussian(const Distribution& d, const std::vector<std::vector<double>>& actions) {
    if (d.kind != HeadKind::gaussian)
        throw ContractError("log_prob_gaussian: not a gaussian distribution");
    const std::size_t B = d.mean.rows(), D = d.mean.cols();
    if (actions.size() != B)
        throw ShapeError("log_prob_gaussian: " + std::to_string(actions.size()) +
                         " actions for batch " + std::to_string(B));
    std::vector<double> flat(B * D);
    for (std::size_t i = 0; i < B; ++i) {
        if (actions[i].size() != D)
            throw ShapeError("log_prob_gaussian: action " + std::to_string(i) + " has " +
                             std::to_string(actions[i].size()) + " dims, expected " +
                             std::to_string(D));
        std::copy(actions[i].begin(), actions[i].end(), flat.begin() + i * D);
    }
    Tensor a = Tensor::matrix(B, D, std::move(flat));
    // z = (a - mean) / sigma, log p = -0.5 sum z^2 - sum log sigma - D/2 log(2 pi)
    Tensor inv_sigma = ops::exp(ops::scalar_mul(d.log_std, -1.0));
    Tensor z = ops::mul_rowvec(ops::sub(a, d.mean), inv_sigma);
    Tensor lp = ops::scalar_mul(ops::rowsum(ops::square(z)), -0.5);
    lp = ops::sub(lp, ops::broadcast_scalar(ops::sum(d.log_std), B, 1));
    constexpr double half_log_2pi = 0.91893853320467274178; // 0.5 log(2 pi)
    return ops::add_const(lp, -half_log_2pi * static_cast<double>(D));
}

std::size_t count_linear(std::size_t in, std::size_t out) { return out * in + out; }

std::size_t count_nm(std::size_t in, std::size_t out, std::size_t nm) {
    return (out * in + out) + (nm * in + nm) + (out * nm + out);
}

std::size_t count_params(const PolicySpec& spec) {
    std::size_t total = spec.context_dim;
    std::size_t in = spec.input_dim + spec.context_dim;
    for (std::size_t h : spec.hidden_sizes) {
        total += spec.layer_kind == LayerKind::standard ? count_linear(in, h)
                                                        : count_nm(in, h, spec.nm_size);
        in = h;
    }
    total += count_linear(in, spec.head_dim);
    if (spec.head == HeadKind::gaussian) total += spec.head_dim;
    return total;
}

std::size_t solve_matched_width(const PolicySpec& spec) {
    const std::size_t target = count_params(spec);
    PolicySpec s = spec;
    s.layer_kind = LayerKind::standard;
    s.nm_size = 0;
    auto count_at = [&](std::size_t h) {
        s.hidden_sizes.assign(spec.hidden_sizes.size(), h);
        return count_params(s);
    };
    std::size_t h = 1;
    while (count_at(h) < target) ++h; // counts grow monotonically in h
    if (h == 1) return h;
    return target - count_at(h - 1) <= count_at(h) - target ? h - 1 : h;
}

PolicySpec matched_spn_spec(const PolicySpec& spec) {
    PolicySpec s = spec;
    s.layer_kind = LayerKind::standard;
    s.nm_size = 0;
    s.hidden_sizes.assign(spec.hidden_sizes.size(), solve_matched_width(spec));
    return s;
}

namespace {

Tensor uniform_init(std::size_t m, std::size_t n, std::size_t fan_in, Rng& rng) {
    const double limit = 1.0 / std::sqrt(static_cast<double>(fan_in));
    Tensor t = Tensor::zeros(m, n, true);
    for (std::size_t i = 0; i < t.numel(); ++i) t.mut_data()[i] = rng.uniform(-limit, limit);
    return t;
}

} // namespace

PolicyParams init_policy(const PolicySpec& spec, Rng& rng) {
    if (spec.hidden_sizes.empty()) throw ConfigError("init_policy: no hidden layers");
    if (spec.head_dim == 0) throw ConfigError("init_policy: head_dim is zero");
    if (spec.layer_kind == LayerKind::neuromodulated && spec.nm_size == 0)
        throw ConfigError("init_policy: neuromodulated layers need nm_size >= 1");

    PolicyParams p;
    std::size_t in = spec.input_dim + spec.context_dim;
    for (std::size_t h : spec.hidden_sizes) {
        if (spec.layer_kind == LayerKind::standard) {
            LinearParams l;
            l.W = uniform_init(h, in, in, rng);
            l.b = uniform_init(1, h, in, rng);
            p.hidden_std.push_back(std::move(l));
        } else {
            NMLinearParams l;
            l.W_s = uniform_init(h, in, in, rng);
            l.b_s = uniform_init(1, h, in, rng);
            l.W_g = uniform_init(spec.nm_size, in, in, rng);
            l.b_g = uniform_init(1, spec.nm_size, in, rng);
            l.W_m = uniform_init(h, spec.nm_size, spec.nm_size, rng);
            // Zero modulator bias: gates start centered, the nonzero W_m
            // init keeps them responsive rather than saturated or dead.
            l.b_m = Tensor::zeros(1, h, true);
            l.gate_mode = spec.gate_mode;
            p.hidden_nm.push_back(std::move(l));
        }
        in = h;
    }
    p.out.W = uniform_init(spec.head_dim, in, in, rng);
    p.out.b = uniform_init(1, spec.head_dim, in, rng);
    if (spec.head == HeadKind::gaussian) p.log_std = Tensor::zeros(1, spec.head_dim, true);
    p.phi = Tensor::zeros(1, spec.context_dim, true);
    return p;
}

std::vector<NamedTensor> pack_params(const PolicyParams& p, const PolicySpec& spec) {
    std::vector<NamedTensor> ts;
    for (std::size_t i = 0; i < p.hidden_std.size(); ++i) {
        const std::string k = "h" + std::to_string(i);
        ts.push_back({k + ".W", p.hidden_std[i].W});
        ts.push_back({k + ".b", p.hidden_std[i].b});
    }
    for (std::size_t i = 0; i < p.hidden_nm.size(); ++i) {
        const std::string k = "h" + std::to_string(i);
        ts.push_back({k + ".W_s", p.hidden_nm[i].W_s});
        ts.push_back({k + ".b_s", p.hidden_nm[i].b_s});
        ts.push_back({k + ".W_g", p.hidden_nm[i].W_g});
        ts.push_back({k + ".b_g", p.hidden_nm[i].b_g});
        ts.push_back({k + ".W_m", p.hidden_nm[i].W_m});
        ts.push_back({k + ".b_m", p.hidden_nm[i].b_m});
    }
    ts.push_back({"out.W", p.out.W});
    ts.push_back({"out.b", p.out.b});
    if (spec.head == HeadKind::gaussian) ts.push_back({"log_std", p.log_std});
    ts.push_back({"phi", p.phi});
    return ts;
}

PolicyParams unpack_params(const std::vector<NamedTensor>& ts, const PolicySpec& spec) {
    std::size_t k = 0;
    auto next = [&](const std::string& name) -> Tensor {
        if (k >= ts.size() || ts[k].name != name)
            throw ContractError("unpack_params: expected tensor '" + name + "', found '" +
                                (k < ts.size() ? ts[k].name : std::string("<end>")) + "'");
        Tensor t = ts[k++].t;
        t.set_requires_grad(true);
        return t;
    };
    PolicyParams p;
    for (std::size_t i = 0; i < spec.hidden_sizes.size(); ++i) {
        const std::string key = "h" + std::to_string(i);
        if (spec.layer_kind == LayerKind::standard) {
            LinearParams l;
            l.W = next(key + ".W");
            l.b = next(key + ".b");
            p.hidden_std.push_back(std::move(l));
        } else {
            NMLinearParams l;
            l.W_s = next(key + ".W_s");
            l.b_s = next(key + ".b_s");
            l.W_g = next(key + ".W_g");
            l.b_g = next(key + ".b_g");
            l.W_m = next(key + ".W_m");
            l.b_m = next(key + ".b_m");
            l.gate_mode = spec.gate_mode;
            p.hidden_nm.push_back(std::move(l));
        }
    }
    p.out.W = next("out.W");
    p.out.b = next("out.b");
    if (spec.head == HeadKind::gaussian) p.log_std = next("log_std");
    p.phi = next("phi");
    if (k != ts.size()) throw ContractError("unpack_params: trailing tensors in archive");
    return p;
}

namespace {

void put_u32(std::string& s, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint32_t get_u32(const std::string& s, std::size_t& off) {
    if (off + 4 > s.size()) throw ContractError("tensor archive: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
        v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[off + i])) << (8 * i);
    off += 4;
    return v;
}

constexpr char kMagic[] = "NMRLTNS1";

} // namespace

std::string encode_tensors(const std::vector<NamedTensor>& ts) {
    std::string s(kMagic, 8);
    put_u32(s, static_cast<std::uint32_t>(ts.size()));
    for (const auto& nt : ts) {
        put_u32(s, static_cast<std::uint32_t>(nt.name.size()));
        s += nt.name;
        put_u32(s, static_cast<std::uint32_t>(nt.t.rows()));
        put_u32(s, static_cast<std::uint32_t>(nt.t.cols()));
        const std::size_t bytes = nt.t.numel() * sizeof(double);
        const std::size_t off = s.size();
        s.resize(off + bytes);
        // Little-endian doubles; this codebase only targets such hosts.
        std::memcpy(s.data() + off, nt.t.data(), bytes);
    }
    return s;
}

std::vector<NamedTensor> decode_tensors(const std::string& bytes) {
    if (bytes.size() < 8 || bytes.compare(0, 8, kMagic, 8) != 0)
        throw ContractError("tensor archive: bad magic");
    std::size_t off = 8;
    const std::uint32_t count = get_u32(bytes, off);
    std::vector<NamedTensor> ts;
    ts.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(bytes, off);
        if (off + name_len > bytes.size()) throw ContractError("tensor archive: truncated");
        std::string name = bytes.substr(off, name_len);
        off += name_len;
        const std::uint32_t rows = get_u32(bytes, off);
        const std::uint32_t cols = get_u32(bytes, off);
        const std::size_t n = static_cast<std::size_t>(rows) * cols;
        if (off + n * sizeof(double) > bytes.size())
            throw ContractError("tensor archive: truncated");
        std::vector<double> vals(n);
        std::memcpy(vals.data(), bytes.data() + off, n * sizeof(double));
        off += n * sizeof(double);
        ts.push_back({std::move(name), Tensor::matrix(rows, cols, std::move(vals))});
    }
    if (off != bytes.size()) throw ContractError("tensor archive: trailing bytes");
    return ts;
}

} // namespace nmrl
