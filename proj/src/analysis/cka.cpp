#include <cmath>
#include <cstdio>

#include "nmrl/ad/tape.hpp"
#include "nmrl/analysis.hpp"
#include "nmrl/common.hpp"
#include "nmrl/kernels.hpp"

namespace nmrl {

std::vector<RepresentationMatrix> capture_representations(
    const PolicyParams& params, const PolicySpec& spec, const std::vector<Tensor>& phi_per_step,
    const std::vector<std::vector<double>>& probe_inputs, std::size_t task_id) {
    if (probe_inputs.empty()) throw ContractError("capture_representations: empty probe set");
    if (phi_per_step.empty()) throw ContractError("capture_representations: no contexts");
    ad::NoGrad pause;

    const std::size_t n = probe_inputs.size();
    const std::size_t d = probe_inputs.front().size();
    Tensor obs = Tensor::zeros(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        if (probe_inputs[i].size() != d)
            throw ContractError("capture_representations: ragged probe inputs");
        for (std::size_t j = 0; j < d; ++j) obs.mut_at(i, j) = probe_inputs[i][j];
    }

    std::vector<RepresentationMatrix> out;
    out.reserve(phi_per_step.size() * spec.hidden_sizes.size());
    for (std::size_t k = 0; k < phi_per_step.size(); ++k) {
        const PolicyParams p = params.with_phi(phi_per_step[k]);
        std::vector<Tensor> hidden;
        policy_forward(obs, p, spec, &hidden);
        for (std::size_t l = 0; l < hidden.size(); ++l)
            out.push_back({hidden[l], task_id, k, l});
    }
    return out;
}

namespace {

// column-center in place
void center_columns(Tensor& x) {
    const std::size_t m = x.rows(), n = x.cols();
    for (std::size_t j = 0; j < n; ++j) {
        double mu = 0.0;
        for (std::size_t i = 0; i < m; ++i) mu += x.at(i, j);
        mu /= static_cast<double>(m);
        for (std::size_t i = 0; i < m; ++i) x.mut_at(i, j) -= mu;
    }
}

double frobenius_sq(const Tensor& x) {
    return kern::table().dot(x.data(), x.data(), x.numel());
}

Tensor gram_tn(const Tensor& a, const Tensor& b) {
    // a^T b for [m,p] x [m,q] -> [p,q]
    Tensor out = Tensor::zeros(a.cols(), b.cols());
    kern::table().gemm_tn(a.data(), b.data(), out.mut_data(), a.cols(), a.rows(), b.cols());
    return out;
}

} // namespace

double linear_cka(const Tensor& x, const Tensor& y, bool* degenerate) {
    if (x.rows() != y.rows())
        throw ContractError("linear_cka: row mismatch " + std::to_string(x.rows()) + " vs " +
                            std::to_string(y.rows()));
    if (x.rows() == 0) throw ContractError("linear_cka: empty matrices");
    Tensor xc = x.clone(), yc = y.clone();
    center_columns(xc);
    center_columns(yc);

    const double xx = std::sqrt(frobenius_sq(gram_tn(xc, xc)));
    const double yy = std::sqrt(frobenius_sq(gram_tn(yc, yc)));
    if (xx == 0.0 || yy == 0.0) {
        if (degenerate) *degenerate = true;
        return (xx == 0.0 && yy == 0.0) ? 1.0 : 0.0;
    }
    const double xy = frobenius_sq(gram_tn(yc, xc));
    return xy / (xx * yy);
}

const CKAMatrix& HeatmapSet::at(std::size_t layer, std::size_t step) const {
    if (layer >= n_layers || step > n_steps) throw ContractError("HeatmapSet::at: out of range");
    return matrices[step * n_layers + layer];
}

HeatmapSet build_heatmaps(const EnvFamily& family, const PolicySpec& spec,
                          const PolicyParams& params,
                          const std::vector<std::vector<Tensor>>& phis,
                          const std::vector<std::vector<double>>& probe_inputs) {
    if (phis.empty()) throw ContractError("build_heatmaps: no tasks");
    const std::size_t n_tasks = phis.size();
    const std::size_t n_points = phis.front().size();
    if (n_points == 0) throw ContractError("build_heatmaps: no contexts");
    for (const auto& p : phis)
        if (p.size() != n_points) throw ContractError("build_heatmaps: ragged phi table");
    (void)family; // probes are family-derived but passed in for reuse

    // reps[t] holds task t's matrices, step-major then layer
    std::vector<std::vector<RepresentationMatrix>> reps(n_tasks);
    for (std::size_t t = 0; t < n_tasks; ++t)
        reps[t] = capture_representations(params, spec, phis[t], probe_inputs, t);

    HeatmapSet h;
    h.n_layers = spec.hidden_sizes.size();
    h.n_steps = n_points - 1;
    h.n_tasks = n_tasks;
    for (std::size_t k = 0; k < n_points; ++k) {
        for (std::size_t l = 0; l < h.n_layers; ++l) {
            CKAMatrix m;
            m.layer = l;
            m.grad_step = k;
            m.n_tasks = n_tasks;
            m.values.assign(n_tasks * n_tasks, 0.0);
            const std::size_t idx = k * h.n_layers + l;
            for (std::size_t a = 0; a < n_tasks; ++a) {
                for (std::size_t b = a; b < n_tasks; ++b) {
                    bool deg = false;
                    const double v = linear_cka(reps[a][idx].m, reps[b][idx].m, &deg);
                    m.values[a * n_tasks + b] = v;
                    m.values[b * n_tasks + a] = v;
                    if (deg) m.degenerate = true;
                }
            }
            h.matrices.push_back(std::move(m));
        }
    }
    return h;
}

double dissimilarity(const CKAMatrix& m) {
    if (m.n_tasks < 2) throw ContractError("dissimilarity: needs at least 2 tasks");
    double s = 0.0;
    for (std::size_t i = 0; i < m.n_tasks; ++i)
        for (std::size_t j = 0; j < m.n_tasks; ++j)
            if (i != j) s += m.at(i, j);
    const double pairs = static_cast<double>(m.n_tasks * (m.n_tasks - 1));
    return 1.0 - s / pairs;
}

std::vector<double> dissimilarity_summary(const HeatmapSet& h) {
    std::vector<double> out(h.n_steps + 1, 0.0);
    for (std::size_t k = 0; k <= h.n_steps; ++k) {
        for (std::size_t l = 0; l < h.n_layers; ++l) out[k] += dissimilarity(h.at(l, k));
        out[k] /= static_cast<double>(h.n_layers);
    }
    return out;
}

namespace {

std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

std::string heatmap_csv(const CKAMatrix& m) {
    std::string s = "task_a\\task_b";
    for (std::size_t j = 0; j < m.n_tasks; ++j) s += "," + std::to_string(j);
    s += "\n";
    for (std::size_t i = 0; i < m.n_tasks; ++i) {
        s += std::to_string(i);
        for (std::size_t j = 0; j < m.n_tasks; ++j) s += "," + fmt17(m.at(i, j));
        s += "\n";
    }
    return s;
}

std::string long_format_csv(const HeatmapSet& h) {
    std::string s = "task_a,task_b,layer,step,cka\n";
    for (const CKAMatrix& m : h.matrices)
        for (std::size_t a = 0; a < m.n_tasks; ++a)
            for (std::size_t b = 0; b < m.n_tasks; ++b)
                s += std::to_string(a) + "," + std::to_string(b) + "," +
                     std::to_string(m.layer) + "," + std::to_string(m.grad_step) + "," +
                     fmt17(m.at(a, b)) + "\n";
    return s;
}

} // namespace nmrl
