#include <cmath>
#include <cstddef>

#include "nmrl/ad/ops.hpp"
#include "nmrl/ad/tape.hpp"
#include "nmrl/common.hpp"
#include "nmrl/meta.hpp"

namespace nmrl {

namespace ops = ad::ops;

Tensor inner_loss(const std::vector<Trajectory>& trajs, const std::vector<double>& advantages,
                  const PolicyParams& params, const PolicySpec& spec) {
    std::size_t total = 0;
    for (const auto& tr : trajs) total += tr.length();
    if (total == 0) throw ContractError("inner_loss: no steps");
    if (advantages.size() != total)
        throw ContractError("inner_loss: " + std::to_string(advantages.size()) +
                            " advantages for " + std::to_string(total) + " steps");

    const std::size_t d = trajs.front().observations.front().size();
    Tensor obs = Tensor::zeros(total, d);
    std::vector<std::size_t> acts_d;
    std::vector<std::vector<double>> acts_c;
    std::size_t r = 0;
    for (const auto& tr : trajs) {
        for (std::size_t t = 0; t < tr.length(); ++t, ++r) {
            for (std::size_t j = 0; j < d; ++j) obs.mut_at(r, j) = tr.observations[t][j];
            if (spec.head == HeadKind::categorical)
                acts_d.push_back(tr.actions_d[t]);
            else
                acts_c.push_back(tr.actions_c[t]);
        }
    }

    const Distribution dist = policy_forward(obs, params, spec);
    const Tensor lp = spec.head == HeadKind::categorical ? log_prob_categorical(dist, acts_d)
                                                         : log_prob_gaussian(dist, acts_c);
    Tensor adv = Tensor::matrix(total, 1, advantages); // constant
    return ops::scalar_mul(ops::mean(ops::ewise_mul(lp, adv)), -1.0);
}

PolicyParams inner_adapt(const PolicyParams& params, const PolicySpec& spec,
                         const std::vector<Trajectory>& trajs,
                         const std::vector<double>& advantages, double alpha,
                         std::size_t n_steps, bool differentiable, const std::string& where,
                         double* loss_out) {
    if (spec.context_dim == 0) throw ContractError("inner_adapt: policy has no context");
    PolicyParams cur = params;
    for (std::size_t s = 0; s < n_steps; ++s) {
        const Tensor loss = inner_loss(trajs, advantages, cur, spec);
        if (!loss.all_finite()) throw NumericalError(where + ": non-finite inner loss");
        if (loss_out) *loss_out = loss.item();
        std::vector<Tensor> g = ad::grad(loss, {cur.phi}, differentiable);
        if (!g[0].all_finite()) throw NumericalError(where + ": non-finite phi gradient");
        cur = cur.with_phi(ops::sub(cur.phi, ops::scalar_mul(g[0], alpha)));
    }
    return cur;
}

std::vector<Tensor> Adam::step(const std::vector<Tensor>& params,
                               const std::vector<Tensor>& grads) {
    if (params.size() != grads.size()) throw ContractError("Adam::step: param/grad count mismatch");
    if (m_.empty()) {
        m_.resize(params.size());
        v_.resize(params.size());
        for (std::size_t i = 0; i < params.size(); ++i) {
            m_[i].assign(params[i].numel(), 0.0);
            v_[i].assign(params[i].numel(), 0.0);
        }
    }
    if (m_.size() != params.size()) throw ContractError("Adam::step: parameter count changed");
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    std::vector<Tensor> out;
    out.reserve(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
        ad::check_same_shape(params[i], grads[i], "Adam::step");
        if (m_[i].size() != params[i].numel())
            throw ContractError("Adam::step: parameter shape changed");
        Tensor p = Tensor::zeros(params[i].rows(), params[i].cols(), true);
        const double* pv = params[i].data();
        const double* gv = grads[i].data();
        for (std::size_t k = 0; k < params[i].numel(); ++k) {
            m_[i][k] = beta1_ * m_[i][k] + (1.0 - beta1_) * gv[k];
            v_[i][k] = beta2_ * v_[i][k] + (1.0 - beta2_) * gv[k] * gv[k];
            p.mut_data()[k] = pv[k] - lr_ * (m_[i][k] / bc1) / (std::sqrt(v_[i][k] / bc2) + eps_);
        }
        out.push_back(std::move(p));
    }
    return out;
}

void outer_update(PolicyParams& params, const std::vector<TaskResult>& results, Adam& opt) {
    if (results.empty()) throw ContractError("outer_update: no task results");
    const std::vector<Tensor> theta = params.theta();
    const double inv = 1.0 / static_cast<double>(results.size());

    // Each task's surrogate was built on its own unit-variance advantages.
    // Rescaling by raw spread relative to the batch makes the average equal
    // to batch-pooled normalization: a task whose trajectories carried almost
    // no reward signal contributes proportionally little instead of being
    // amplified to unit scale.
    double pooled_sq = 0.0;
    for (const TaskResult& tr : results) pooled_sq += tr.outer_adv_std * tr.outer_adv_std;
    const double pooled = std::sqrt(pooled_sq * inv);

    std::vector<Tensor> gbar;
    gbar.reserve(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i) {
        Tensor g = Tensor::zeros(theta[i].rows(), theta[i].cols());
        for (const TaskResult& tr : results) {
            if (tr.theta_grads.size() != theta.size())
                throw ContractError("outer_update: task gradient count mismatch");
            ad::check_same_shape(g, tr.theta_grads[i], "outer_update");
            const double w = pooled > 0.0 ? tr.outer_adv_std / pooled : 1.0;
            const double* src = tr.theta_grads[i].data();
            for (std::size_t k = 0; k < g.numel(); ++k) g.mut_data()[k] += w * src[k];
        }
        for (std::size_t k = 0; k < g.numel(); ++k) g.mut_data()[k] *= inv;
        if (!g.all_finite()) throw NumericalError("outer_update: non-finite averaged gradient");
        gbar.push_back(std::move(g));
    }
    params = params.with_theta(opt.step(theta, gbar));
}

} // namespace nmrl
