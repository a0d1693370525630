#include <cmath>
#include <cstddef>

#include "nmrl/common.hpp"
#include "nmrl/meta.hpp"

namespace nmrl {

namespace {

// [obs, obs^2, t/H, (t/H)^2, (t/H)^3, 1]
std::size_t feature_dim(std::size_t obs_dim) { return 2 * obs_dim + 4; }

void fill_features(const std::vector<double>& obs, std::size_t t, double horizon,
                   std::vector<double>& f) {
    const std::size_t d = obs.size();
    for (std::size_t j = 0; j < d; ++j) {
        f[j] = obs[j];
        f[d + j] = obs[j] * obs[j];
    }
    const double u = static_cast<double>(t) / horizon;
    f[2 * d + 0] = u;
    f[2 * d + 1] = u * u;
    f[2 * d + 2] = u * u * u;
    f[2 * d + 3] = 1.0;
}

std::vector<double> discounted_returns(const Trajectory& tr, double gamma) {
    std::vector<double> ret(tr.length());
    double acc = 0.0;
    for (std::size_t k = tr.length(); k-- > 0;) {
        acc = tr.rewards[k] + gamma * acc;
        ret[k] = acc;
    }
    return ret;
}

// Solves (A + ridge*I) w = rhs in place via Cholesky; false on a failed pivot.
bool cholesky_solve(std::vector<double> a, std::size_t n, double ridge,
                    std::vector<double> rhs, std::vector<double>& w) {
    for (std::size_t i = 0; i < n; ++i) a[i * n + i] += ridge;
    // A = L L^T, lower triangle of `a` becomes L
    for (std::size_t j = 0; j < n; ++j) {
        double d = a[j * n + j];
        for (std::size_t k = 0; k < j; ++k) d -= a[j * n + k] * a[j * n + k];
        if (!(d > 0.0)) return false;
        const double l = std::sqrt(d);
        a[j * n + j] = l;
        for (std::size_t i = j + 1; i < n; ++i) {
            double s = a[i * n + j];
            for (std::size_t k = 0; k < j; ++k) s -= a[i * n + k] * a[j * n + k];
            a[i * n + j] = s / l;
        }
    }
    // L z = rhs
    for (std::size_t i = 0; i < n; ++i) {
        double s = rhs[i];
        for (std::size_t k = 0; k < i; ++k) s -= a[i * n + k] * rhs[k];
        rhs[i] = s / a[i * n + i];
    }
    // L^T w = z
    w.assign(n, 0.0);
    for (std::size_t i = n; i-- > 0;) {
        double s = rhs[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= a[k * n + i] * w[k];
        w[i] = s / a[i * n + i];
    }
    return true;
}

} // namespace

BaselineParams fit_baseline(const std::vector<Trajectory>& batch, double gamma,
                            std::size_t horizon) {
    if (batch.empty()) throw ContractError("fit_baseline: empty batch");
    if (horizon == 0) throw ContractError("fit_baseline: zero horizon");
    const std::size_t d = batch.front().observations.front().size();
    const std::size_t nf = feature_dim(d);
    const double h = static_cast<double>(horizon);

    std::vector<double> ata(nf * nf, 0.0), aty(nf, 0.0), f(nf);
    for (const auto& tr : batch) {
        const std::vector<double> ret = discounted_returns(tr, gamma);
        for (std::size_t t = 0; t < tr.length(); ++t) {
            fill_features(tr.observations[t], t, h, f);
            for (std::size_t i = 0; i < nf; ++i) {
                for (std::size_t j = i; j < nf; ++j) ata[i * nf + j] += f[i] * f[j];
                aty[i] += f[i] * ret[t];
            }
        }
    }
    for (std::size_t i = 0; i < nf; ++i)
        for (std::size_t j = 0; j < i; ++j) ata[i * nf + j] = ata[j * nf + i];

    BaselineParams b;
    b.obs_dim = d;
    b.horizon = h;
    // one-hot observations make obs and obs^2 columns collide, so the ridge
    // also carries the rank-deficient case; scale up until the factorization
    // holds
    for (double ridge = 1e-8; ridge <= 1e2; ridge *= 100.0)
        if (cholesky_solve(ata, nf, ridge, aty, b.w)) return b;
    throw NumericalError("fit_baseline: normal equations not positive definite");
}

double baseline_value(const BaselineParams& b, const std::vector<double>& obs, std::size_t t) {
    if (obs.size() != b.obs_dim) throw ContractError("baseline_value: obs width mismatch");
    std::vector<double> f(feature_dim(b.obs_dim));
    fill_features(obs, t, b.horizon, f);
    double v = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) v += b.w[i] * f[i];
    return v;
}

AdvantageSet compute_gae(const Trajectory& traj, const BaselineParams& baseline, double gamma,
                         double lambda) {
    const std::size_t n = traj.length();
    AdvantageSet out;
    out.gamma = gamma;
    out.gae_lambda = lambda;
    out.advantages.resize(n);
    out.returns = discounted_returns(traj, gamma);

    std::vector<double> v(n + 1, 0.0); // terminal value 0
    for (std::size_t t = 0; t < n; ++t)
        v[t] = baseline_value(baseline, traj.observations[t], t);
    double acc = 0.0;
    for (std::size_t t = n; t-- > 0;) {
        const double delta = traj.rewards[t] + gamma * v[t + 1] - v[t];
        acc = delta + gamma * lambda * acc;
        out.advantages[t] = acc;
    }
    return out;
}

std::vector<double> batch_advantages(const std::vector<Trajectory>& trajs,
                                     const BaselineParams& baseline, double gamma, double lambda,
                                     bool normalize, double* raw_std) {
    std::vector<double> all;
    for (const auto& tr : trajs) {
        const AdvantageSet a = compute_gae(tr, baseline, gamma, lambda);
        all.insert(all.end(), a.advantages.begin(), a.advantages.end());
    }
    if (raw_std) *raw_std = 0.0;
    if (all.empty()) return all;
    const double n = static_cast<double>(all.size());
    double mean = 0.0;
    for (double x : all) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : all) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / n);
    if (raw_std) *raw_std = sd;
    if (!normalize) return all;
    for (double& x : all) x = (x - mean) / (sd + 1e-8);
    return all;
}

} // namespace nmrl
