#include <cmath>
#include <memory>
#include <numeric>

#include "nmrl/ad/ops.hpp"
#include "nmrl/ad/tape.hpp"
#include "nmrl/common.hpp"
#include "nmrl/meta.hpp"

namespace nmrl {

double Trajectory::total_return() const {
    return std::accumulate(rewards.begin(), rewards.end(), 0.0);
}

double mean_return(const std::vector<Trajectory>& trajs) {
    if (trajs.empty()) throw ContractError("mean_return: empty batch");
    double s = 0.0;
    for (const auto& t : trajs) s += t.total_return();
    return s / static_cast<double>(trajs.size());
}

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

double categorical_logp(const Distribution& d, std::size_t row, std::size_t action) {
    return d.log_probs.at(row, action);
}

double gaussian_logp(const Distribution& d, std::size_t row, const std::vector<double>& action) {
    const std::size_t dim = d.mean.cols();
    double lp = -0.5 * kLog2Pi * static_cast<double>(dim);
    for (std::size_t j = 0; j < dim; ++j) {
        const double ls = d.log_std.at(0, j);
        const double z = (action[j] - d.mean.at(row, j)) * std::exp(-ls);
        lp -= 0.5 * z * z + ls;
    }
    return lp;
}

} // namespace

std::vector<Trajectory> collect_trajectories(const EnvFamily& family, const Task& task,
                                             const PolicyParams& params, const PolicySpec& spec,
                                             std::size_t n, Rng& rng, bool greedy) {
    ad::NoGrad pause; // rollouts want values only; losses recompute log-probs later

    const bool discrete = family.head_kind() == HeadKind::categorical;
    std::vector<std::unique_ptr<TaskEnv>> envs;
    std::vector<Trajectory> trajs(n);
    std::vector<std::vector<double>> cur_obs(n);
    std::vector<char> alive(n, 1);
    envs.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        envs.push_back(family.make_env(task));
        cur_obs[i] = envs[i]->reset();
        trajs[i].task_id = i;
    }

    std::size_t n_alive = n;
    while (n_alive > 0) {
        std::vector<std::size_t> rows; // alive episode index per batch row
        rows.reserve(n_alive);
        Tensor obs = Tensor::zeros(n_alive, family.obs_dim());
        for (std::size_t i = 0; i < n; ++i) {
            if (!alive[i]) continue;
            const std::size_t r = rows.size();
            for (std::size_t j = 0; j < family.obs_dim(); ++j)
                obs.mut_at(r, j) = cur_obs[i][j];
            rows.push_back(i);
        }

        const Distribution d = policy_forward(obs, params, spec);
        std::vector<std::size_t> acts_d;
        std::vector<std::vector<double>> acts_c;
        if (discrete)
            acts_d = sample_categorical(d, rng, greedy);
        else
            acts_c = sample_gaussian(d, rng, greedy);

        for (std::size_t r = 0; r < rows.size(); ++r) {
            const std::size_t i = rows[r];
            Trajectory& tr = trajs[i];
            tr.observations.push_back(cur_obs[i]);
            StepResult sr;
            if (discrete) {
                tr.actions_d.push_back(acts_d[r]);
                tr.log_probs.push_back(categorical_logp(d, r, acts_d[r]));
                sr = envs[i]->step_discrete(acts_d[r]);
            } else {
                tr.log_probs.push_back(gaussian_logp(d, r, acts_c[r]));
                tr.actions_c.push_back(acts_c[r]);
                sr = envs[i]->step_continuous(tr.actions_c.back());
            }
            tr.rewards.push_back(sr.reward);
            tr.dones.push_back(sr.done ? 1 : 0);
            cur_obs[i] = sr.obs;
            if (sr.done) {
                alive[i] = 0;
                --n_alive;
            }
        }
    }
    return trajs;
}

} // namespace nmrl
