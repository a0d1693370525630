#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "nmrl/envs.hpp"
#include "nmrl/layers.hpp"

namespace nmrl {

struct Trajectory {
    std::vector<std::vector<double>> observations; // obs the action was taken from
    std::vector<std::size_t> actions_d;            // discrete actions
    std::vector<std::vector<double>> actions_c;    // continuous actions
    std::vector<double> rewards;
    std::vector<double> log_probs; // under the collecting policy, plain values
    std::vector<char> dones;
    std::size_t task_id = 0;

    std::size_t length() const { return rewards.size(); }
    double total_return() const;
};

struct AdvantageSet {
    std::vector<double> advantages; // per step, pre-normalization
    std::vector<double> returns;    // discounted returns R_t
    double gamma = 0.99;
    double gae_lambda = 1.0;
};

struct MetaConfig {
    std::size_t n_iterations = 500;
    std::size_t meta_batch_size = 20;
    std::size_t n_traj_train = 20;
    std::size_t n_traj_test = 20;
    double inner_lr = 0.5;
    double outer_lr = 7e-4;
    std::size_t n_inner_steps_train = 1;
    std::size_t n_inner_steps_test = 4;
    double gamma = 0.99;
    double gae_lambda = 1.0;
    std::uint64_t seed = 1;
    // Rollout parallelism; results are identical for any value (fixed-order
    // gradient averaging), so this is a runtime knob, not part of configs.
    std::size_t n_workers = 4;
    // Extra checkpoints at these (1-based) iteration counts.
    std::vector<std::size_t> snapshot_iters{150};
};

// Least-squares value predictor over [obs, obs^2, t/H, (t/H)^2, (t/H)^3, 1].
struct BaselineParams {
    std::vector<double> w;
    std::size_t obs_dim = 0;
    double horizon = 1.0;
};

std::vector<Trajectory> collect_trajectories(const EnvFamily& family, const Task& task,
                                             const PolicyParams& params, const PolicySpec& spec,
                                             std::size_t n, Rng& rng, bool greedy = false);

double mean_return(const std::vector<Trajectory>& trajs);

BaselineParams fit_baseline(const std::vector<Trajectory>& batch, double gamma,
                            std::size_t horizon);
double baseline_value(const BaselineParams& b, const std::vector<double>& obs, std::size_t t);
AdvantageSet compute_gae(const Trajectory& traj, const BaselineParams& baseline, double gamma,
                         double lambda);
// GAE over the whole batch, flattened in (trajectory, step) order;
// normalized to mean 0 / std 1 across the batch when `normalize` is set.
// `raw_std` (optional) receives the pre-normalization standard deviation.
std::vector<double> batch_advantages(const std::vector<Trajectory>& trajs,
                                     const BaselineParams& baseline, double gamma, double lambda,
                                     bool normalize, double* raw_std = nullptr);

// Policy-gradient surrogate: -mean(log pi(a|s) * advantage) over all steps,
// with log-probs rebuilt under the given parameters inside the active tape.
Tensor inner_loss(const std::vector<Trajectory>& trajs, const std::vector<double>& advantages,
                  const PolicyParams& params, const PolicySpec& spec);

// n_steps gradient steps on phi only (theta untouched). With
// `differentiable`, the adapted phi keeps its graph so outer-loop gradients
// flow through the update. Requires an active tape either way. `where` names
// the caller in numerical-failure diagnostics.
PolicyParams inner_adapt(const PolicyParams& params, const PolicySpec& spec,
                         const std::vector<Trajectory>& trajs,
                         const std::vector<double>& advantages, double alpha,
                         std::size_t n_steps, bool differentiable, const std::string& where,
                         double* loss_out = nullptr);

struct TaskResult {
    std::vector<Tensor> theta_grads;
    double pre_return = 0.0;
    double post_return = 0.0;
    double inner_loss_value = 0.0;
    double outer_loss_value = 0.0;
    // Raw (pre-normalization) advantage spread of the test trajectories.
    // outer_update uses it to weight tasks so the meta-gradient matches
    // batch-pooled advantage normalization; see the note there.
    double outer_adv_std = 1.0;
};

class Adam {
public:
    explicit Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}
    std::vector<Tensor> step(const std::vector<Tensor>& params,
                             const std::vector<Tensor>& grads);
    double lr() const { return lr_; }
    void set_lr(double lr) { lr_ = lr; }

private:
    double lr_, beta1_, beta2_, eps_;
    std::size_t t_ = 0;
    std::vector<std::vector<double>> m_, v_;
};

// Averages the per-task theta gradients in task order and applies one
// optimizer step. phi is untouched.
void outer_update(PolicyParams& params, const std::vector<TaskResult>& results, Adam& opt);

struct IterRecord {
    std::size_t iter = 0;
    double mean_pre = 0.0;
    double mean_post = 0.0;
    double mean_outer_loss = 0.0;
};

struct MetaTrainResult {
    PolicyParams final_params;
    PolicyParams best_params;
    std::size_t best_iter = 0;
    std::vector<IterRecord> history;
};

using SnapshotFn =
    std::function<void(const std::string& tag, std::size_t iteration, const PolicyParams&)>;

// The full loop: per iteration sample a task batch, adapt phi per task
// (1 step, differentiable), collect post-adaptation trajectories, and update
// theta through the adaptation. Logs one JSON line per task plus a summary
// line per iteration to `log` (when given); `snapshot` receives "best" (by
// post-adaptation mean return, saved before the update that follows it),
// configured milestones, and "final".
MetaTrainResult meta_train(const EnvFamily& family, const PolicySpec& spec,
                           const MetaConfig& cfg, std::ostream* log = nullptr,
                           const SnapshotFn& snapshot = {});

struct MetaTestResult {
    std::vector<Task> tasks;
    std::vector<std::vector<double>> per_task_returns; // [task][step 0..n]
    std::vector<double> mean_returns;                  // [step 0..n]
    std::vector<std::vector<Tensor>> phis;             // [task][step 0..n]
};

// Adaptation curve on fresh tasks: mean return after 0..n_steps inner
// gradient steps, fresh trajectories per step.
MetaTestResult meta_test(const EnvFamily& family, const PolicySpec& spec,
                         const PolicyParams& params, const MetaConfig& cfg, std::size_t n_tasks,
                         std::size_t n_steps, std::uint64_t seed);
// Same protocol on a caller-chosen task list (the analysis pipeline wants
// distinct tasks, not a resample).
MetaTestResult meta_test_on(const EnvFamily& family, const PolicySpec& spec,
                            const PolicyParams& params, const MetaConfig& cfg,
                            const std::vector<Task>& tasks, std::size_t n_steps,
                            std::uint64_t seed);

} // namespace nmrl
