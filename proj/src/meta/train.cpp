#include <algorithm>
#include <exception>
#include <limits>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "nmrl/ad/ops.hpp"
#include "nmrl/ad/tape.hpp"
#include "nmrl/common.hpp"
#include "nmrl/meta.hpp"

namespace nmrl {

namespace ops = ad::ops;
using json = nlohmann::json;

namespace {

void check_config(const MetaConfig& cfg) {
    if (cfg.n_iterations == 0) throw ConfigError("meta: n_iterations must be positive");
    if (cfg.meta_batch_size == 0) throw ConfigError("meta: meta_batch_size must be positive");
    if (cfg.n_traj_train == 0 || cfg.n_traj_test == 0)
        throw ConfigError("meta: trajectory counts must be positive");
    if (!(cfg.inner_lr > 0.0) || !(cfg.outer_lr > 0.0))
        throw ConfigError("meta: learning rates must be positive");
    if (cfg.gamma <= 0.0 || cfg.gamma > 1.0) throw ConfigError("meta: gamma must be in (0, 1]");
    if (cfg.gae_lambda < 0.0 || cfg.gae_lambda > 1.0)
        throw ConfigError("meta: gae_lambda must be in [0, 1]");
    if (cfg.n_inner_steps_train == 0) throw ConfigError("meta: inner steps must be positive");
    if (cfg.n_workers == 0) throw ConfigError("meta: n_workers must be positive");
}

// One task of one iteration: adapt phi on train trajectories, evaluate the
// adapted policy on test trajectories, differentiate the test loss back to
// theta through the adaptation.
TaskResult run_task(const EnvFamily& family, const Task& task, const PolicyParams& params,
                    const PolicySpec& spec, const MetaConfig& cfg, std::size_t iter,
                    std::size_t t) {
    const std::string where =
        "iteration " + std::to_string(iter) + " task " + std::to_string(t);
    TaskResult res;

    Rng train_rng = derive_rng(cfg.seed, "train_roll", iter, t);
    const std::vector<Trajectory> train =
        collect_trajectories(family, task, params, spec, cfg.n_traj_train, train_rng);
    res.pre_return = mean_return(train);
    const BaselineParams bl = fit_baseline(train, cfg.gamma, family.horizon());
    const std::vector<double> adv =
        batch_advantages(train, bl, cfg.gamma, cfg.gae_lambda, true);

    ad::Tape tape;
    ad::TapeScope scope(tape);
    const PolicyParams adapted =
        inner_adapt(params, spec, train, adv, cfg.inner_lr, cfg.n_inner_steps_train,
                    /*differentiable=*/true, where, &res.inner_loss_value);

    Rng test_rng = derive_rng(cfg.seed, "test_roll", iter, t);
    const std::vector<Trajectory> test =
        collect_trajectories(family, task, adapted, spec, cfg.n_traj_test, test_rng);
    res.post_return = mean_return(test);
    const BaselineParams bl_test = fit_baseline(test, cfg.gamma, family.horizon());
    const std::vector<double> adv_test =
        batch_advantages(test, bl_test, cfg.gamma, cfg.gae_lambda, true, &res.outer_adv_std);

    const Tensor outer_loss = inner_loss(test, adv_test, adapted, spec);
    if (!outer_loss.all_finite()) throw NumericalError(where + ": non-finite outer loss");
    res.outer_loss_value = outer_loss.item();
    res.theta_grads = ad::grad(outer_loss, params.theta());
    for (const Tensor& g : res.theta_grads)
        if (!g.all_finite()) throw NumericalError(where + ": non-finite theta gradient");
    return res;
}

// Runs fn(0..n-1) on up to `workers` threads; strided assignment, results
// land in caller-owned slots so ordering never depends on the thread count.
void parallel_tasks(std::size_t n, std::size_t workers,
                    const std::function<void(std::size_t)>& fn) {
    workers = std::max<std::size_t>(1, std::min(workers, n));
    if (workers == 1) {
        for (std::size_t t = 0; t < n; ++t) fn(t);
        return;
    }
    std::vector<std::exception_ptr> errs(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w)
        pool.emplace_back([&, w] {
            try {
                for (std::size_t t = w; t < n; t += workers) fn(t);
            } catch (...) {
                errs[w] = std::current_exception();
            }
        });
    for (auto& th : pool) th.join();
    for (const auto& e : errs)
        if (e) std::rethrow_exception(e);
}

} // namespace

MetaTrainResult meta_train(const EnvFamily& family, const PolicySpec& spec,
                           const MetaConfig& cfg, std::ostream* log,
                           const SnapshotFn& snapshot) {
    check_config(cfg);
    Rng init_rng = derive_rng(cfg.seed, "init");
    PolicyParams params = init_policy(spec, init_rng);

    Adam opt(cfg.outer_lr);
    MetaTrainResult res;
    res.best_params = params;
    double best = -std::numeric_limits<double>::infinity();

    for (std::size_t iter = 0; iter < cfg.n_iterations; ++iter) {
        Rng task_rng = derive_rng(cfg.seed, "tasks", iter);
        const std::vector<Task> tasks = family.sample_tasks(cfg.meta_batch_size, task_rng);

        std::vector<TaskResult> results(tasks.size());
        parallel_tasks(tasks.size(), cfg.n_workers, [&](std::size_t t) {
            results[t] = run_task(family, tasks[t], params, spec, cfg, iter, t);
        });

        IterRecord rec;
        rec.iter = iter;
        for (const TaskResult& r : results) {
            rec.mean_pre += r.pre_return;
            rec.mean_post += r.post_return;
            rec.mean_outer_loss += r.outer_loss_value;
        }
        const double inv = 1.0 / static_cast<double>(results.size());
        rec.mean_pre *= inv;
        rec.mean_post *= inv;
        rec.mean_outer_loss *= inv;

        const bool is_best = rec.mean_post > best;
        if (is_best) {
            best = rec.mean_post;
            res.best_params = params; // the params that produced this score
            res.best_iter = iter;
            if (snapshot) snapshot("best", iter, params);
        }

        if (log) {
            for (std::size_t t = 0; t < results.size(); ++t) {
                json line{{"iter", iter},
                          {"task", t},
                          {"task_info", family.task_str(tasks[t])},
                          {"pre", results[t].pre_return},
                          {"post", results[t].post_return},
                          {"inner_loss", results[t].inner_loss_value},
                          {"outer_loss", results[t].outer_loss_value}};
                *log << line.dump() << "\n";
            }
            json line{{"iter", iter},
                      {"mean_pre", rec.mean_pre},
                      {"mean_post", rec.mean_post},
                      {"mean_outer_loss", rec.mean_outer_loss},
                      {"best", is_best}};
            *log << line.dump() << "\n";
            log->flush();
        }
        res.history.push_back(rec);

        // Linear decay to zero: without a trust region the late outer steps
        // would walk the policy off its plateau once returns sharpen.
        opt.set_lr(cfg.outer_lr *
                   (1.0 - static_cast<double>(iter) / static_cast<double>(cfg.n_iterations)));
        outer_update(params, results, opt);

        if (snapshot) {
            const std::size_t done = iter + 1;
            if (std::find(cfg.snapshot_iters.begin(), cfg.snapshot_iters.end(), done) !=
                cfg.snapshot_iters.end())
                snapshot("iter" + std::to_string(done), done, params);
        }
    }

    res.final_params = params;
    if (snapshot) snapshot("final", cfg.n_iterations, params);
    return res;
}

MetaTestResult meta_test(const EnvFamily& family, const PolicySpec& spec,
                         const PolicyParams& params, const MetaConfig& cfg, std::size_t n_tasks,
                         std::size_t n_steps, std::uint64_t seed) {
    if (n_tasks == 0) throw ConfigError("meta_test: n_tasks must be positive");
    Rng task_rng = derive_rng(seed, "mt_tasks");
    return meta_test_on(family, spec, params, cfg, family.sample_tasks(n_tasks, task_rng),
                        n_steps, seed);
}

MetaTestResult meta_test_on(const EnvFamily& family, const PolicySpec& spec,
                            const PolicyParams& params, const MetaConfig& cfg,
                            const std::vector<Task>& tasks, std::size_t n_steps,
                            std::uint64_t seed) {
    if (tasks.empty()) throw ContractError("meta_test: no tasks");
    const std::size_t n_tasks = tasks.size();
    MetaTestResult out;
    out.tasks = tasks;
    out.per_task_returns.resize(n_tasks);
    out.phis.resize(n_tasks);
    out.mean_returns.assign(n_steps + 1, 0.0);

    for (std::size_t t = 0; t < n_tasks; ++t) {
        // start from a blank context whatever the checkpoint carried
        PolicyParams cur =
            params.with_phi(Tensor::zeros(1, spec.context_dim, true));
        for (std::size_t k = 0; k <= n_steps; ++k) {
            out.phis[t].push_back(cur.phi.clone());
            Rng roll_rng = derive_rng(seed, "mt_roll", t, k);
            const std::vector<Trajectory> trajs = collect_trajectories(
                family, out.tasks[t], cur, spec, cfg.n_traj_test, roll_rng);
            out.per_task_returns[t].push_back(mean_return(trajs));
            if (k == n_steps) break;
            const BaselineParams bl = fit_baseline(trajs, cfg.gamma, family.horizon());
            const std::vector<double> adv =
                batch_advantages(trajs, bl, cfg.gamma, cfg.gae_lambda, true);
            ad::Tape tape;
            ad::TapeScope scope(tape);
            cur = inner_adapt(cur, spec, trajs, adv, cfg.inner_lr, 1, /*differentiable=*/false,
                              "meta_test task " + std::to_string(t) + " step " +
                                  std::to_string(k));
        }
        for (std::size_t k = 0; k <= n_steps; ++k)
            out.mean_returns[k] += out.per_task_returns[t][k];
    }
    for (double& v : out.mean_returns) v /= static_cast<double>(n_tasks);
    return out;
}

} // namespace nmrl
