#include <algorithm>
#include <cmath>

#include "nmrl/envs.hpp"

namespace nmrl {

std::vector<Nav2DTask> nav2d_sample_tasks(std::size_t n, Rng& rng) {
    std::vector<Nav2DTask> tasks(n);
    for (auto& t : tasks) {
        t.goal[0] = rng.uniform(-0.5, 0.5);
        t.goal[1] = rng.uniform(-0.5, 0.5);
    }
    return tasks;
}

std::vector<double> nav2d_reset(Nav2DState& st, const Nav2DConfig& cfg) {
    st.pos = {0.0, 0.0};
    st.t = 0;
    st.horizon = cfg.horizon;
    st.done = false;
    return {st.pos[0], st.pos[1]};
}

StepResult nav2d_step(Nav2DState& st, const Nav2DTask& task, const Nav2DConfig& cfg,
                      std::array<double, 2> action) {
    if (st.done || st.t >= st.horizon) throw ContractError("nav2d_step: episode already done");
    for (double& a : action) a = std::clamp(a, -cfg.action_clip, cfg.action_clip);
    st.pos[0] += action[0];
    st.pos[1] += action[1];
    st.t += 1;
    const double dx = st.pos[0] - task.goal[0];
    const double dy = st.pos[1] - task.goal[1];
    const double sq_dist = dx * dx + dy * dy;
    StepResult r;
    r.obs = {st.pos[0], st.pos[1]};
    r.reward = -sq_dist;
    r.done = st.t >= st.horizon || std::sqrt(sq_dist) < cfg.goal_eps;
    st.done = r.done;
    return r;
}

namespace {

class Nav2DEnv : public TaskEnv {
public:
    Nav2DEnv(Nav2DTask task, Nav2DConfig cfg) : task_(task), cfg_(cfg) {}
    std::vector<double> reset() override { return nav2d_reset(st_, cfg_); }
    StepResult step_continuous(const std::vector<double>& action) override {
        if (action.size() != 2)
            throw ContractError("nav2d: expected a 2-vector action, got " +
                                std::to_string(action.size()) + " dims");
        return nav2d_step(st_, task_, cfg_, {action[0], action[1]});
    }
    bool done() const override { return st_.done; }

private:
    Nav2DTask task_;
    Nav2DConfig cfg_;
    Nav2DState st_;
};

} // namespace

std::vector<Task> Nav2DFamily::sample_tasks(std::size_t n, Rng& rng) const {
    std::vector<Task> out;
    out.reserve(n);
    for (auto& t : nav2d_sample_tasks(n, rng)) out.emplace_back(t);
    return out;
}

std::unique_ptr<TaskEnv> Nav2DFamily::make_env(const Task& task) const {
    return std::make_unique<Nav2DEnv>(std::get<Nav2DTask>(task), cfg_);
}

std::vector<std::vector<double>> Nav2DFamily::probe_inputs(std::size_t count,
                                                           std::uint64_t seed) const {
    Rng rng = derive_rng(seed, "nav2d_probes");
    std::vector<std::vector<double>> probes(count);
    for (auto& p : probes) p = {rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)};
    return probes;
}

std::string Nav2DFamily::task_str(const Task& task) const {
    const auto& t = std::get<Nav2DTask>(task);
    return "goal(" + std::to_string(t.goal[0]) + "," + std::to_string(t.goal[1]) + ")";
}

} // namespace nmrl
