#include <algorithm>
#include <string>

#include "nmrl/envs.hpp"

namespace nmrl {

std::size_t CTGraph::n_leaves() const {
    std::size_t n = 1;
    for (std::size_t l = 0; l < cfg.depth; ++l) n *= cfg.branch;
    return n;
}

CTGraph ctgraph_build(const CTGraphConfig& cfg) {
    if (cfg.branch < 2) throw ConfigError("ct_graph: branch must be >= 2");
    if (cfg.depth < 1) throw ConfigError("ct_graph: depth must be >= 1");

    CTGraph g;
    g.cfg = cfg;
    auto& nodes = g.nodes;
    nodes.push_back({CTNodeKind::start, 0, {}, 0});
    nodes.push_back({CTNodeKind::crash, 0, {}, 0});

    const std::size_t d0 = nodes.size();
    nodes.push_back({CTNodeKind::decision, 0, {}, 0});
    nodes[0].children = {d0};

    // Decisions of the previous level, in leaf order; their children are the
    // next level's waits (or the leaves at the bottom).
    std::vector<std::size_t> frontier = {d0};
    for (std::size_t level = 1; level < cfg.depth; ++level) {
        std::vector<std::size_t> waits, decisions;
        for (std::size_t i = 0; i < frontier.size() * cfg.branch; ++i) {
            waits.push_back(nodes.size());
            nodes.push_back({CTNodeKind::wait, level, {}, 0});
        }
        for (std::size_t i = 0; i < waits.size(); ++i) {
            decisions.push_back(nodes.size());
            nodes.push_back({CTNodeKind::decision, level, {}, 0});
            nodes[waits[i]].children = {decisions[i]};
        }
        for (std::size_t i = 0; i < frontier.size(); ++i)
            for (std::size_t k = 0; k < cfg.branch; ++k)
                nodes[frontier[i]].children.push_back(waits[i * cfg.branch + k]);
        frontier = std::move(decisions);
    }

    for (std::size_t i = 0; i < frontier.size(); ++i)
        for (std::size_t k = 0; k < cfg.branch; ++k) {
            const std::size_t leaf = nodes.size();
            nodes.push_back({CTNodeKind::leaf, cfg.depth, {}, i * cfg.branch + k});
            nodes[frontier[i]].children.push_back(leaf);
        }
    return g;
}

std::vector<double> ctgraph_obs(const CTGraph& g, std::size_t node) {
    std::vector<double> obs(g.obs_len(), 0.0);
    obs[node] = 1.0;
    return obs;
}

std::vector<double> ctgraph_reset(const CTGraph& g, CTGraphState& st) {
    st.node = 0;
    st.done = false;
    return ctgraph_obs(g, st.node);
}

StepResult ctgraph_step(const CTGraph& g, CTGraphState& st, const CTGraphTask& task,
                        std::size_t action) {
    if (st.done) throw ContractError("ctgraph_step: episode already done");
    if (action > g.cfg.branch)
        throw ContractError("ctgraph_step: action " + std::to_string(action) +
                            " out of range [0, " + std::to_string(g.cfg.branch) + "]");
    if (task.goal_index >= g.n_leaves())
        throw ContractError("ctgraph_step: goal index " + std::to_string(task.goal_index) +
                            " out of range");

    const CTGraphNode& node = g.nodes[st.node];
    const bool wait_kind = node.kind == CTNodeKind::start || node.kind == CTNodeKind::wait;

    StepResult r;
    const bool crashed = wait_kind ? action != 0 : action == 0;
    if (crashed) {
        st.node = 1;
        st.done = true;
        r.reward = g.cfg.crash_reward;
        r.done = true;
    } else {
        st.node = wait_kind ? node.children[0] : node.children[action - 1];
        const CTGraphNode& next = g.nodes[st.node];
        if (next.kind == CTNodeKind::leaf) {
            st.done = true;
            r.done = true;
            r.reward = next.leaf_index == task.goal_index ? g.cfg.goal_reward : 0.0;
        }
    }
    r.obs = ctgraph_obs(g, st.node);
    r.info["node"] = static_cast<double>(st.node);
    return r;
}

std::vector<CTGraphTask> ctgraph_sample_tasks(const CTGraph& g, std::size_t n, Rng& rng) {
    std::vector<CTGraphTask> tasks(n);
    for (auto& t : tasks) t.goal_index = rng.uniform_index(g.n_leaves());
    return tasks;
}

namespace {

class CTGraphEnv : public TaskEnv {
public:
    CTGraphEnv(const CTGraph& g, CTGraphTask task) : g_(g), task_(task) {}
    std::vector<double> reset() override { return ctgraph_reset(g_, st_); }
    StepResult step_discrete(std::size_t action) override {
        return ctgraph_step(g_, st_, task_, action);
    }
    bool done() const override { return st_.done; }

private:
    const CTGraph& g_;
    CTGraphTask task_;
    CTGraphState st_;
};

} // namespace

std::vector<Task> CTGraphFamily::sample_tasks(std::size_t n, Rng& rng) const {
    std::vector<Task> out;
    out.reserve(n);
    for (auto& t : ctgraph_sample_tasks(graph_, n, rng)) out.emplace_back(t);
    return out;
}

std::vector<Task> CTGraphFamily::analysis_tasks(std::size_t n, Rng&) const {
    std::vector<Task> out;
    for (std::size_t i = 0; i < std::min(n, graph_.n_leaves()); ++i)
        out.emplace_back(CTGraphTask{i});
    return out;
}

std::unique_ptr<TaskEnv> CTGraphFamily::make_env(const Task& task) const {
    return std::make_unique<CTGraphEnv>(graph_, std::get<CTGraphTask>(task));
}

std::vector<std::vector<double>> CTGraphFamily::probe_inputs(std::size_t, std::uint64_t) const {
    // The full observation set: one one-hot vector per node.
    std::vector<std::vector<double>> probes;
    probes.reserve(graph_.obs_len());
    for (std::size_t i = 0; i < graph_.obs_len(); ++i) probes.push_back(ctgraph_obs(graph_, i));
    return probes;
}

std::string CTGraphFamily::task_str(const Task& task) const {
    return "leaf(" + std::to_string(std::get<CTGraphTask>(task).goal_index) + ")";
}

} // namespace nmrl
