#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "nmrl/layers.hpp"
#include "nmrl/rng.hpp"

namespace nmrl {

struct StepResult {
    std::vector<double> obs;
    double reward = 0.0;
    bool done = false;
    std::map<std::string, double> info;
};

// --- 2D point navigation -------------------------------------------------
// Fixed start at the origin; goals uniform in [-0.5, 0.5]^2; actions are
// velocity commands clipped to [-0.1, 0.1] per coordinate; reward is the
// negative squared distance to the goal after moving.

struct Nav2DTask {
    std::array<double, 2> goal{};
};

struct Nav2DConfig {
    std::size_t horizon = 100;
    double goal_eps = 0.01;
    double action_clip = 0.1;
};

struct Nav2DState {
    std::array<double, 2> pos{};
    std::size_t t = 0;
    std::size_t horizon = 100;
    bool done = false;
};

std::vector<Nav2DTask> nav2d_sample_tasks(std::size_t n, Rng& rng);
std::vector<double> nav2d_reset(Nav2DState& st, const Nav2DConfig& cfg);
StepResult nav2d_step(Nav2DState& st, const Nav2DTask& task, const Nav2DConfig& cfg,
                      std::array<double, 2> action);

// --- CT-graph -------------------------------------------------------------
// A tree of alternating wait and decision states: start (wait kind) ->
// decision -> wait -> decision -> ... -> leaf, with b^d leaves at depth d.
// Action 0 is the wait/forward action, actions 1..b pick a decision branch.
// A decision action at a wait state or a wait action at a decision state
// crashes the episode (-0.01); reaching the goal leaf pays 1.0, any other
// leaf 0.0. Observations are one-hot over node ids.

enum class CTNodeKind { start, crash, wait, decision, leaf };

struct CTGraphConfig {
    std::size_t branch = 2;
    std::size_t depth = 2;
    double crash_reward = -0.01;
    double goal_reward = 1.0;
};

struct CTGraphTask {
    std::size_t goal_index = 0;
};

struct CTGraphNode {
    CTNodeKind kind = CTNodeKind::start;
    std::size_t level = 0;
    std::vector<std::size_t> children; // wait/start: 1 entry; decision: b entries
    std::size_t leaf_index = 0;        // leaves only
};

// Node ids: 0 = start, 1 = crash, then level order (the level-0 decision,
// then per level all waits followed by all decisions, subtrees in branch
// order), leaves last in goal-index order.
struct CTGraph {
    CTGraphConfig cfg;
    std::vector<CTGraphNode> nodes;
    std::size_t n_leaves() const;
    std::size_t obs_len() const { return nodes.size(); }
    std::size_t first_leaf() const { return nodes.size() - n_leaves(); }
};

CTGraph ctgraph_build(const CTGraphConfig& cfg);

struct CTGraphState {
    std::size_t node = 0;
    bool done = false;
};

std::vector<double> ctgraph_obs(const CTGraph& g, std::size_t node);
std::vector<double> ctgraph_reset(const CTGraph& g, CTGraphState& st);
StepResult ctgraph_step(const CTGraph& g, CTGraphState& st, const CTGraphTask& task,
                        std::size_t action);
std::vector<CTGraphTask> ctgraph_sample_tasks(const CTGraph& g, std::size_t n, Rng& rng);

// --- Family interface for the meta loop -----------------------------------

using Task = std::variant<Nav2DTask, CTGraphTask>;

class TaskEnv {
public:
    virtual ~TaskEnv() = default;
    virtual std::vector<double> reset() = 0;
    virtual StepResult step_discrete(std::size_t action);
    virtual StepResult step_continuous(const std::vector<double>& action);
    virtual bool done() const = 0;
};

class EnvFamily {
public:
    virtual ~EnvFamily() = default;
    virtual std::string name() const = 0;
    virtual std::size_t obs_dim() const = 0;
    virtual HeadKind head_kind() const = 0;
    // Action count for categorical heads, action dimension for gaussian.
    virtual std::size_t action_space() const = 0;
    // Upper bound on episode length; also normalizes the baseline's time
    // feature.
    virtual std::size_t horizon() const = 0;
    virtual std::vector<Task> sample_tasks(std::size_t n, Rng& rng) const = 0;
    // Distinct tasks for the similarity analysis. Default draws from
    // sample_tasks; finite task spaces override to enumerate (and may return
    // fewer than requested).
    virtual std::vector<Task> analysis_tasks(std::size_t n, Rng& rng) const {
        return sample_tasks(n, rng);
    }
    virtual std::unique_ptr<TaskEnv> make_env(const Task& task) const = 0;
    // A fixed probe set for representation analysis; identical across tasks.
    virtual std::vector<std::vector<double>> probe_inputs(std::size_t count,
                                                          std::uint64_t seed) const = 0;
    // Human-readable task tag for logs.
    virtual std::string task_str(const Task& task) const = 0;
};

class Nav2DFamily : public EnvFamily {
public:
    explicit Nav2DFamily(Nav2DConfig cfg = {}) : cfg_(cfg) {}
    std::string name() const override { return "nav2d"; }
    std::size_t obs_dim() const override { return 2; }
    HeadKind head_kind() const override { return HeadKind::gaussian; }
    std::size_t action_space() const override { return 2; }
    std::size_t horizon() const override { return cfg_.horizon; }
    std::vector<Task> sample_tasks(std::size_t n, Rng& rng) const override;
    std::unique_ptr<TaskEnv> make_env(const Task& task) const override;
    std::vector<std::vector<double>> probe_inputs(std::size_t count,
                                                  std::uint64_t seed) const override;
    std::string task_str(const Task& task) const override;
    const Nav2DConfig& config() const { return cfg_; }

private:
    Nav2DConfig cfg_;
};

class CTGraphFamily : public EnvFamily {
public:
    explicit CTGraphFamily(CTGraphConfig cfg = {}) : graph_(ctgraph_build(cfg)) {}
    std::string name() const override { return "ct_graph"; }
    std::size_t obs_dim() const override { return graph_.obs_len(); }
    HeadKind head_kind() const override { return HeadKind::categorical; }
    std::size_t action_space() const override { return graph_.cfg.branch + 1; }
    std::size_t horizon() const override { return 2 * graph_.cfg.depth; }
    std::vector<Task> sample_tasks(std::size_t n, Rng& rng) const override;
    // The first min(n, leaf count) goals in leaf order.
    std::vector<Task> analysis_tasks(std::size_t n, Rng& rng) const override;
    std::unique_ptr<TaskEnv> make_env(const Task& task) const override;
    std::vector<std::vector<double>> probe_inputs(std::size_t count,
                                                  std::uint64_t seed) const override;
    std::string task_str(const Task& task) const override;
    const CTGraph& graph() const { return graph_; }

private:
    CTGraph graph_;
};

} // namespace nmrl
