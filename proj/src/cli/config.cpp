#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "nmrl/common.hpp"
#include "nmrl/config.hpp"

namespace nmrl {

namespace {

std::string trim(const std::string& s) {
    const char* ws = " \t\r\n";
    const std::size_t a = s.find_first_not_of(ws);
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(ws);
    return s.substr(a, b - a + 1);
}

// "section.key" -> value, in declaration order for error messages
struct KeyValues {
    std::map<std::string, std::string> kv;

    std::optional<std::string> take(const std::string& key) {
        auto it = kv.find(key);
        if (it == kv.end()) return std::nullopt;
        std::string v = it->second;
        kv.erase(it);
        return v;
    }
};

KeyValues read_ini(const std::string& text) {
    KeyValues out;
    std::string section;
    std::istringstream in(text);
    std::string raw;
    std::size_t lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        const std::size_t hash = raw.find('#');
        std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(lineno) +
                                  ": malformed section header '" + line + "'");
            section = trim(line.substr(1, line.size() - 2));
            if (section.empty())
                throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
            continue;
        }
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value, got '" +
                              line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
        const std::string full = section.empty() ? key : section + "." + key;
        if (out.kv.count(full))
            throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + full +
                              "'");
        out.kv[full] = val;
    }
    return out;
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
        const unsigned long long x = std::stoull(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected non-negative integer, got '" + v + "'");
    }
}

double parse_double(const std::string& key, const std::string& v) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument("trailing");
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config key '" + key + "': expected number, got '" + v + "'");
    }
}

std::vector<std::size_t> parse_size_list(const std::string& key, const std::string& v) {
    std::vector<std::size_t> out;
    if (!v.empty() && v.back() == ',')
        throw ConfigError("config key '" + key + "': empty list item");
    std::string item;
    std::istringstream in(v);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("config key '" + key + "': empty list item");
        out.push_back(static_cast<std::size_t>(parse_u64(key, item)));
    }
    return out;
}

// Table A1 column for the environment; CT-graph rows keyed by depth.
struct Defaults {
    std::size_t iterations, batch, traj_train, traj_test, context, hidden, nm;
};

Defaults env_defaults(const std::string& env_name, std::size_t depth) {
    if (env_name == "nav2d") return {500, 20, 20, 20, 5, 100, 4};
    switch (depth) {
    case 3: return {700, 25, 25, 40, 10, 300, 16};
    case 4: return {1500, 20, 60, 100, 20, 600, 32};
    default: return {500, 20, 20, 40, 5, 200, 8}; // depth-2 column
    }
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

} // namespace

RunConfig parse_run_config(const std::string& text) {
    KeyValues ini = read_ini(text);
    RunConfig cfg;

    if (auto v = ini.take("run_name")) cfg.run_name = *v;
    if (cfg.run_name.empty()) throw ConfigError("config: run_name must not be empty");
    if (auto v = ini.take("seed")) cfg.seed = parse_u64("seed", *v);
    if (auto v = ini.take("out_dir")) cfg.out_dir = *v;

    if (auto v = ini.take("env.name")) cfg.env_name = *v;
    if (cfg.env_name != "nav2d" && cfg.env_name != "ct_graph")
        throw ConfigError("config key 'env.name': expected nav2d or ct_graph, got '" +
                          cfg.env_name + "'");
    if (cfg.env_name == "ct_graph") {
        if (auto v = ini.take("env.branch"))
            cfg.ct.branch = static_cast<std::size_t>(parse_u64("env.branch", *v));
        if (auto v = ini.take("env.depth"))
            cfg.ct.depth = static_cast<std::size_t>(parse_u64("env.depth", *v));
        if (auto v = ini.take("env.crash_reward"))
            cfg.ct.crash_reward = parse_double("env.crash_reward", *v);
        if (auto v = ini.take("env.goal_reward"))
            cfg.ct.goal_reward = parse_double("env.goal_reward", *v);
    } else {
        if (auto v = ini.take("env.horizon"))
            cfg.nav.horizon = static_cast<std::size_t>(parse_u64("env.horizon", *v));
        if (auto v = ini.take("env.goal_eps")) cfg.nav.goal_eps = parse_double("env.goal_eps", *v);
        if (auto v = ini.take("env.action_clip"))
            cfg.nav.action_clip = parse_double("env.action_clip", *v);
    }

    const Defaults d = env_defaults(cfg.env_name, cfg.ct.depth);

    if (auto v = ini.take("policy.layer_kind")) {
        if (*v == "standard")
            cfg.layer_kind = LayerKind::standard;
        else if (*v == "neuromodulated")
            cfg.layer_kind = LayerKind::neuromodulated;
        else
            throw ConfigError(
                "config key 'policy.layer_kind': expected standard or neuromodulated, got '" + *v +
                "'");
    }
    if (auto v = ini.take("policy.gate_mode")) {
        if (*v == "magnitude")
            cfg.gate_mode = GateMode::magnitude;
        else if (*v == "strict")
            cfg.gate_mode = GateMode::strict;
        else
            throw ConfigError("config key 'policy.gate_mode': expected magnitude or strict, got '" +
                              *v + "'");
    }
    cfg.context_dim = d.context;
    if (auto v = ini.take("policy.context_dim"))
        cfg.context_dim = static_cast<std::size_t>(parse_u64("policy.context_dim", *v));
    cfg.hidden = {d.hidden, d.hidden};
    if (auto v = ini.take("policy.hidden")) cfg.hidden = parse_size_list("policy.hidden", *v);
    if (cfg.hidden.empty()) throw ConfigError("config key 'policy.hidden': needs at least one layer");
    cfg.nm_size = d.nm;
    if (auto v = ini.take("policy.nm_size"))
        cfg.nm_size = static_cast<std::size_t>(parse_u64("policy.nm_size", *v));

    cfg.meta.n_iterations = d.iterations;
    cfg.meta.meta_batch_size = d.batch;
    cfg.meta.n_traj_train = d.traj_train;
    cfg.meta.n_traj_test = d.traj_test;
    cfg.meta.seed = cfg.seed;
    if (auto v = ini.take("meta.n_iterations"))
        cfg.meta.n_iterations = static_cast<std::size_t>(parse_u64("meta.n_iterations", *v));
    if (auto v = ini.take("meta.meta_batch_size"))
        cfg.meta.meta_batch_size = static_cast<std::size_t>(parse_u64("meta.meta_batch_size", *v));
    if (auto v = ini.take("meta.n_traj_train"))
        cfg.meta.n_traj_train = static_cast<std::size_t>(parse_u64("meta.n_traj_train", *v));
    if (auto v = ini.take("meta.n_traj_test"))
        cfg.meta.n_traj_test = static_cast<std::size_t>(parse_u64("meta.n_traj_test", *v));
    if (auto v = ini.take("meta.inner_lr")) cfg.meta.inner_lr = parse_double("meta.inner_lr", *v);
    if (auto v = ini.take("meta.outer_lr")) cfg.meta.outer_lr = parse_double("meta.outer_lr", *v);
    if (auto v = ini.take("meta.n_inner_steps_train"))
        cfg.meta.n_inner_steps_train =
            static_cast<std::size_t>(parse_u64("meta.n_inner_steps_train", *v));
    if (auto v = ini.take("meta.n_inner_steps_test"))
        cfg.meta.n_inner_steps_test =
            static_cast<std::size_t>(parse_u64("meta.n_inner_steps_test", *v));
    if (auto v = ini.take("meta.gamma")) cfg.meta.gamma = parse_double("meta.gamma", *v);
    if (auto v = ini.take("meta.gae_lambda"))
        cfg.meta.gae_lambda = parse_double("meta.gae_lambda", *v);
    if (auto v = ini.take("meta.snapshot_iters")) {
        cfg.meta.snapshot_iters.clear();
        for (std::size_t s : parse_size_list("meta.snapshot_iters", *v))
            cfg.meta.snapshot_iters.push_back(s);
    }

    if (auto v = ini.take("analysis.probe_count"))
        cfg.probe_count = static_cast<std::size_t>(parse_u64("analysis.probe_count", *v));
    if (auto v = ini.take("analysis.probe_seed"))
        cfg.probe_seed = parse_u64("analysis.probe_seed", *v);
    if (auto v = ini.take("analysis.n_tasks"))
        cfg.analysis_tasks = static_cast<std::size_t>(parse_u64("analysis.n_tasks", *v));
    if (auto v = ini.take("analysis.n_steps"))
        cfg.analysis_steps = static_cast<std::size_t>(parse_u64("analysis.n_steps", *v));

    if (!ini.kv.empty()) {
        std::string keys;
        for (const auto& [k, _] : ini.kv) keys += (keys.empty() ? "" : ", ") + k;
        throw ConfigError("config: unknown keys: " + keys);
    }

    // schema guards: reject anything no run could execute
    if (cfg.env_name == "ct_graph") {
        if (cfg.ct.branch < 2) throw ConfigError("config key 'env.branch': must be at least 2");
        if (cfg.ct.depth < 1) throw ConfigError("config key 'env.depth': must be at least 1");
    } else if (cfg.nav.horizon == 0) {
        throw ConfigError("config key 'env.horizon': must be positive");
    }
    for (std::size_t h : cfg.hidden)
        if (h == 0) throw ConfigError("config key 'policy.hidden': layer width must be positive");
    if (cfg.context_dim == 0)
        throw ConfigError("config key 'policy.context_dim': must be positive");
    if (cfg.layer_kind == LayerKind::neuromodulated && cfg.nm_size == 0)
        throw ConfigError("config key 'policy.nm_size': must be positive for neuromodulated layers");
    if (cfg.meta.n_iterations == 0)
        throw ConfigError("config key 'meta.n_iterations': must be positive");
    if (cfg.meta.meta_batch_size == 0)
        throw ConfigError("config key 'meta.meta_batch_size': must be positive");
    if (cfg.meta.n_traj_train == 0)
        throw ConfigError("config key 'meta.n_traj_train': must be positive");
    if (cfg.meta.n_traj_test == 0)
        throw ConfigError("config key 'meta.n_traj_test': must be positive");
    if (!(cfg.meta.inner_lr > 0.0))
        throw ConfigError("config key 'meta.inner_lr': must be positive");
    if (!(cfg.meta.outer_lr > 0.0))
        throw ConfigError("config key 'meta.outer_lr': must be positive");
    if (cfg.meta.n_inner_steps_train == 0)
        throw ConfigError("config key 'meta.n_inner_steps_train': must be positive");
    if (cfg.meta.gamma <= 0.0 || cfg.meta.gamma > 1.0)
        throw ConfigError("config key 'meta.gamma': must be in (0, 1]");
    if (cfg.meta.gae_lambda < 0.0 || cfg.meta.gae_lambda > 1.0)
        throw ConfigError("config key 'meta.gae_lambda': must be in [0, 1]");
    if (cfg.probe_count == 0)
        throw ConfigError("config key 'analysis.probe_count': must be positive");
    if (cfg.analysis_tasks == 0)
        throw ConfigError("config key 'analysis.n_tasks': must be positive");
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

std::string render_config(const RunConfig& cfg) {
    std::ostringstream s;
    s << "run_name = " << cfg.run_name << "\n";
    s << "seed = " << cfg.seed << "\n";
    if (!cfg.out_dir.empty()) s << "out_dir = " << cfg.out_dir << "\n";
    s << "\n[env]\n";
    s << "name = " << cfg.env_name << "\n";
    if (cfg.env_name == "ct_graph") {
        s << "branch = " << cfg.ct.branch << "\n";
        s << "depth = " << cfg.ct.depth << "\n";
        s << "crash_reward = " << fmt_double(cfg.ct.crash_reward) << "\n";
        s << "goal_reward = " << fmt_double(cfg.ct.goal_reward) << "\n";
    } else {
        s << "horizon = " << cfg.nav.horizon << "\n";
        s << "goal_eps = " << fmt_double(cfg.nav.goal_eps) << "\n";
        s << "action_clip = " << fmt_double(cfg.nav.action_clip) << "\n";
    }
    s << "\n[policy]\n";
    s << "layer_kind = "
      << (cfg.layer_kind == LayerKind::standard ? "standard" : "neuromodulated") << "\n";
    s << "gate_mode = " << (cfg.gate_mode == GateMode::magnitude ? "magnitude" : "strict") << "\n";
    s << "context_dim = " << cfg.context_dim << "\n";
    s << "hidden = ";
    for (std::size_t i = 0; i < cfg.hidden.size(); ++i)
        s << (i ? "," : "") << cfg.hidden[i];
    s << "\n";
    s << "nm_size = " << cfg.nm_size << "\n";
    s << "\n[meta]\n";
    s << "n_iterations = " << cfg.meta.n_iterations << "\n";
    s << "meta_batch_size = " << cfg.meta.meta_batch_size << "\n";
    s << "n_traj_train = " << cfg.meta.n_traj_train << "\n";
    s << "n_traj_test = " << cfg.meta.n_traj_test << "\n";
    s << "inner_lr = " << fmt_double(cfg.meta.inner_lr) << "\n";
    s << "outer_lr = " << fmt_double(cfg.meta.outer_lr) << "\n";
    s << "n_inner_steps_train = " << cfg.meta.n_inner_steps_train << "\n";
    s << "n_inner_steps_test = " << cfg.meta.n_inner_steps_test << "\n";
    s << "gamma = " << fmt_double(cfg.meta.gamma) << "\n";
    s << "gae_lambda = " << fmt_double(cfg.meta.gae_lambda) << "\n";
    s << "snapshot_iters = ";
    for (std::size_t i = 0; i < cfg.meta.snapshot_iters.size(); ++i)
        s << (i ? "," : "") << cfg.meta.snapshot_iters[i];
    s << "\n";
    s << "\n[analysis]\n";
    s << "probe_count = " << cfg.probe_count << "\n";
    s << "probe_seed = " << cfg.probe_seed << "\n";
    s << "n_tasks = " << cfg.analysis_tasks << "\n";
    s << "n_steps = " << cfg.analysis_steps << "\n";
    return s.str();
}

std::unique_ptr<EnvFamily> make_family(const RunConfig& cfg) {
    if (cfg.env_name == "nav2d") return std::make_unique<Nav2DFamily>(cfg.nav);
    return std::make_unique<CTGraphFamily>(cfg.ct);
}

PolicySpec build_policy_spec(const RunConfig& cfg, const EnvFamily& family) {
    PolicySpec spec;
    spec.input_dim = family.obs_dim();
    spec.context_dim = cfg.context_dim;
    spec.hidden_sizes = cfg.hidden;
    // the modulatory width is meaningless for plain layers; keep specs canonical
    spec.nm_size = cfg.layer_kind == LayerKind::neuromodulated ? cfg.nm_size : 0;
    spec.layer_kind = cfg.layer_kind;
    spec.gate_mode = cfg.gate_mode;
    spec.head = family.head_kind();
    spec.head_dim = family.action_space();
    return spec;
}

std::string resolve_out_dir(const RunConfig& cfg) {
    if (!cfg.out_dir.empty()) return cfg.out_dir;
    if (const char* root = std::getenv("NMRL_OUT_ROOT"); root && *root)
        return std::string(root) + "/" + cfg.run_name;
    return "runs/" + cfg.run_name;
}

} // namespace nmrl
