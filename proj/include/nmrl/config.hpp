#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "nmrl/envs.hpp"
#include "nmrl/layers.hpp"
#include "nmrl/meta.hpp"

namespace nmrl {

// A full experiment description. Parsed from INI-style text with [env],
// [policy], [meta] and [analysis] sections; unset keys fall back to the
// per-environment defaults built into resolve_defaults (the Table A1
// columns). Unknown keys are rejected.
struct RunConfig {
    std::string run_name = "run";
    std::uint64_t seed = 1;
    std::string out_dir; // empty: <output root>/<run_name>

    std::string env_name = "ct_graph";
    CTGraphConfig ct;
    Nav2DConfig nav;

    LayerKind layer_kind = LayerKind::neuromodulated;
    GateMode gate_mode = GateMode::magnitude;
    std::size_t context_dim = 0;        // 0: default for the env
    std::vector<std::size_t> hidden{};  // empty: default for the env
    std::size_t nm_size = 0;            // 0: default for the env

    MetaConfig meta;

    std::size_t probe_count = 256; // nav2d only; ct_graph enumerates all nodes
    std::uint64_t probe_seed = 7;
    std::size_t analysis_tasks = 4;
    std::size_t analysis_steps = 4;
};

RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);
// The fully resolved config as parseable INI, key order fixed. Feeding the
// output back through parse_run_config is the identity.
std::string render_config(const RunConfig& cfg);

std::unique_ptr<EnvFamily> make_family(const RunConfig& cfg);
PolicySpec build_policy_spec(const RunConfig& cfg, const EnvFamily& family);

// Explicit out_dir, else $NMRL_OUT_ROOT/<run_name>, else runs/<run_name>.
std::string resolve_out_dir(const RunConfig& cfg);

} // namespace nmrl
