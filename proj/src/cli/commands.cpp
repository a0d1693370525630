#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "nmrl/analysis.hpp"
#include "nmrl/checkpoint.hpp"
#include "nmrl/cli.hpp"
#include "nmrl/common.hpp"
#include "nmrl/config.hpp"
#include "nmrl/meta.hpp"

namespace nmrl {

namespace fs = std::filesystem;

namespace {

// meta-test protocol for test/compare reporting
constexpr std::size_t kCompareTasks = 20;
constexpr std::size_t kCompareSteps = 4;

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot open '" + path + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw ConfigError("failed writing '" + path + "'");
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string fmt4(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

struct TrainedRun {
    std::string out_dir;
    MetaTrainResult result;
};

TrainedRun train_run(const RunConfig& cfg, std::size_t workers) {
    const auto family = make_family(cfg);
    const PolicySpec spec = build_policy_spec(cfg, *family);
    const std::string out_dir = resolve_out_dir(cfg);
    fs::create_directories(out_dir);
    write_file(out_dir + "/config.ini", render_config(cfg));

    MetaConfig mcfg = cfg.meta;
    mcfg.n_workers = workers;
    std::ofstream log(out_dir + "/train_log.jsonl", std::ios::binary | std::ios::trunc);
    if (!log) throw ConfigError("cannot open '" + out_dir + "/train_log.jsonl' for writing");
    const SnapshotFn snap = [&](const std::string& tag, std::size_t iteration,
                                const PolicyParams& params) {
        save_checkpoint(out_dir + "/checkpoint_" + tag + ".nmrl",
                        Checkpoint{cfg, tag, iteration, params});
    };
    TrainedRun run{out_dir, meta_train(*family, spec, mcfg, &log, snap)};
    return run;
}

std::string curve_csv(const MetaTestResult& r) {
    std::string s = "step,mean_return\n";
    for (std::size_t k = 0; k < r.mean_returns.size(); ++k)
        s += std::to_string(k) + "," + fmt(r.mean_returns[k]) + "\n";
    return s;
}

std::string per_task_csv(const EnvFamily& family, const MetaTestResult& r) {
    std::string s = "task,task_info,step,mean_return\n";
    for (std::size_t t = 0; t < r.per_task_returns.size(); ++t)
        for (std::size_t k = 0; k < r.per_task_returns[t].size(); ++k)
            s += std::to_string(t) + "," + family.task_str(r.tasks[t]) + "," +
                 std::to_string(k) + "," + fmt(r.per_task_returns[t][k]) + "\n";
    return s;
}

} // namespace

int cmd_train(const std::string& config_path, std::size_t workers) {
    const RunConfig cfg = load_run_config(config_path);
    const TrainedRun run = train_run(cfg, workers);
    const IterRecord& best = run.result.history[run.result.best_iter];
    std::cout << "run " << cfg.run_name << ": " << cfg.meta.n_iterations
              << " iterations, best post-adaptation mean return " << fmt4(best.mean_post)
              << " at iteration " << run.result.best_iter << "\n"
              << "outputs: " << run.out_dir << "\n";
    return 0;
}

int cmd_test(const std::string& checkpoint_path, std::size_t steps, std::size_t tasks,
             std::optional<std::uint64_t> seed) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const auto family = make_family(ck.cfg);
    const PolicySpec spec = build_policy_spec(ck.cfg, *family);
    const std::uint64_t s = seed.value_or(ck.cfg.seed);

    const MetaTestResult r = meta_test(*family, spec, ck.params, ck.cfg.meta, tasks, steps, s);

    const fs::path dir = fs::path(checkpoint_path).parent_path();
    const std::string stem = "meta_test_" + ck.tag;
    write_file((dir / (stem + "_curve.csv")).string(), curve_csv(r));
    write_file((dir / (stem + "_tasks.csv")).string(), per_task_csv(*family, r));

    std::cout << "checkpoint " << ck.tag << " (iteration " << ck.iteration << "), "
              << tasks << " tasks, seed " << s << "\n";
    for (std::size_t k = 0; k < r.mean_returns.size(); ++k)
        std::cout << "step " << k << ": mean return " << fmt4(r.mean_returns[k]) << "\n";
    return 0;
}

int cmd_analyze(const std::string& checkpoint_path) {
    const Checkpoint ck = load_checkpoint(checkpoint_path);
    const auto family = make_family(ck.cfg);
    const PolicySpec spec = build_policy_spec(ck.cfg, *family);

    const std::uint64_t seed = derive_seed(ck.cfg.seed, "analyze");
    Rng task_rng = derive_rng(seed, "tasks");
    const std::vector<Task> tasks = family->analysis_tasks(ck.cfg.analysis_tasks, task_rng);
    if (tasks.size() < 2) throw ConfigError("analyze: needs at least 2 analysis tasks");

    const MetaTestResult r =
        meta_test_on(*family, spec, ck.params, ck.cfg.meta, tasks, ck.cfg.analysis_steps, seed);
    const auto probes = family->probe_inputs(ck.cfg.probe_count, ck.cfg.probe_seed);
    const HeatmapSet h = build_heatmaps(*family, spec, ck.params, r.phis, probes);

    const fs::path dir = fs::path(checkpoint_path).parent_path() / ("cka_" + ck.tag);
    fs::create_directories(dir);
    for (const CKAMatrix& m : h.matrices)
        write_file((dir / ("cka_layer" + std::to_string(m.layer) + "_step" +
                           std::to_string(m.grad_step) + ".csv"))
                       .string(),
                   heatmap_csv(m));
    write_file((dir / "cka_long.csv").string(), long_format_csv(h));

    const std::vector<double> dis = dissimilarity_summary(h);
    std::string dis_csv = "step,dissimilarity,mean_return\n";
    for (std::size_t k = 0; k < dis.size(); ++k)
        dis_csv += std::to_string(k) + "," + fmt(dis[k]) + "," + fmt(r.mean_returns[k]) + "\n";
    write_file((dir / "dissimilarity.csv").string(), dis_csv);

    std::cout << "analysis of " << ck.tag << ": " << tasks.size() << " tasks, "
              << probes.size() << " probes, " << h.n_layers << " layers\n";
    for (std::size_t k = 0; k < dis.size(); ++k)
        std::cout << "step " << k << ": dissimilarity " << fmt4(dis[k]) << ", mean return "
                  << fmt4(r.mean_returns[k]) << "\n";
    std::cout << "tables: " << dir.string() << "\n";
    return 0;
}

int cmd_compare(const std::string& spn_config_path, const std::string& npn_config_path,
                std::size_t workers) {
    const RunConfig spn_cfg = load_run_config(spn_config_path);
    const RunConfig npn_cfg = load_run_config(npn_config_path);
    if (spn_cfg.layer_kind != LayerKind::standard)
        throw ConfigError("compare: --spn config must have policy.layer_kind = standard");
    if (npn_cfg.layer_kind != LayerKind::neuromodulated)
        throw ConfigError("compare: --npn config must have policy.layer_kind = neuromodulated");
    if (spn_cfg.env_name != npn_cfg.env_name ||
        (spn_cfg.env_name == "ct_graph" && (spn_cfg.ct.branch != npn_cfg.ct.branch ||
                                            spn_cfg.ct.depth != npn_cfg.ct.depth)))
        throw ConfigError("compare: configs describe different environments");

    const auto npn_family = make_family(npn_cfg);
    const PolicySpec npn_spec = build_policy_spec(npn_cfg, *npn_family);

    // third arm: the SPN widened until its parameter count matches the NPN's
    RunConfig large_cfg = spn_cfg;
    large_cfg.run_name = spn_cfg.run_name + "_large";
    large_cfg.out_dir.clear();
    large_cfg.hidden = matched_spn_spec(npn_spec).hidden_sizes;

    struct Row {
        std::string name, arch, hidden;
        std::size_t params = 0;
        double step0 = 0.0, step_last = 0.0;
    };
    std::vector<Row> rows;
    for (const RunConfig& cfg : {spn_cfg, npn_cfg, large_cfg}) {
        const std::string out_dir = resolve_out_dir(cfg);
        const std::string ckpt = out_dir + "/checkpoint_final.nmrl";
        if (!fs::exists(ckpt)) {
            std::cout << "training " << cfg.run_name << "...\n";
            train_run(cfg, workers);
        }
        const Checkpoint ck = load_checkpoint(ckpt);
        const auto family = make_family(ck.cfg);
        const PolicySpec spec = build_policy_spec(ck.cfg, *family);
        const MetaTestResult r = meta_test(*family, spec, ck.params, ck.cfg.meta, kCompareTasks,
                                           kCompareSteps, ck.cfg.seed);
        Row row;
        row.name = cfg.run_name;
        row.arch = cfg.layer_kind == LayerKind::standard ? "spn" : "npn";
        for (std::size_t i = 0; i < cfg.hidden.size(); ++i)
            row.hidden += (i ? "x" : "") + std::to_string(cfg.hidden[i]);
        row.params = count_params(spec);
        row.step0 = r.mean_returns.front();
        row.step_last = r.mean_returns.back();
        rows.push_back(row);
    }

    const double ratio =
        static_cast<double>(rows[2].params) / static_cast<double>(rows[1].params);
    std::string csv = "name,arch,hidden,params,step0,step" + std::to_string(kCompareSteps) + "\n";
    std::cout << "name | arch | hidden | params | step 0 | step " << kCompareSteps << "\n";
    for (const Row& r : rows) {
        std::cout << r.name << " | " << r.arch << " | " << r.hidden << " | " << r.params << " | "
                  << fmt4(r.step0) << " | " << fmt4(r.step_last) << "\n";
        csv += r.name + "," + r.arch + "," + r.hidden + "," + std::to_string(r.params) + "," +
               fmt(r.step0) + "," + fmt(r.step_last) + "\n";
    }
    std::cout << "spn-large/npn parameter ratio: " << fmt4(ratio) << "\n";

    const std::string out = resolve_out_dir(npn_cfg) + "/compare_summary.csv";
    write_file(out, csv);
    std::cout << "table: " << out << "\n";
    return 0;
}

} // namespace nmrl
