// End-to-end acceptance gate. Each criterion prints one [PASS]/[FAIL] line;
// the exit code is the number of failed criteria. Training runs are cached
// under NMRL_ACCEPT_DIR (default: ./acceptance_runs) keyed by a config
// fingerprint, so re-runs only retrain what changed.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "nmrl/ad/ops.hpp"
#include "nmrl/ad/tape.hpp"
#include "nmrl/analysis.hpp"
#include "nmrl/common.hpp"
#include "nmrl/envs.hpp"
#include "nmrl/kernels.hpp"
#include "nmrl/layers.hpp"
#include "nmrl/meta.hpp"
#include "nmrl/rng.hpp"
#include "test_util.hpp"

using namespace nmrl;
using ad::Tensor;
namespace ops = ad::ops;
namespace fs = std::filesystem;
using testutil::fd_check;
using testutil::rand_tensor;

namespace {

int g_failures = 0;

void report(int num, const std::string& name, bool pass, const std::string& detail) {
    std::printf("[%s] criterion %d: %s%s%s\n", pass ? "PASS" : "FAIL", num, name.c_str(),
                detail.empty() ? "" : " | ", detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

void run_criterion(int num, const std::string& name, const std::function<Outcome()>& body) {
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    report(num, name, o.pass, o.detail);
}

// Collects sub-check failures so the report names every violated bound.
struct Gate {
    bool ok = true;
    std::string why;
    void need(bool cond, const std::string& label) {
        if (cond) return;
        ok = false;
        why += (why.empty() ? "" : "; ") + label;
    }
    std::string detail(const std::string& numbers) const {
        if (ok) return numbers;
        return numbers.empty() ? "violated: " + why : numbers + " | violated: " + why;
    }
};

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

double now_seconds() {
    using clock = std::chrono::steady_clock;
    static const clock::time_point t0 = clock::now();
    return std::chrono::duration<double>(clock::now() - t0).count();
}

// --- cached training runs ---------------------------------------------------

fs::path accept_root() {
    if (const char* e = std::getenv("NMRL_ACCEPT_DIR"); e && *e) return fs::path(e);
    return fs::path("acceptance_runs");
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) return "";
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_file(const fs::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ContractError("acceptance: cannot write " + p.string());
}

std::size_t pick_workers() {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 4 : std::min<std::size_t>(16, hw);
}

std::string fingerprint(const PolicySpec& spec, const MetaConfig& cfg) {
    std::ostringstream o;
    o << "pipe=lin-decay "; // bump when the training loop itself changes
    o << "in=" << spec.input_dim << " ctx=" << spec.context_dim << " hidden=";
    for (std::size_t h : spec.hidden_sizes) o << h << ",";
    o << " nm=" << spec.nm_size << " kind="
      << (spec.layer_kind == LayerKind::neuromodulated ? "npn" : "spn")
      << " head=" << spec.head_dim << " iters=" << cfg.n_iterations
      << " batch=" << cfg.meta_batch_size << " traj=" << cfg.n_traj_train << "/"
      << cfg.n_traj_test << " ilr=" << cfg.inner_lr << " olr=" << cfg.outer_lr
      << " gamma=" << cfg.gamma << " lambda=" << cfg.gae_lambda << " seed=" << cfg.seed << "\n";
    return o.str();
}

std::string history_csv(const std::vector<IterRecord>& h) {
    std::ostringstream o;
    o << "iter,mean_pre,mean_post,mean_outer_loss\n";
    char buf[160];
    for (const IterRecord& r : h) {
        std::snprintf(buf, sizeof(buf), "%llu,%.17g,%.17g,%.17g\n",
                      static_cast<unsigned long long>(r.iter), r.mean_pre, r.mean_post,
                      r.mean_outer_loss);
        o << buf;
    }
    return o.str();
}

std::vector<IterRecord> parse_history(const std::string& text) {
    std::vector<IterRecord> out;
    std::istringstream in(text);
    std::string line;
    std::getline(in, line); // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        IterRecord r;
        unsigned long long it = 0;
        if (std::sscanf(line.c_str(), "%llu,%lg,%lg,%lg", &it, &r.mean_pre, &r.mean_post,
                        &r.mean_outer_loss) != 4)
            throw ContractError("acceptance: bad history line '" + line + "'");
        r.iter = static_cast<std::size_t>(it);
        out.push_back(r);
    }
    return out;
}

struct RunArtifacts {
    PolicyParams final_params;
    std::vector<IterRecord> history;
};

RunArtifacts train_or_load(const std::string& name, const EnvFamily& fam, const PolicySpec& spec,
                           MetaConfig cfg) {
    const fs::path dir = accept_root() / name;
    fs::create_directories(dir);
    const fs::path fp = dir / "fingerprint.txt";
    const fs::path fin = dir / "params_final.bin";
    const fs::path hist = dir / "history.csv";
    const std::string want_fp = fingerprint(spec, cfg);

    RunArtifacts out;
    if (read_file(fp) == want_fp && fs::exists(fin) && fs::exists(hist)) {
        out.final_params = unpack_params(decode_tensors(read_file(fin)), spec);
        out.history = parse_history(read_file(hist));
        std::printf("  [cache] %s\n", name.c_str());
        std::fflush(stdout);
        return out;
    }

    std::printf("  [train] %s (%llu iterations)...\n", name.c_str(),
                static_cast<unsigned long long>(cfg.n_iterations));
    std::fflush(stdout);
    const double t0 = now_seconds();
    cfg.n_workers = pick_workers();
    cfg.snapshot_iters.clear();
    MetaTrainResult res = meta_train(fam, spec, cfg, nullptr, nullptr);
    write_file(fin, encode_tensors(pack_params(res.final_params, spec)));
    write_file(hist, history_csv(res.history));
    write_file(fp, want_fp); // written last: marks the cache entry complete
    out.final_params = res.final_params;
    out.history = res.history;
    std::printf("  [train] %s done in %.0f s\n", name.c_str(), now_seconds() - t0);
    std::fflush(stdout);
    return out;
}

// --- experiment configs -------------------------------------------------------

constexpr std::uint64_t kSeeds[] = {1, 2, 3};
constexpr std::size_t kNumSeeds = 3;

PolicySpec ct_spec(LayerKind kind) {
    CTGraphFamily fam{CTGraphConfig{}};
    PolicySpec spec;
    spec.input_dim = fam.obs_dim(); // 11 nodes
    spec.context_dim = 5;
    spec.hidden_sizes = {200, 200};
    spec.nm_size = 8;
    spec.layer_kind = kind;
    spec.head = fam.head_kind();
    spec.head_dim = fam.action_space();
    return spec;
}

// Calibrated for the Adam outer step: the default 7e-4 is tuned for nav2d's
// dense rewards and learns the sparse ct-graph too slowly to converge within
// the 500-iteration budget.
constexpr double kCtOuterLr = 2e-3;

MetaConfig ct_cfg(std::uint64_t seed, std::size_t iters) {
    MetaConfig cfg;
    cfg.n_iterations = iters;
    cfg.meta_batch_size = 20;
    cfg.n_traj_train = 20;
    cfg.n_traj_test = 40;
    cfg.outer_lr = kCtOuterLr;
    cfg.seed = seed;
    return cfg;
}

PolicySpec nav_spec(LayerKind kind) {
    Nav2DFamily fam{Nav2DConfig{}};
    PolicySpec spec;
    spec.input_dim = fam.obs_dim();
    spec.context_dim = 5;
    spec.hidden_sizes = {100, 100};
    spec.nm_size = 4;
    spec.layer_kind = kind;
    spec.head = fam.head_kind();
    spec.head_dim = fam.action_space();
    return spec;
}

MetaConfig nav_cfg(std::uint64_t seed) {
    MetaConfig cfg;
    cfg.n_iterations = 500;
    cfg.meta_batch_size = 20;
    cfg.n_traj_train = 20;
    cfg.n_traj_test = 20;
    cfg.seed = seed;
    return cfg;
}

// Adaptation curve over all four depth-2 leaves, four gradient steps.
std::vector<double> eval_ct_curve(const CTGraphFamily& fam, const PolicySpec& spec,
                                  const PolicyParams& params, const MetaConfig& cfg,
                                  std::uint64_t eval_seed) {
    Rng r(1);
    const std::vector<Task> tasks = fam.analysis_tasks(fam.graph().n_leaves(), r);
    return meta_test_on(fam, spec, params, cfg, tasks, 4, eval_seed).mean_returns;
}

double mean_of(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

// --- shared artifacts across criteria -----------------------------------------

struct CtArtifacts {
    bool ready = false;
    std::vector<RunArtifacts> npn, spn;              // full-budget runs, indexed by seed
    std::vector<RunArtifacts> npn150, spn150;        // reduced-budget runs
    std::vector<double> npn_step4, spn_step4;        // full-run eval per seed
    std::vector<double> npn150_step4, spn150_step4;  // reduced-run eval per seed
};

struct NavArtifacts {
    bool ready = false;
    std::vector<RunArtifacts> npn, spn;
    std::vector<std::vector<double>> npn_curves, spn_curves; // per seed, steps 0..4
};

// --- criterion 1: gradient correctness ------------------------------------------

Outcome criterion1() {
    const double t0 = now_seconds();
    Gate g;
    Rng rng(101);

    // plain affine layer
    LinearParams lin{rand_tensor(4, 3, rng, -0.8, 0.8), rand_tensor(1, 4, rng, -0.5, 0.5)};
    Tensor lx = rand_tensor(5, 3, rng, -1.0, 1.0, false);
    auto lin_loss = [&] { return ops::mean(ops::tanh(linear_forward(lx, lin))); };
    const auto r_lin = fd_check(lin_loss, {lin.W, lin.b});
    g.need(r_lin.max_rel_err < 1e-4, "linear layer fd err " + fmt(r_lin.max_rel_err));

    // neuromodulated layer, magnitude gating
    NMLinearParams nm;
    nm.W_s = rand_tensor(4, 3, rng, -0.8, 0.8);
    nm.b_s = rand_tensor(1, 4, rng, -0.5, 0.5);
    nm.W_g = rand_tensor(2, 3, rng, -0.8, 0.8);
    nm.b_g = rand_tensor(1, 2, rng, 0.1, 0.5);
    nm.W_m = rand_tensor(4, 2, rng, -0.8, 0.8);
    nm.b_m = rand_tensor(1, 4, rng, -0.5, 0.5);
    Tensor nx = rand_tensor(5, 3, rng, -1.0, 1.0, false);
    auto nm_loss = [&] { return ops::mean(ops::tanh(nm_forward(nx, nm))); };
    const auto r_nm = fd_check(nm_loss, {nm.W_s, nm.b_s, nm.W_g, nm.b_g, nm.W_m, nm.b_m});
    g.need(r_nm.max_rel_err < 1e-4, "nm layer fd err " + fmt(r_nm.max_rel_err));

    // full NM policy, categorical head
    double cat_err = 0.0;
    {
        PolicySpec spec;
        spec.input_dim = 6;
        spec.context_dim = 3;
        spec.hidden_sizes = {8, 8};
        spec.nm_size = 3;
        spec.layer_kind = LayerKind::neuromodulated;
        spec.head = HeadKind::categorical;
        spec.head_dim = 4;
        Rng init(102);
        PolicyParams params = init_policy(spec, init);
        Tensor obs = rand_tensor(5, 6, rng, -1.0, 1.0, false);
        std::vector<std::size_t> acts = {0, 3, 1, 2, 1};
        Tensor w = rand_tensor(5, 1, rng, -1.0, 1.0, false);
        std::vector<Tensor> ps = params.theta();
        ps.push_back(params.phi);
        auto loss = [&] {
            Distribution d = policy_forward(obs, params, spec);
            return ops::mean(ops::ewise_mul(log_prob_categorical(d, acts), w));
        };
        cat_err = fd_check(loss, ps).max_rel_err;
        g.need(cat_err < 1e-4, "categorical policy fd err " + fmt(cat_err));
    }

    // full NM policy, gaussian head (log_std sits in theta)
    double gauss_err = 0.0;
    {
        PolicySpec spec;
        spec.input_dim = 2;
        spec.context_dim = 3;
        spec.hidden_sizes = {8, 8};
        spec.nm_size = 3;
        spec.layer_kind = LayerKind::neuromodulated;
        spec.head = HeadKind::gaussian;
        spec.head_dim = 2;
        Rng init(103);
        PolicyParams params = init_policy(spec, init);
        Tensor obs = rand_tensor(5, 2, rng, -1.0, 1.0, false);
        std::vector<std::vector<double>> acts;
        for (int i = 0; i < 5; ++i) acts.push_back({rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2)});
        Tensor w = rand_tensor(5, 1, rng, -1.0, 1.0, false);
        std::vector<Tensor> ps = params.theta();
        ps.push_back(params.phi);
        auto loss = [&] {
            Distribution d = policy_forward(obs, params, spec);
            return ops::mean(ops::ewise_mul(log_prob_gaussian(d, acts), w));
        };
        gauss_err = fd_check(loss, ps).max_rel_err;
        g.need(gauss_err < 1e-4, "gaussian policy fd err " + fmt(gauss_err));
    }

    // meta-gradient through one inner step vs the quadratic closed form
    double quad_err = 0.0;
    {
        const double a = 0.7, alpha = 0.3, theta0 = 1.3, phi0 = -0.4;
        Tensor theta = Tensor::scalar(theta0, true);
        Tensor phi = Tensor::scalar(phi0, true);
        ad::Tape tape;
        ad::TapeScope scope(tape);
        Tensor f = ops::scalar_mul(
            ops::sum(ops::square(ops::sub(theta, ops::scalar_mul(phi, a)))), 0.5);
        auto gphi = ad::grad(f, {phi}, /*create_graph=*/true);
        Tensor phi1 = ops::sub(phi, ops::scalar_mul(gphi[0], alpha));
        Tensor f1 = ops::scalar_mul(
            ops::sum(ops::square(ops::sub(theta, ops::scalar_mul(phi1, a)))), 0.5);
        auto gtheta = ad::grad(f1, {theta});
        const double phi1_v = phi0 + alpha * a * (theta0 - a * phi0);
        const double want = (theta0 - a * phi1_v) * (1.0 - alpha * a * a);
        quad_err = std::abs(gtheta[0].item() - want) / std::max(1.0, std::abs(want));
        g.need(quad_err < 1e-6, "quadratic meta-gradient err " + fmt(quad_err));
    }

    const double dt = now_seconds() - t0;
    g.need(dt < 60.0, "runtime " + fmt(dt) + " s exceeds 60 s");
    return {g.ok, g.detail("fd errs: linear " + fmt(r_lin.max_rel_err) + ", nm " +
                           fmt(r_nm.max_rel_err) + ", cat " + fmt(cat_err) + ", gauss " +
                           fmt(gauss_err) + ", quad " + fmt(quad_err) + "; " + fmt(dt) + " s")};
}

// --- criterion 2: ct-graph adaptation --------------------------------------------

Outcome criterion2(CtArtifacts& art) {
    CTGraphFamily fam{CTGraphConfig{}};
    const PolicySpec npn = ct_spec(LayerKind::neuromodulated);
    const PolicySpec spn = ct_spec(LayerKind::standard);

    for (std::size_t i = 0; i < kNumSeeds; ++i) {
        const std::uint64_t s = kSeeds[i];
        art.npn.push_back(train_or_load("c2_npn_seed" + std::to_string(s), fam, npn,
                                        ct_cfg(s, 500)));
        art.spn.push_back(train_or_load("c2_spn_seed" + std::to_string(s), fam, spn,
                                        ct_cfg(s, 500)));
        art.npn150.push_back(train_or_load("c2_npn150_seed" + std::to_string(s), fam, npn,
                                           ct_cfg(s, 150)));
        art.spn150.push_back(train_or_load("c2_spn150_seed" + std::to_string(s), fam, spn,
                                           ct_cfg(s, 150)));
    }
    for (std::size_t i = 0; i < kNumSeeds; ++i) {
        const std::uint64_t s = kSeeds[i];
        const MetaConfig cfg = ct_cfg(s, 500);
        art.npn_step4.push_back(eval_ct_curve(fam, npn, art.npn[i].final_params, cfg, 9000 + s)[4]);
        art.spn_step4.push_back(eval_ct_curve(fam, spn, art.spn[i].final_params, cfg, 9000 + s)[4]);
        art.npn150_step4.push_back(
            eval_ct_curve(fam, npn, art.npn150[i].final_params, cfg, 9050 + s)[4]);
        art.spn150_step4.push_back(
            eval_ct_curve(fam, spn, art.spn150[i].final_params, cfg, 9050 + s)[4]);
    }
    art.ready = true;

    const double npn4 = mean_of(art.npn_step4);
    const double spn4 = mean_of(art.spn_step4);
    const double npn150 = mean_of(art.npn150_step4);
    const double spn150 = mean_of(art.spn150_step4);

    Gate g;
    g.need(npn4 >= 0.75, "npn step-4 mean " + fmt(npn4) + " < 0.75");
    g.need(npn4 > spn4, "npn step-4 " + fmt(npn4) + " does not exceed spn " + fmt(spn4));
    g.need(npn150 > spn150,
           "150-iter variant: npn " + fmt(npn150) + " does not exceed spn " + fmt(spn150));
    return {g.ok, g.detail("step-4 means over seeds {1,2,3}: npn " + fmt(npn4) + ", spn " +
                           fmt(spn4) + "; at 150 iters: npn " + fmt(npn150) + ", spn " +
                           fmt(spn150))};
}

// --- criterion 3: 2d navigation adaptation ----------------------------------------

Outcome criterion3(NavArtifacts& art) {
    Nav2DFamily fam{Nav2DConfig{}};
    const PolicySpec npn = nav_spec(LayerKind::neuromodulated);
    const PolicySpec spn = nav_spec(LayerKind::standard);

    for (std::size_t i = 0; i < kNumSeeds; ++i) {
        const std::uint64_t s = kSeeds[i];
        art.npn.push_back(train_or_load("c3_npn_seed" + std::to_string(s), fam, npn,
                                        nav_cfg(s)));
        art.spn.push_back(train_or_load("c3_spn_seed" + std::to_string(s), fam, spn,
                                        nav_cfg(s)));
    }
    for (std::size_t i = 0; i < kNumSeeds; ++i) {
        const std::uint64_t s = kSeeds[i];
        const MetaConfig cfg = nav_cfg(s);
        art.npn_curves.push_back(
            meta_test(fam, npn, art.npn[i].final_params, cfg, 20, 4, 9200 + s).mean_returns);
        art.spn_curves.push_back(
            meta_test(fam, spn, art.spn[i].final_params, cfg, 20, 4, 9200 + s).mean_returns);
    }
    art.ready = true;

    auto step_mean = [](const std::vector<std::vector<double>>& curves, std::size_t k) {
        double s = 0.0;
        for (const auto& c : curves) s += c[k];
        return s / static_cast<double>(curves.size());
    };
    const double npn0 = step_mean(art.npn_curves, 0), npn4 = step_mean(art.npn_curves, 4);
    const double spn0 = step_mean(art.spn_curves, 0), spn4 = step_mean(art.spn_curves, 4);

    Gate g;
    g.need(std::abs(npn4) * 2.0 <= std::abs(npn0),
           "npn |return| shrank only " + fmt(std::abs(npn0) / std::abs(npn4)) + "x");
    g.need(std::abs(spn4) * 2.0 <= std::abs(spn0),
           "spn |return| shrank only " + fmt(std::abs(spn0) / std::abs(spn4)) + "x");

    // step-4 per-seed ranges must overlap: comparable performance, not a gap
    auto range = [](const std::vector<std::vector<double>>& curves) {
        double lo = curves[0][4], hi = curves[0][4];
        for (const auto& c : curves) {
            lo = std::min(lo, c[4]);
            hi = std::max(hi, c[4]);
        }
        return std::pair(lo, hi);
    };
    const auto [nlo, nhi] = range(art.npn_curves);
    const auto [slo, shi] = range(art.spn_curves);
    g.need(std::max(nlo, slo) <= std::min(nhi, shi),
           "step-4 seed ranges do not overlap: npn [" + fmt(nlo) + "," + fmt(nhi) + "] spn [" +
               fmt(slo) + "," + fmt(shi) + "]");

    // adaptation must help on at least 80% of the late iterations (last 100,
    // pooled over the npn seeds)
    std::size_t helped = 0, total = 0;
    for (const RunArtifacts& run : art.npn) {
        const std::size_t n = run.history.size();
        for (std::size_t i = n >= 100 ? n - 100 : 0; i < n; ++i) {
            ++total;
            if (run.history[i].mean_post > run.history[i].mean_pre) ++helped;
        }
    }
    const double frac = total ? static_cast<double>(helped) / static_cast<double>(total) : 0.0;
    g.need(frac >= 0.8, "post>pre on only " + fmt(100.0 * frac) + "% of late iterations");

    return {g.ok,
            g.detail("means over seeds: npn " + fmt(npn0) + " -> " + fmt(npn4) + ", spn " +
                     fmt(spn0) + " -> " + fmt(spn4) + "; step-4 ranges npn [" + fmt(nlo) + "," +
                     fmt(nhi) + "] spn [" + fmt(slo) + "," + fmt(shi) + "]; late post>pre " +
                     fmt(100.0 * frac) + "%")};
}

// --- criterion 4: cka suite ---------------------------------------------------

// Independent HSIC-form oracle: CKA = tr(KHLH) / sqrt(tr(KHKH) tr(LHLH)) with
// K = XX^T, L = YY^T and the centering matrix H = I - 11^T/n.
double cka_oracle(const Tensor& x, const Tensor& y) {
    const std::size_t n = x.rows();
    auto gram = [n](const Tensor& m) {
        std::vector<double> k(n * n, 0.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double s = 0.0;
                for (std::size_t c = 0; c < m.cols(); ++c)
                    s += m.data()[i * m.cols() + c] * m.data()[j * m.cols() + c];
                k[i * n + j] = s;
            }
        return k;
    };
    auto center = [n](std::vector<double> k) {
        std::vector<double> row(n, 0.0), col(n, 0.0);
        double all = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                row[i] += k[i * n + j];
                col[j] += k[i * n + j];
                all += k[i * n + j];
            }
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                k[i * n + j] += -row[i] / n - col[j] / n + all / (double(n) * double(n));
        return k;
    };
    auto tr_prod = [n](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) s += a[i * n + j] * b[j * n + i];
        return s;
    };
    const std::vector<double> kh = center(gram(x)), lh = center(gram(y));
    return tr_prod(kh, lh) / std::sqrt(tr_prod(kh, kh) * tr_prod(lh, lh));
}

// Gram-Schmidt on a random square matrix.
Tensor random_orthogonal(std::size_t n, Rng& rng) {
    Tensor q = rand_tensor(n, n, rng, -1.0, 1.0, false);
    for (std::size_t c = 0; c < n; ++c) {
        for (std::size_t p = 0; p < c; ++p) {
            double dot = 0.0;
            for (std::size_t r = 0; r < n; ++r) dot += q.data()[r * n + c] * q.data()[r * n + p];
            for (std::size_t r = 0; r < n; ++r) q.mut_data()[r * n + c] -= dot * q.data()[r * n + p];
        }
        double norm = 0.0;
        for (std::size_t r = 0; r < n; ++r) norm += q.data()[r * n + c] * q.data()[r * n + c];
        norm = std::sqrt(norm);
        for (std::size_t r = 0; r < n; ++r) q.mut_data()[r * n + c] /= norm;
    }
    return q;
}

// Mean off-diagonal CKA of the final hidden layers at the given step,
// averaged over layers and seeds, on the four depth-2 leaf tasks.
double ct_offdiag_mean(const CTGraphFamily& fam, const PolicySpec& spec,
                       const std::vector<RunArtifacts>& runs, std::size_t step,
                       std::uint64_t eval_base) {
    double acc = 0.0;
    Rng r(1);
    const std::vector<Task> tasks = fam.analysis_tasks(fam.graph().n_leaves(), r);
    const std::vector<std::vector<double>> probes = fam.probe_inputs(500, 11);
    for (std::size_t i = 0; i < runs.size(); ++i) {
        const MetaConfig cfg = ct_cfg(kSeeds[i], 500);
        MetaTestResult mt = meta_test_on(fam, spec, runs[i].final_params, cfg, tasks, 4,
                                         eval_base + kSeeds[i]);
        HeatmapSet h = build_heatmaps(fam, spec, runs[i].final_params, mt.phis, probes);
        double layer_acc = 0.0;
        for (std::size_t l = 0; l < h.n_layers; ++l)
            layer_acc += 1.0 - dissimilarity(h.at(l, step));
        acc += layer_acc / static_cast<double>(h.n_layers);
    }
    return acc / static_cast<double>(runs.size());
}

Outcome criterion4(const CtArtifacts& ct, const NavArtifacts& nav) {
    Gate g;
    Rng rng(401);

    // algebraic properties on random matrices
    double max_oracle_err = 0.0, worst_self = 0.0, worst_sym = 0.0, worst_inv = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
        Tensor x = rand_tensor(10, 4, rng, -2.0, 2.0, false);
        Tensor y = rand_tensor(10, 6, rng, -2.0, 2.0, false);
        max_oracle_err = std::max(max_oracle_err, std::abs(linear_cka(x, y) - cka_oracle(x, y)));
        worst_self = std::max(worst_self, std::abs(linear_cka(x, x) - 1.0));
        worst_sym = std::max(worst_sym, std::abs(linear_cka(x, y) - linear_cka(y, x)));

        // orthogonal rotation and scaling leave CKA at 1
        Tensor q = random_orthogonal(4, rng);
        Tensor xq = Tensor::zeros(10, 4, false);
        for (std::size_t i = 0; i < 10; ++i)
            for (std::size_t j = 0; j < 4; ++j) {
                double s = 0.0;
                for (std::size_t k = 0; k < 4; ++k)
                    s += x.data()[i * 4 + k] * q.data()[k * 4 + j];
                xq.mut_data()[i * 4 + j] = s;
            }
        worst_inv = std::max(worst_inv, std::abs(linear_cka(x, xq) - 1.0));
        Tensor xs = Tensor::zeros(10, 4, false);
        for (std::size_t i = 0; i < 40; ++i) xs.mut_data()[i] = -3.7 * x.data()[i];
        worst_inv = std::max(worst_inv, std::abs(linear_cka(x, xs) - 1.0));
    }
    g.need(worst_self < 1e-9, "self-similarity err " + fmt(worst_self));
    g.need(worst_sym < 1e-9, "symmetry err " + fmt(worst_sym));
    g.need(worst_inv < 1e-9, "orthogonal/scaling invariance err " + fmt(worst_inv));
    g.need(max_oracle_err < 1e-12, "hsic oracle err " + fmt(max_oracle_err));

    // step-0 heatmap is all ones: every task starts from the same blank context
    {
        CTGraphFamily fam{CTGraphConfig{}};
        const PolicySpec spec = ct_spec(LayerKind::neuromodulated);
        Rng init(402);
        PolicyParams params = init_policy(spec, init);
        std::vector<std::vector<Tensor>> phis(3);
        for (auto& p : phis) p.push_back(Tensor::zeros(1, spec.context_dim, false));
        HeatmapSet h = build_heatmaps(fam, spec, params, phis, fam.probe_inputs(500, 11));
        double worst = 0.0;
        for (std::size_t l = 0; l < h.n_layers; ++l)
            for (double v : h.at(l, 0).values) worst = std::max(worst, std::abs(v - 1.0));
        g.need(worst < 1e-9, "step-0 heatmap deviates from 1 by " + fmt(worst));
    }

    // trained comparison: the modulated network drives representations apart
    double npn_off4 = 0.0, spn_off4 = 0.0, npn_off0 = 0.0;
    if (ct.ready) {
        CTGraphFamily fam{CTGraphConfig{}};
        npn_off4 = ct_offdiag_mean(fam, ct_spec(LayerKind::neuromodulated), ct.npn, 4, 9100);
        spn_off4 = ct_offdiag_mean(fam, ct_spec(LayerKind::standard), ct.spn, 4, 9100);
        npn_off0 = ct_offdiag_mean(fam, ct_spec(LayerKind::neuromodulated), ct.npn, 0, 9100);
        g.need(npn_off4 < spn_off4, "npn off-diagonal " + fmt(npn_off4) +
                                        " not below spn " + fmt(spn_off4));
        g.need(npn_off4 <= npn_off0 + 1e-9,
               "npn off-diagonal grew from step 0 (" + fmt(npn_off0) + " -> " + fmt(npn_off4) + ")");
    } else {
        g.need(false, "trained ct checkpoints unavailable (criterion 2 did not run)");
    }

    // probe subsampling barely moves the trained summary
    double probe_delta = 0.0;
    if (nav.ready) {
        Nav2DFamily fam{Nav2DConfig{}};
        const PolicySpec spec = nav_spec(LayerKind::neuromodulated);
        const MetaConfig cfg = nav_cfg(kSeeds[0]);
        MetaTestResult mt =
            meta_test(fam, spec, nav.npn[0].final_params, cfg, 8, 4, 9500);
        HeatmapSet h500 = build_heatmaps(fam, spec, nav.npn[0].final_params, mt.phis,
                                         fam.probe_inputs(500, 123));
        HeatmapSet h1000 = build_heatmaps(fam, spec, nav.npn[0].final_params, mt.phis,
                                          fam.probe_inputs(1000, 123));
        probe_delta =
            std::abs(dissimilarity_summary(h500)[4] - dissimilarity_summary(h1000)[4]);
        g.need(probe_delta < 0.05, "probe subsampling moved the summary by " + fmt(probe_delta));
    } else {
        g.need(false, "trained nav checkpoint unavailable (criterion 3 did not run)");
    }

    return {g.ok, g.detail("oracle err " + fmt(max_oracle_err) + "; trained off-diagonal at step 4: npn " +
                           fmt(npn_off4) + " vs spn " + fmt(spn_off4) + " (npn step 0 " +
                           fmt(npn_off0) + "); probe delta " + fmt(probe_delta))};
}

// --- criterion 5: equal-parameter control -----------------------------------------

Outcome criterion5(const CtArtifacts& ct) {
    Gate g;
    const PolicySpec npn = ct_spec(LayerKind::neuromodulated);
    const PolicySpec large = matched_spn_spec(npn);
    const double cn = static_cast<double>(count_params(npn));
    const double cl = static_cast<double>(count_params(large));
    const double rel = std::abs(cl - cn) / cn;
    g.need(rel <= 0.02, "parameter counts differ by " + fmt(100.0 * rel) + "%");

    if (!ct.ready) {
        g.need(false, "trained ct checkpoints unavailable (criterion 2 did not run)");
        return {g.ok, g.detail("")};
    }

    CTGraphFamily fam{CTGraphConfig{}};
    std::vector<double> large_step4;
    for (std::size_t i = 0; i < kNumSeeds; ++i) {
        const std::uint64_t s = kSeeds[i];
        RunArtifacts run = train_or_load("c5_spn_large_seed" + std::to_string(s), fam, large,
                                         ct_cfg(s, 150));
        large_step4.push_back(eval_ct_curve(fam, large, run.final_params, ct_cfg(s, 150),
                                            9300 + s)[4]);
    }
    const double l4 = mean_of(large_step4);
    const double n150 = mean_of(ct.npn150_step4);
    g.need(n150 > l4, "spn-large " + fmt(l4) + " caught npn " + fmt(n150) + " at 150 iterations");

    return {g.ok, g.detail("widths " + std::to_string(large.hidden_sizes[0]) + ", params " +
                           std::to_string(static_cast<std::size_t>(cl)) + " vs " +
                           std::to_string(static_cast<std::size_t>(cn)) + " (" +
                           fmt(100.0 * rel) + "% apart); step-4 at 150 iters: npn " + fmt(n150) +
                           ", spn-large " + fmt(l4))};
}

// --- criterion 6: environment oracles ---------------------------------------------

Outcome criterion6() {
    Gate g;

    // ct-graph: exhaustive enumeration per depth
    std::string counts;
    for (std::size_t d : {std::size_t(2), std::size_t(3), std::size_t(4)}) {
        CTGraphConfig cfg;
        cfg.depth = d;
        CTGraph graph = ctgraph_build(cfg);
        std::size_t want_leaves = 1;
        for (std::size_t i = 0; i < d; ++i) want_leaves *= cfg.branch;
        g.need(graph.n_leaves() == want_leaves,
               "depth " + std::to_string(d) + ": leaf count " + std::to_string(graph.n_leaves()));

        // each leaf pays 1.0 under its own goal task via its digit path
        std::size_t rewarded = 0;
        for (std::size_t leaf = 0; leaf < graph.n_leaves(); ++leaf) {
            std::vector<std::size_t> digits(d);
            std::size_t x = leaf;
            for (std::size_t i = 0; i < d; ++i) {
                digits[d - 1 - i] = x % cfg.branch;
                x /= cfg.branch;
            }
            CTGraphTask task{leaf};
            CTGraphState st;
            ctgraph_reset(graph, st);
            double total = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
                total += ctgraph_step(graph, st, task, 0).reward;
                total += ctgraph_step(graph, st, task, 1 + digits[i]).reward;
            }
            if (st.done && total == 1.0) ++rewarded;
        }
        g.need(rewarded == want_leaves, "depth " + std::to_string(d) + ": only " +
                                            std::to_string(rewarded) + " rewarded leaves");

        // exhaustive sweep: unique crash-free sequence per leaf, returns only
        // ever in {-0.01, 0, 1}
        const std::size_t horizon = 2 * d;
        std::size_t total_seqs = 1;
        for (std::size_t i = 0; i < horizon; ++i) total_seqs *= cfg.branch + 1;
        std::vector<int> hits(graph.n_leaves(), 0);
        bool returns_ok = true;
        bool saw_goal = false, saw_zero = false, saw_crash = false;
        CTGraphTask task{0};
        for (std::size_t seq = 0; seq < total_seqs; ++seq) {
            std::size_t s = seq;
            CTGraphState st;
            ctgraph_reset(graph, st);
            double total = 0.0;
            for (std::size_t step = 0; step < horizon && !st.done; ++step) {
                total += ctgraph_step(graph, st, task, s % (cfg.branch + 1)).reward;
                s /= cfg.branch + 1;
            }
            if (graph.nodes[st.node].kind == CTNodeKind::leaf)
                ++hits[graph.nodes[st.node].leaf_index];
            if (total == 1.0)
                saw_goal = true;
            else if (total == 0.0)
                saw_zero = true;
            else if (total == -0.01)
                saw_crash = true;
            else
                returns_ok = false;
        }
        g.need(returns_ok && saw_goal && saw_zero && saw_crash,
               "depth " + std::to_string(d) + ": return set is not {-0.01, 0, 1}");
        bool unique = true;
        for (int h : hits)
            if (h != 1) unique = false;
        g.need(unique, "depth " + std::to_string(d) + ": leaf path multiplicity != 1");
        counts += (counts.empty() ? "" : ", ") + std::to_string(want_leaves) + " leaves at d=" +
                  std::to_string(d);
    }

    // nav2d: dynamics against direct arithmetic
    std::size_t mismatches = 0;
    {
        Nav2DConfig cfg;
        Rng rng(601);
        for (int trial = 0; trial < 10000; ++trial) {
            Nav2DTask task{{rng.uniform(-0.5, 0.5), rng.uniform(-0.5, 0.5)}};
            Nav2DState st;
            nav2d_reset(st, cfg);
            double px = 0.0, py = 0.0;
            const int steps = 1 + static_cast<int>(rng.uniform_index(4));
            for (int s = 0; s < steps && !st.done; ++s) {
                const double ax = rng.uniform(-0.3, 0.3), ay = rng.uniform(-0.3, 0.3);
                auto r = nav2d_step(st, task, cfg, {ax, ay});
                px += std::clamp(ax, -cfg.action_clip, cfg.action_clip);
                py += std::clamp(ay, -cfg.action_clip, cfg.action_clip);
                const double dx = task.goal[0] - px, dy = task.goal[1] - py;
                if (std::abs(r.obs[0] - px) > 1e-12 || std::abs(r.obs[1] - py) > 1e-12 ||
                    std::abs(r.reward - (-(dx * dx + dy * dy))) > 1e-12)
                    ++mismatches;
            }
        }
        g.need(mismatches == 0, std::to_string(mismatches) + " nav transitions off by > 1e-12");
    }

    return {g.ok, g.detail(counts + "; 10000 nav transitions checked")};
}

// --- criterion 7: determinism ----------------------------------------------------

Outcome criterion7() {
    CTGraphFamily fam{CTGraphConfig{}};
    PolicySpec spec;
    spec.input_dim = fam.obs_dim();
    spec.context_dim = 3;
    spec.hidden_sizes = {16, 16};
    spec.nm_size = 2;
    spec.layer_kind = LayerKind::neuromodulated;
    spec.head = fam.head_kind();
    spec.head_dim = fam.action_space();

    MetaConfig cfg;
    cfg.n_iterations = 5;
    cfg.meta_batch_size = 4;
    cfg.n_traj_train = 5;
    cfg.n_traj_test = 5;
    cfg.seed = 77;
    cfg.snapshot_iters = {3};

    auto run = [&](std::size_t workers) {
        MetaConfig c = cfg;
        c.n_workers = workers;
        std::ostringstream log;
        std::string milestone;
        MetaTrainResult res = meta_train(fam, spec, c, &log,
                                         [&](const std::string& tag, std::size_t,
                                             const PolicyParams& p) {
                                             if (tag == "iter3")
                                                 milestone = encode_tensors(pack_params(p, spec));
                                         });
        return std::tuple(log.str(), encode_tensors(pack_params(res.final_params, spec)),
                          encode_tensors(pack_params(res.best_params, spec)), milestone);
    };

    const auto [log_a, fin_a, best_a, mile_a] = run(1);
    const auto [log_b, fin_b, best_b, mile_b] = run(3);
    const auto [log_c, fin_c, best_c, mile_c] = run(1);

    Gate g;
    g.need(log_a == log_b, "logs differ between 1 and 3 workers");
    g.need(fin_a == fin_b && best_a == best_b && mile_a == mile_b,
           "checkpoints differ between 1 and 3 workers");
    g.need(log_a == log_c && fin_a == fin_c && best_a == best_c && mile_a == mile_c,
           "repeat run with the same seed is not byte-identical");
    return {g.ok, g.detail(std::to_string(log_a.size()) +
                           " log bytes and 3 checkpoints byte-identical across runs and "
                           "worker counts {1,3}")};
}

} // namespace

int main() {
    std::printf("acceptance gate | kernels: %s | run cache: %s\n",
                kern::backend_name().c_str(), accept_root().string().c_str());
    std::fflush(stdout);

    CtArtifacts ct;
    NavArtifacts nav;
    run_criterion(1, "gradient correctness", criterion1);
    run_criterion(2, "ct-graph d2 adaptation (npn >= 0.75, npn > spn)", [&] { return criterion2(ct); });
    run_criterion(3, "2d navigation adaptation (both arms halve |return|)",
                  [&] { return criterion3(nav); });
    run_criterion(4, "cka suite", [&] { return criterion4(ct, nav); });
    run_criterion(5, "equal-parameter spn control", [&] { return criterion5(ct); });
    run_criterion(6, "environment oracles", criterion6);
    run_criterion(7, "determinism", criterion7);

    std::printf("%d/7 criteria passed\n", 7 - g_failures);
    return g_failures == 0 ? 0 : 1;
}
