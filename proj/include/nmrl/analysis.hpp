#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "nmrl/envs.hpp"
#include "nmrl/layers.hpp"

namespace nmrl {

// Post-nonlinearity activations of one hidden layer over a fixed probe set.
struct RepresentationMatrix {
    Tensor m; // [probes, layer width]
    std::size_t task_id = 0;
    std::size_t grad_step = 0;
    std::size_t layer = 0;
};

// Task-pairwise CKA for one (layer, grad step).
struct CKAMatrix {
    std::size_t layer = 0;
    std::size_t grad_step = 0;
    std::size_t n_tasks = 0;
    std::vector<double> values; // row-major [n_tasks, n_tasks]
    bool degenerate = false;    // some pair hit the zero-variance rule

    double at(std::size_t i, std::size_t j) const { return values[i * n_tasks + j]; }
};

// Forward passes of every probe through the policy at each of the given
// contexts; one matrix per (grad step, hidden layer), step-major order.
std::vector<RepresentationMatrix> capture_representations(
    const PolicyParams& params, const PolicySpec& spec, const std::vector<Tensor>& phi_per_step,
    const std::vector<std::vector<double>>& probe_inputs, std::size_t task_id);

// Linear CKA between two row-aligned representation matrices: column-center
// both, then |Y^T X|_F^2 / (|X^T X|_F * |Y^T Y|_F). A centered all-zero
// matrix has no direction to compare, so the value is pinned: 1 if both are
// zero, 0 if only one is. `degenerate`, when given, is set on that path.
double linear_cka(const Tensor& x, const Tensor& y, bool* degenerate = nullptr);

struct HeatmapSet {
    std::size_t n_layers = 0;
    std::size_t n_steps = 0; // matrices cover grad steps 0..n_steps
    std::size_t n_tasks = 0;
    std::vector<CKAMatrix> matrices; // step-major, layer-minor

    const CKAMatrix& at(std::size_t layer, std::size_t step) const;
};

// Full task-pairwise CKA per (layer, grad step 0..n_steps). phis[t] holds
// task t's context after 0..n_steps inner gradient steps (from meta_test).
HeatmapSet build_heatmaps(const EnvFamily& family, const PolicySpec& spec,
                          const PolicyParams& params,
                          const std::vector<std::vector<Tensor>>& phis,
                          const std::vector<std::vector<double>>& probe_inputs);

// 1 - mean off-diagonal CKA.
double dissimilarity(const CKAMatrix& m);
// Per grad step, averaged over layers.
std::vector<double> dissimilarity_summary(const HeatmapSet& h);

// task_a x task_b grid with a header row, one file per (layer, step).
std::string heatmap_csv(const CKAMatrix& m);
// Plot-ready long format: task_a,task_b,layer,step,cka.
std::string long_format_csv(const HeatmapSet& h);

} // namespace nmrl
