#ifndef IMSRC_SOLVER_HPP
#define IMSRC_SOLVER_HPP

#include <cstdint>
#include <string>
#include <vector>

#include "imsrc/forward.hpp"

namespace imsrc {

struct SolverConfig {
    double lambda = 3e-5;     // regularization weight
    double eps_excl = 0.01;   // exclusion radius around microphones, m
    double alpha_min = 0.01;  // amplitude threshold for stopping and pruning
    int i_max = 500;          // iteration cap
    int i_ext = 20;           // forced-extension period, iterations
    double resid_drop = 0.7;  // fractional residual-norm decrease triggering extension
    int cutting_count = 8;    // number of RIR segments (L)

    // certificate initialization grid
    int grid_top_mics = 8;
    double grid_angular_spacing_deg = 5.0;
    std::vector<double> grid_radial_offsets = {-0.05, 0.0, 0.05};
    int smoothing_window = 3;

    double bfgs_grad_tol = 1e-9;
    int bfgs_max_iters = 200;

    double merge_radius = 1e-3; // candidates closer than this to an existing spike merge

    std::uint64_t rng_seed = 0;
    bool slide_each_iteration = false; // full sliding variant; off by default

    void validate() const;
};

enum class StopReason { CertificateBelowLambda, AmplitudeBelowThreshold, MaxIterations };

const char* to_string(StopReason r);

struct IterationRecord {
    int iteration = 0;
    int active_samples = 0;
    bool extended = false;         // window extension happened this iteration
    double certificate_max = 0.0;  // eta at the refined candidate
    bool spike_added = false;
    Vec3 spike_position;
    double spike_amplitude = 0.0;  // amplitude of the newest spike after the LASSO update
    double residual_norm = 0.0;    // on the active window, after the amplitude update
    double objective = 0.0;        // T_lambda on the active window, after the amplitude update
    int n_spikes = 0;
};

struct RecoveryResult {
    SparseMeasure measure;
    std::vector<IterationRecord> trace;
    StopReason stop_reason = StopReason::MaxIterations;
    double objective_before_slide = 0.0; // T_lambda on the full observation, pre-slide
    double final_objective = 0.0;        // T_lambda on the full observation
    SolverConfig config;
};

/// Segment end columns (inclusive) chosen so each segment carries roughly
/// equal energy; last index is always N-1. Throws on zero-energy input.
std::vector<int> cutting_indices(const Observation& obs, int count);

/// Time-of-arrival candidate grid: Fibonacci-meshed spheres around the
/// microphones with the strongest smoothed residual peaks.
std::vector<Vec3> init_grid(const Observation& res, double c, const SolverConfig& config);

struct CertificateMax {
    Vec3 position;
    double value = 0.0;
};

/// Grid argmax of eta = Gamma* res followed by a BFGS ascent, kept out of the
/// microphone exclusion balls by projection.
CertificateMax maximize_certificate(const Observation& res, double c, const SolverConfig& config);

/// Non-negative LASSO min_a 0.5 |x - sum a_k gamma(r_k)|^2 + lambda sum a_k
/// by cyclic coordinate descent with closed-form updates.
std::vector<double> lasso_nonneg(const Observation& obs, const std::vector<Vec3>& positions,
                                 double lambda, double c);

/// Adapted Frank-Wolfe on a progressively extended observation window.
RecoveryResult solve(const Observation& obs, double c, const SolverConfig& config = {});

} // namespace imsrc

#endif
