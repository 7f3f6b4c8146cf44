#ifndef IMSRC_ANALYSIS_HPP
#define IMSRC_ANALYSIS_HPP

#include <functional>
#include <vector>

#include "imsrc/forward.hpp"

namespace imsrc {

/// Log-spaced grid over [1e-6 s, 10 * t_max], used as the default search grid
/// for the existence constant phi.
std::vector<double> default_phi_grid(const SamplingSpec& spec, int points = 1000000);

/// Grid + golden-section upper bound on
///   phi = inf_{t>0} sum_n kappa(n/f_s) kappa(n/f_s - t) / (4 pi c t).
/// An upper bound on the true infimum, not a certified minimum.
double compute_phi(const FilterKernel& kernel, const SamplingSpec& spec, double c,
                   const std::vector<double>& t_grid);
double compute_phi(const FilterKernel& kernel, const SamplingSpec& spec, double c);

/// mu_m = sum_n x_{m,n} kappa(n/f_s).
std::vector<double> compute_mu(const Observation& obs);

struct AlbResult {
    bool ok = false;        // every grid sum strictly positive
    double min_sum = 0.0;
    double argmin_tau = 0.0;
};

/// Checks sum_n kappa(n/f_s - tau) > 0 over the given tau grid (the
/// amplitude-lower-bound criterion, sampled).
AlbResult alb_discrete_check(const FilterKernel& kernel, const SamplingSpec& spec,
                             const std::vector<double>& tau_grid);

enum class ExistenceVerdict { ConditionI, ConditionII, Inconclusive };

struct ExistenceReport {
    double phi = 0.0;
    std::vector<double> mu;
    bool alb_ok = false;
    double alb_min_sum = 0.0;
    bool condition_i = false;      // phi < 0 and mu_m <= (2/C) phi |x| for all m
    bool condition_ii = false;     // phi >= 0 and mu_m <= 0 for all m
    bool condition_lambda = false; // lambda-regularized variant of condition (i)
    ExistenceVerdict verdict = ExistenceVerdict::Inconclusive;
    double obs_norm = 0.0;
    double lambda = 0.0;
    double c_alb = 0.0;
};

const char* to_string(ExistenceVerdict v);

/// Evaluates the sufficient existence conditions on an observation.
/// c_alb_estimate <= 0 means "no amplitude-lower-bound constant available";
/// condition (i) is then not claimed.
ExistenceReport existence_verdict(const Observation& obs, double c, double lambda,
                                  double c_alb_estimate);

/// (M N) x (4 K) matrix [gamma(r_k) | d_x gamma(r_k) | d_y ... | d_z ...],
/// rows flattened m-major. Throws SingularityError if a position sits on a
/// microphone.
Mat build_gamma_r_matrix(const std::vector<Vec3>& positions, const MicArray& array,
                         const FilterKernel& kernel, const SamplingSpec& spec, double c);

/// Vanishing-derivatives precertificate: the minimum-norm v with
/// (Gamma* v)(r_k) = sign_k and D(Gamma* v)(r_k) = 0.
struct Precertificate {
    Mat v_star; // M x N
    std::vector<Vec3> spike_positions;
    std::vector<int> spike_signs;
    MicArray array;
    FilterKernel kernel;
    SamplingSpec spec;
    double c = 343.0;

    AdjointValue eval(const Vec3& r) const;
    /// D^2 eta_V by central differences of the analytic gradient.
    Mat3 hessian_fd(const Vec3& r, double h = 1e-4) const;
};

/// Throws DegenerateConfiguration if Gamma_r is rank-deficient (singular
/// values below 1e-10 of the largest).
Precertificate precertificate_eta_v(const std::vector<Vec3>& positions,
                                    const std::vector<int>& signs, const MicArray& array,
                                    const FilterKernel& kernel, const SamplingSpec& spec,
                                    double c);

/// Axis-aligned sampling plane. The two free axes keep ascending order:
/// fixed x -> (u,v)=(y,z), fixed y -> (x,z), fixed z -> (x,y).
struct PlaneSpec {
    int fixed_axis = 2;
    double fixed_value = 0.0;
    double u_min = 0.0, u_max = 1.0;
    double v_min = 0.0, v_max = 1.0;
    int nu = 2, nv = 2;

    Vec3 point(int iu, int iv) const;
};

/// Samples a scalar field on the plane; values(iv, iu).
Mat sample_certificate_plane(const std::function<double(const Vec3&)>& field,
                             const PlaneSpec& plane);

} // namespace imsrc

#endif
