#include "imsrc/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "imsrc/errors.hpp"
#include "imsrc/parallel.hpp"

namespace imsrc {

namespace {

// Weights kappa(n/f_s), with the zero ones dropped (for the sinc kernel only
// n = 0 survives; Gaussian weights decay fast).
struct PhiWeights {
    std::vector<int> index;
    std::vector<double> weight;
};

PhiWeights phi_weights(const FilterKernel& kernel, const SamplingSpec& spec) {
    PhiWeights w;
    for (int n = 0; n < spec.n_samples; ++n) {
        const double k = kappa(kernel, spec.sample_time(n));
        if (std::abs(k) > 1e-300) {
            w.index.push_back(n);
            w.weight.push_back(k);
        }
    }
    return w;
}

double phi_objective(const PhiWeights& w, const FilterKernel& kernel, const SamplingSpec& spec,
                     double c, double t) {
    double s = 0.0;
    for (std::size_t i = 0; i < w.index.size(); ++i)
        s += w.weight[i] * kappa(kernel, spec.sample_time(w.index[i]) - t);
    return s / (kFourPi * c * t);
}

double golden_section_min(const std::function<double(double)>& f, double a, double b,
                          int iters = 120) {
    constexpr double inv_phi = 0.6180339887498948482;
    double x1 = b - inv_phi * (b - a);
    double x2 = a + inv_phi * (b - a);
    double f1 = f(x1);
    double f2 = f(x2);
    for (int i = 0; i < iters && (b - a) > 1e-18; ++i) {
        if (f1 < f2) {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - inv_phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + inv_phi * (b - a);
            f2 = f(x2);
        }
    }
    return f1 < f2 ? x1 : x2;
}

} // namespace

std::vector<double> default_phi_grid(const SamplingSpec& spec, int points) {
    const double lo = 1e-6;
    const double hi = std::max(10.0 * spec.t_max(), 2e-6);
    std::vector<double> grid(points);
    const double log_lo = std::log(lo);
    const double step = (std::log(hi) - log_lo) / (points - 1);
    for (int i = 0; i < points; ++i) grid[i] = std::exp(log_lo + i * step);
    return grid;
}

double compute_phi(const FilterKernel& kernel, const SamplingSpec& spec, double c,
                   const std::vector<double>& t_grid) {
    validate_spec(spec);
    if (t_grid.empty()) throw InvalidInput("compute_phi: empty search grid");
    for (double t : t_grid)
        if (!(t > 0.0)) throw InvalidInput("compute_phi: grid values must be positive");

    const PhiWeights w = phi_weights(kernel, spec);
    std::vector<double> values(t_grid.size());
    parallel_for(t_grid.size(),
                 [&](std::size_t i) { values[i] = phi_objective(w, kernel, spec, c, t_grid[i]); });
    std::size_t best = 0;
    for (std::size_t i = 1; i < values.size(); ++i)
        if (values[i] < values[best]) best = i;

    const double lo = best > 0 ? t_grid[best - 1] : t_grid[best] * 0.5;
    const double hi = best + 1 < t_grid.size() ? t_grid[best + 1] : t_grid[best] * 1.5;
    const double refined = golden_section_min(
        [&](double t) { return phi_objective(w, kernel, spec, c, t); }, lo, hi);
    return std::min(values[best], phi_objective(w, kernel, spec, c, refined));
}

double compute_phi(const FilterKernel& kernel, const SamplingSpec& spec, double c) {
    return compute_phi(kernel, spec, c, default_phi_grid(spec));
}

std::vector<double> compute_mu(const Observation& obs) {
    std::vector<double> mu(obs.data.rows(), 0.0);
    for (int m = 0; m < obs.data.rows(); ++m) {
        const double* row = obs.data.row(m);
        double s = 0.0;
        for (int n = 0; n < obs.data.cols(); ++n)
            s += row[n] * kappa(obs.kernel, obs.spec.sample_time(n));
        mu[m] = s;
    }
    return mu;
}

AlbResult alb_discrete_check(const FilterKernel& kernel, const SamplingSpec& spec,
                             const std::vector<double>& tau_grid) {
    validate_spec(spec);
    const double t_max = spec.t_max();
    AlbResult res;
    bool first = true;
    for (double tau : tau_grid) {
        if (tau < -1e-12 || tau > t_max + 1e-12)
            throw InvalidInput("alb_discrete_check: tau outside [0, (N-1)/f_s]");
        double s = 0.0;
        for (int n = 0; n < spec.n_samples; ++n) s += kappa(kernel, spec.sample_time(n) - tau);
        if (first || s < res.min_sum) {
            res.min_sum = s;
            res.argmin_tau = tau;
            first = false;
        }
    }
    res.ok = !first && res.min_sum > 0.0;
    return res;
}

const char* to_string(ExistenceVerdict v) {
    switch (v) {
        case ExistenceVerdict::ConditionI: return "ConditionI";
        case ExistenceVerdict::ConditionII: return "ConditionII";
        default: return "Inconclusive";
    }
}

ExistenceReport existence_verdict(const Observation& obs, double c, double lambda,
                                  double c_alb_estimate) {
    ExistenceReport rep;
    rep.lambda = lambda;
    rep.c_alb = c_alb_estimate;
    rep.phi = compute_phi(obs.kernel, obs.spec, c);
    rep.mu = compute_mu(obs);
    rep.obs_norm = frobenius_norm(obs.data);

    std::vector<double> tau_grid(8192);
    for (std::size_t i = 0; i < tau_grid.size(); ++i)
        tau_grid[i] = obs.spec.t_max() * static_cast<double>(i) / (tau_grid.size() - 1);
    const AlbResult alb = alb_discrete_check(obs.kernel, obs.spec, tau_grid);
    rep.alb_ok = alb.ok;
    rep.alb_min_sum = alb.min_sum;

    const double mu_max = rep.mu.empty() ? 0.0 : *std::max_element(rep.mu.begin(), rep.mu.end());
    if (rep.phi < 0.0) {
        if (c_alb_estimate > 0.0)
            rep.condition_i = mu_max <= (2.0 / c_alb_estimate) * rep.phi * rep.obs_norm;
        if (lambda > 0.0)
            rep.condition_lambda =
                mu_max <= rep.phi / (2.0 * lambda) * rep.obs_norm * rep.obs_norm;
    } else {
        rep.condition_ii = mu_max <= 0.0;
        rep.condition_lambda = rep.condition_ii;
    }
    rep.verdict = rep.condition_i    ? ExistenceVerdict::ConditionI
                  : rep.condition_ii ? ExistenceVerdict::ConditionII
                                     : ExistenceVerdict::Inconclusive;
    return rep;
}

Mat build_gamma_r_matrix(const std::vector<Vec3>& positions, const MicArray& array,
                         const FilterKernel& kernel, const SamplingSpec& spec, double c) {
    validate_spec(spec);
    validate_array(array);
    for (const Vec3& p : positions)
        for (const Vec3& mic : array.positions)
            if (distance(p, mic) == 0.0)
                throw SingularityError("certificate position on a microphone");
    const int n_spikes = static_cast<int>(positions.size());
    const int n_mics = static_cast<int>(array.positions.size());
    const int n_rows = n_mics * spec.n_samples;
    Mat a(n_rows, 4 * n_spikes);
    parallel_for(static_cast<std::size_t>(n_spikes), [&](std::size_t k) {
        for (int m = 0; m < n_mics; ++m) {
            const Vec3 diff = positions[k] - array.positions[m];
            const double d = diff.norm();
            for (int n = 0; n < spec.n_samples; ++n) {
                const double u = spec.sample_time(n) - d / c;
                const double kv = kappa(kernel, u);
                const double kd = kappa_deriv(kernel, u);
                const double val = kv / (kFourPi * d);
                const double dval_dd = -kd / (kFourPi * c * d) - kv / (kFourPi * d * d);
                const int row = m * spec.n_samples + n;
                a(row, static_cast<int>(k)) = val;
                a(row, n_spikes + static_cast<int>(k)) = dval_dd * diff.x / d;
                a(row, 2 * n_spikes + static_cast<int>(k)) = dval_dd * diff.y / d;
                a(row, 3 * n_spikes + static_cast<int>(k)) = dval_dd * diff.z / d;
            }
        }
    });
    return a;
}

AdjointValue Precertificate::eval(const Vec3& r) const {
    return adjoint_eval(v_star, r, array, kernel, spec, c);
}

Mat3 Precertificate::hessian_fd(const Vec3& r, double h) const {
    Mat3 hess{};
    for (int j = 0; j < 3; ++j) {
        Vec3 rp = r;
        Vec3 rm = r;
        rp[j] += h;
        rm[j] -= h;
        const Vec3 gp = eval(rp).grad;
        const Vec3 gm = eval(rm).grad;
        for (int i = 0; i < 3; ++i) hess[i][j] = (gp[i] - gm[i]) / (2.0 * h);
    }
    // symmetrize
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j) {
            const double s = 0.5 * (hess[i][j] + hess[j][i]);
            hess[i][j] = s;
            hess[j][i] = s;
        }
    return hess;
}

Precertificate precertificate_eta_v(const std::vector<Vec3>& positions,
                                    const std::vector<int>& signs, const MicArray& array,
                                    const FilterKernel& kernel, const SamplingSpec& spec,
                                    double c) {
    if (positions.empty()) throw InvalidInput("precertificate needs at least one spike");
    if (signs.size() != positions.size())
        throw InvalidInput("precertificate: signs/positions size mismatch");
    for (int s : signs)
        if (s != 1 && s != -1) throw InvalidInput("precertificate: signs must be +-1");

    const Mat a = build_gamma_r_matrix(positions, array, kernel, spec, c);
    const int n_cols = a.cols();
    const int n_rows = a.rows();

    // Gram = A^T A, small (4K x 4K)
    Mat gram(n_cols, n_cols);
    parallel_for(static_cast<std::size_t>(n_cols), [&](std::size_t i) {
        for (int j = static_cast<int>(i); j < n_cols; ++j) {
            double s = 0.0;
            for (int r = 0; r < n_rows; ++r) s += a(r, static_cast<int>(i)) * a(r, j);
            gram(static_cast<int>(i), j) = s;
            gram(j, static_cast<int>(i)) = s;
        }
    });

    const SymEig eig = jacobi_eigen(gram);
    const double sigma_max = std::sqrt(std::max(0.0, eig.values.back()));
    const double sigma_min = std::sqrt(std::max(0.0, eig.values.front()));
    if (!(sigma_min > 1e-10 * sigma_max)) {
        std::ostringstream msg;
        msg << "rank-deficient certificate system: singular value " << sigma_min
            << " below 1e-10 of " << sigma_max;
        throw DegenerateConfiguration(msg.str());
    }

    const int n_spikes = static_cast<int>(positions.size());
    std::vector<double> b(n_cols, 0.0);
    for (int k = 0; k < n_spikes; ++k) b[k] = signs[k];

    std::vector<double> w = solve_sym(gram, b);
    // v* = A w is the minimum-norm solution of A^T v = b
    Precertificate cert;
    cert.v_star = Mat(static_cast<int>(array.positions.size()), spec.n_samples);
    for (int r = 0; r < n_rows; ++r) {
        double s = 0.0;
        for (int j = 0; j < n_cols; ++j) s += a(r, j) * w[j];
        cert.v_star.flat()[r] = s;
    }
    cert.spike_positions = positions;
    cert.spike_signs = signs;
    cert.array = array;
    cert.kernel = kernel;
    cert.spec = spec;
    cert.c = c;
    return cert;
}

Vec3 PlaneSpec::point(int iu, int iv) const {
    const double u = u_min + (u_max - u_min) * (nu > 1 ? static_cast<double>(iu) / (nu - 1) : 0.0);
    const double v = v_min + (v_max - v_min) * (nv > 1 ? static_cast<double>(iv) / (nv - 1) : 0.0);
    Vec3 p;
    switch (fixed_axis) {
        case 0: p = {fixed_value, u, v}; break;
        case 1: p = {u, fixed_value, v}; break;
        default: p = {u, v, fixed_value}; break;
    }
    return p;
}

Mat sample_certificate_plane(const std::function<double(const Vec3&)>& field,
                             const PlaneSpec& plane) {
    if (plane.fixed_axis < 0 || plane.fixed_axis > 2)
        throw InvalidInput("plane axis must be 0, 1 or 2");
    if (plane.nu < 2 || plane.nv < 2) throw InvalidInput("plane resolution must be at least 2x2");
    Mat values(plane.nv, plane.nu);
    parallel_for(static_cast<std::size_t>(plane.nv) * plane.nu, [&](std::size_t idx) {
        const int iv = static_cast<int>(idx) / plane.nu;
        const int iu = static_cast<int>(idx) % plane.nu;
        values(iv, iu) = field(plane.point(iu, iv));
    });
    return values;
}

} // namespace imsrc
