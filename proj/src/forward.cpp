#include "imsrc/forward.hpp"

#include <algorithm>
#include <cmath>

#include "imsrc/errors.hpp"
#include "imsrc/parallel.hpp"
#include "imsrc/rng.hpp"

namespace imsrc {

double SparseMeasure::total_mass() const {
    double s = 0.0;
    for (const Spike& sp : spikes) s += sp.amplitude;
    return s;
}

SparseMeasure measure_from_sources(const ImageSourceSet& set) {
    SparseMeasure m;
    m.spikes.reserve(set.sources.size());
    for (const ImageSource& s : set.sources) m.spikes.push_back({s.amplitude, s.position});
    return m;
}

Observation zero_observation(const MicArray& array, const FilterKernel& kernel,
                             const SamplingSpec& spec) {
    validate_spec(spec);
    validate_array(array);
    return {Mat(static_cast<int>(array.positions.size()), spec.n_samples), spec, array, kernel};
}

namespace {

constexpr double kSnap = 1e-9; // matches the kappa lattice snap, in samples

// sin/cos of pi*u0 for large u0, via the exactly-computed offset from the
// nearest integer; plain std::sin(pi*u0) loses ~|arg|*eps to argument
// reduction, which the 1/(n-u0) pole then amplifies.
struct ReducedTrig {
    double nearest; // nearest integer to u0
    double sin_pi;  // sin(pi u0)
    double cos_pi;  // cos(pi u0)
};

ReducedTrig reduce_pi_trig(double u0) {
    ReducedTrig t;
    t.nearest = std::nearbyint(u0);
    const double frac = u0 - t.nearest; // exact (Sterbenz)
    const double parity = std::fmod(t.nearest, 2.0) == 0.0 ? 1.0 : -1.0;
    t.sin_pi = parity * std::sin(kPi * frac);
    t.cos_pi = parity * std::cos(kPi * frac);
    return t;
}

// Accumulates out[n] += a * kappa(n/f_s - d/c) / (4 pi d) for n in [0, N).
// The sinc kernel is factored through sin(pi u0) so the inner loop is one
// divide and one multiply-add per sample.
void accumulate_sinc_row(double a, double d, double f_s, double c, double* out, int n_cols) {
    const double u0 = f_s * d / c;
    const double scale = a / (kFourPi * d);
    const ReducedTrig trig = reduce_pi_trig(u0);
    if (std::abs(u0 - trig.nearest) <= kSnap) {
        if (trig.nearest >= 0.0 && trig.nearest < n_cols)
            out[static_cast<int>(trig.nearest)] += scale;
        return;
    }
    const double coef = -scale * trig.sin_pi / kPi;
    double sgn = 1.0;
    for (int n = 0; n < n_cols; ++n) {
        out[n] += sgn * coef / (n - u0);
        sgn = -sgn;
    }
}

void accumulate_generic_row(double a, double d, const FilterKernel& kernel, double f_s, double c,
                            double* out, int n_cols) {
    const double scale = a / (kFourPi * d);
    for (int n = 0; n < n_cols; ++n) out[n] += scale * kappa(kernel, n / f_s - d / c);
}

// t1 = sum_n v[n] kappa(n/f_s - d/c), t2 = sum_n v[n] kappa'(n/f_s - d/c).
struct RowDots {
    double t1 = 0.0;
    double t2 = 0.0;
};

RowDots dot_sinc_row(const double* v, int n_cols, double d, double f_s, double c,
                     bool want_deriv) {
    RowDots r;
    const double u0 = f_s * d / c;
    const ReducedTrig trig = reduce_pi_trig(u0);
    if (std::abs(u0 - trig.nearest) <= kSnap) {
        const bool in_window = trig.nearest >= 0.0 && trig.nearest < n_cols;
        if (in_window) r.t1 = v[static_cast<int>(trig.nearest)];
        if (want_deriv) {
            // sinc'(pi j) = (-1)^j / (pi j) for integer j != 0
            double s2 = 0.0;
            for (int n = 0; n < n_cols; ++n) {
                const double j = n - trig.nearest;
                if (j == 0.0) continue;
                const double sign = std::fmod(j, 2.0) == 0.0 ? 1.0 : -1.0;
                s2 += v[n] * sign / (kPi * j);
            }
            r.t2 = kPi * f_s * s2;
        }
        return r;
    }
    double s1 = 0.0;
    double s2 = 0.0;
    double sgn = 1.0;
    if (want_deriv) {
        for (int n = 0; n < n_cols; ++n) {
            const double w = sgn * v[n];
            const double inv = 1.0 / (n - u0);
            s1 += w * inv;
            s2 += w * inv * inv;
            sgn = -sgn;
        }
    } else {
        for (int n = 0; n < n_cols; ++n) {
            s1 += sgn * v[n] / (n - u0);
            sgn = -sgn;
        }
    }
    r.t1 = -trig.sin_pi * s1 / kPi;
    if (want_deriv) {
        // sum v_n kappa'(u_n) with kappa' = pi f_s sinc'(pi f_s u)
        const double sinc_dot = trig.cos_pi * s1 / kPi + trig.sin_pi * s2 / (kPi * kPi);
        r.t2 = kPi * f_s * sinc_dot;
    }
    return r;
}

RowDots dot_generic_row(const double* v, int n_cols, double d, const FilterKernel& kernel,
                        double f_s, double c, bool want_deriv) {
    RowDots r;
    for (int n = 0; n < n_cols; ++n) {
        const double u = n / f_s - d / c;
        r.t1 += v[n] * kappa(kernel, u);
        if (want_deriv) r.t2 += v[n] * kappa_deriv(kernel, u);
    }
    return r;
}

AdjointValue adjoint_impl(const Mat& v, const Vec3& r, const MicArray& array,
                          const FilterKernel& kernel, const SamplingSpec& spec, double c,
                          bool want_grad) {
    const int n_cols = v.cols();
    AdjointValue out;
    for (std::size_t m = 0; m < array.positions.size(); ++m) {
        const Vec3 diff = r - array.positions[m];
        const double d = diff.norm();
        if (d == 0.0) throw SingularityError("adjoint evaluated at a microphone position");
        const RowDots dots =
            (kernel.kind == KernelKind::SincLowpass)
                ? dot_sinc_row(v.row(static_cast<int>(m)), n_cols, d, spec.f_s, c, want_grad)
                : dot_generic_row(v.row(static_cast<int>(m)), n_cols, d, kernel, spec.f_s, c,
                                  want_grad);
        out.value += dots.t1 / (kFourPi * d);
        if (want_grad) {
            const double dval_dd = -dots.t2 / (kFourPi * c * d) - dots.t1 / (kFourPi * d * d);
            out.grad += diff * (dval_dd / d);
        }
    }
    return out;
}

} // namespace

Observation apply_gamma(const SparseMeasure& measure, const MicArray& array,
                        const FilterKernel& kernel, const SamplingSpec& spec, double c) {
    Observation obs = zero_observation(array, kernel, spec);
    for (const Spike& sp : measure.spikes) {
        if (!(sp.amplitude >= 0.0)) throw InvalidInput("spike amplitudes must be nonnegative");
        if (!sp.position.finite()) throw InvalidInput("spike position must be finite");
        for (const Vec3& mic : array.positions)
            if (distance(sp.position, mic) == 0.0)
                throw SingularityError("spike coincides with a microphone");
    }
    const int n_mics = obs.data.rows();
    parallel_for(static_cast<std::size_t>(n_mics), [&](std::size_t m) {
        double* row = obs.data.row(static_cast<int>(m));
        const Vec3 mic = array.positions[m];
        for (const Spike& sp : measure.spikes) {
            const double d = distance(sp.position, mic);
            if (kernel.kind == KernelKind::SincLowpass)
                accumulate_sinc_row(sp.amplitude, d, spec.f_s, c, row, spec.n_samples);
            else
                accumulate_generic_row(sp.amplitude, d, kernel, spec.f_s, c, row, spec.n_samples);
        }
    });
    return obs;
}

std::pair<Observation, ImageSourceSet> synthesize_rir(const Scenario& scenario,
                                                      const FilterKernel& kernel,
                                                      const SamplingSpec& spec, int max_order,
                                                      double c) {
    validate_scenario(scenario);
    ImageSourceSet truth = enumerate_image_sources(scenario.room, scenario.src, max_order);
    Observation obs = apply_gamma(measure_from_sources(truth), scenario.array, kernel, spec, c);
    return {std::move(obs), std::move(truth)};
}

Observation add_noise(const Observation& obs, double psnr_db, std::uint64_t rng_seed) {
    double peak = 0.0;
    for (double v : obs.data.flat()) peak = std::max(peak, std::abs(v));
    if (peak == 0.0) throw InvalidInput("add_noise: all-zero observation");
    const double sigma = peak * std::pow(10.0, -psnr_db / 20.0);
    Observation out = obs;
    for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data.flat()[i] += sigma * counter_normal(rng_seed, i);
    return out;
}

Observation residual(const Observation& obs, const SparseMeasure& measure, double c) {
    if (obs.data.rows() != static_cast<int>(obs.array.positions.size()) ||
        obs.data.cols() != obs.spec.n_samples)
        throw InvalidInput("residual: observation dimensions do not match its spec");
    if (measure.empty()) return obs;
    Observation fit = apply_gamma(measure, obs.array, obs.kernel, obs.spec, c);
    Observation out = obs;
    for (std::size_t i = 0; i < out.data.size(); ++i) out.data.flat()[i] -= fit.data.flat()[i];
    return out;
}

AdjointValue adjoint_eval(const Mat& v, const Vec3& r, const MicArray& array,
                          const FilterKernel& kernel, const SamplingSpec& spec, double c) {
    if (v.rows() != static_cast<int>(array.positions.size()) || v.cols() > spec.n_samples)
        throw InvalidInput("adjoint_eval: dimension mismatch");
    return adjoint_impl(v, r, array, kernel, spec, c, true);
}

double adjoint_value(const Mat& v, const Vec3& r, const MicArray& array,
                     const FilterKernel& kernel, const SamplingSpec& spec, double c) {
    if (v.rows() != static_cast<int>(array.positions.size()) || v.cols() > spec.n_samples)
        throw InvalidInput("adjoint_value: dimension mismatch");
    return adjoint_impl(v, r, array, kernel, spec, c, false).value;
}

Observation truncate_samples(const Observation& obs, int j) {
    if (j < 1 || j > obs.data.cols()) throw InvalidInput("truncate_samples: column count out of range");
    Observation out;
    out.spec = {obs.spec.f_s, j};
    out.array = obs.array;
    out.kernel = obs.kernel;
    out.data = Mat(obs.data.rows(), j);
    for (int m = 0; m < obs.data.rows(); ++m)
        std::copy_n(obs.data.row(m), j, out.data.row(m));
    return out;
}

void gamma_flat(const Vec3& r, const MicArray& array, const FilterKernel& kernel,
                const SamplingSpec& spec, double c, double* out) {
    const int n = spec.n_samples;
    std::fill_n(out, array.positions.size() * static_cast<std::size_t>(n), 0.0);
    for (std::size_t m = 0; m < array.positions.size(); ++m) {
        const double d = distance(r, array.positions[m]);
        if (d == 0.0) throw SingularityError("gamma evaluated at a microphone position");
        if (kernel.kind == KernelKind::SincLowpass)
            accumulate_sinc_row(1.0, d, spec.f_s, c, out + m * n, n);
        else
            accumulate_generic_row(1.0, d, kernel, spec.f_s, c, out + m * n, n);
    }
}

std::vector<double> column_energies(const Mat& data) {
    std::vector<double> e(data.cols(), 0.0);
    for (int m = 0; m < data.rows(); ++m) {
        const double* row = data.row(m);
        for (int n = 0; n < data.cols(); ++n) e[n] += row[n] * row[n];
    }
    return e;
}

} // namespace imsrc
