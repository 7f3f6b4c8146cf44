#ifndef IMSRC_KERNELS_HPP
#define IMSRC_KERNELS_HPP

#include "imsrc/geometry.hpp"

namespace imsrc {

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kFourPi = 4.0 * kPi;

/// sin(x)/x with a series branch for |x| < 1e-4.
double sinc(double x);
/// d/dx sin(x)/x, evaluated as (cos x - sinc x)/x away from 0. The naive
/// formula cancels catastrophically near 0, hence the series branch.
double sinc_deriv(double x);

enum class KernelKind { SincLowpass, Gaussian };

/// Microphone response filter. Both variants satisfy kappa(0) > 0.
struct FilterKernel {
    KernelKind kind = KernelKind::SincLowpass;
    double f_s = 0.0;   // SincLowpass: cutoff = sampling frequency, Hz
    double sigma = 0.0; // Gaussian: width, seconds

    static FilterKernel sinc_lowpass(double f_s);
    static FilterKernel gaussian(double sigma);
};

struct SamplingSpec {
    double f_s = 0.0;
    int n_samples = 0;

    double t_max() const { return (n_samples - 1) / f_s; }
    double sample_time(int n) const { return n / f_s; }
    /// N such that (N-1)/f_s = t_max (rounded).
    static SamplingSpec from_duration(double f_s, double t_max);
};

void validate_spec(const SamplingSpec& spec);

double kappa(const FilterKernel& kernel, double t);
double kappa_deriv(const FilterKernel& kernel, double t);

/// Observation kernel gamma_{m,n}(r) = kappa(n/f_s - |r-mic|/c) / (4 pi |r-mic|).
double gamma_eval(const FilterKernel& kernel, const SamplingSpec& spec, const Vec3& mic, int n,
                  const Vec3& r, double c);

/// Analytic spatial gradient of gamma_{m,n} with respect to r.
Vec3 gamma_grad(const FilterKernel& kernel, const SamplingSpec& spec, const Vec3& mic, int n,
                const Vec3& r, double c);

} // namespace imsrc

#endif
