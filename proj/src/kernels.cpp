#include "imsrc/kernels.hpp"

#include <cmath>

#include "imsrc/errors.hpp"

namespace imsrc {

double sinc(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return 1.0 - x2 / 6.0 + x2 * x2 / 120.0;
    }
    return std::sin(x) / x;
}

double sinc_deriv(double x) {
    if (std::abs(x) < 1e-4) {
        const double x2 = x * x;
        return x * (-1.0 / 3.0 + x2 / 30.0 - x2 * x2 / 840.0);
    }
    return (std::cos(x) - sinc(x)) / x;
}

FilterKernel FilterKernel::sinc_lowpass(double f_s) {
    if (!(f_s > 0.0)) throw InvalidInput("sinc kernel needs f_s > 0");
    return {KernelKind::SincLowpass, f_s, 0.0};
}

FilterKernel FilterKernel::gaussian(double sigma) {
    if (!(sigma > 0.0)) throw InvalidInput("gaussian kernel needs sigma > 0");
    return {KernelKind::Gaussian, 0.0, sigma};
}

SamplingSpec SamplingSpec::from_duration(double f_s, double t_max) {
    if (!(f_s > 0.0) || !(t_max >= 0.0)) throw InvalidInput("bad sampling parameters");
    return {f_s, static_cast<int>(std::lround(t_max * f_s)) + 1};
}

void validate_spec(const SamplingSpec& spec) {
    if (!(spec.f_s > 0.0) || spec.n_samples < 1) throw InvalidInput("bad sampling spec");
}

// Offsets within 1e-9 of the sampling lattice are treated as on-grid so that
// lattice-aligned arrivals produce exact Kronecker rows.
static constexpr double kLatticeSnap = 1e-9;

double kappa(const FilterKernel& kernel, double t) {
    if (kernel.kind == KernelKind::SincLowpass) {
        const double u = kernel.f_s * t;
        const double k = std::nearbyint(u);
        if (std::abs(u - k) <= kLatticeSnap) return k == 0.0 ? 1.0 : 0.0;
        return sinc(kPi * u);
    }
    return std::exp(-t * t / (2.0 * kernel.sigma * kernel.sigma));
}

double kappa_deriv(const FilterKernel& kernel, double t) {
    if (kernel.kind == KernelKind::SincLowpass) {
        return kPi * kernel.f_s * sinc_deriv(kPi * kernel.f_s * t);
    }
    const double s2 = kernel.sigma * kernel.sigma;
    return -t / s2 * std::exp(-t * t / (2.0 * s2));
}

double gamma_eval(const FilterKernel& kernel, const SamplingSpec& spec, const Vec3& mic, int n,
                  const Vec3& r, double c) {
    const double d = distance(r, mic);
    if (d == 0.0) throw SingularityError("gamma evaluated at a microphone position");
    return kappa(kernel, spec.sample_time(n) - d / c) / (kFourPi * d);
}

Vec3 gamma_grad(const FilterKernel& kernel, const SamplingSpec& spec, const Vec3& mic, int n,
                const Vec3& r, double c) {
    const Vec3 diff = r - mic;
    const double d = diff.norm();
    if (d == 0.0) throw SingularityError("gamma gradient at a microphone position");
    const double u = spec.sample_time(n) - d / c;
    // d(gamma)/dd = -kappa'(u)/(4 pi c d) - kappa(u)/(4 pi d^2)
    const double dgdd = -kappa_deriv(kernel, u) / (kFourPi * c * d) - kappa(kernel, u) / (kFourPi * d * d);
    return diff * (dgdd / d);
}

} // namespace imsrc
