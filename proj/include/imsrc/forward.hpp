#ifndef IMSRC_FORWARD_HPP
#define IMSRC_FORWARD_HPP

#include <cstdint>
#include <utility>
#include <vector>

#include "imsrc/geometry.hpp"
#include "imsrc/kernels.hpp"
#include "imsrc/linalg.hpp"

namespace imsrc {

struct Spike {
    double amplitude = 0.0;
    Vec3 position;
};

/// Finite nonnegative combination of Dirac spikes; may be empty.
struct SparseMeasure {
    std::vector<Spike> spikes;

    double total_mass() const;
    bool empty() const { return spikes.empty(); }
};

SparseMeasure measure_from_sources(const ImageSourceSet& set);

/// Sampled, filtered multi-channel pressure observation (M rows, N columns).
struct Observation {
    Mat data;
    SamplingSpec spec;
    MicArray array;
    FilterKernel kernel;
};

Observation zero_observation(const MicArray& array, const FilterKernel& kernel,
                             const SamplingSpec& spec);

/// x_{m,n} = sum_k a_k gamma_{m,n}(r_k). Throws SingularityError if a spike
/// sits on a microphone.
Observation apply_gamma(const SparseMeasure& measure, const MicArray& array,
                        const FilterKernel& kernel, const SamplingSpec& spec, double c);

/// Enumerates image sources up to max_order and applies the observation
/// operator; returns the observation and the ground-truth source set.
std::pair<Observation, ImageSourceSet> synthesize_rir(const Scenario& scenario,
                                                      const FilterKernel& kernel,
                                                      const SamplingSpec& spec, int max_order,
                                                      double c);

/// Adds i.i.d. Gaussian noise with sigma = max|x| * 10^(-psnr/20).
/// Counter-based per entry: bit-reproducible for any thread count.
Observation add_noise(const Observation& obs, double psnr_db, std::uint64_t rng_seed);

/// obs - Gamma(measure), elementwise.
Observation residual(const Observation& obs, const SparseMeasure& measure, double c);

struct AdjointValue {
    double value = 0.0;
    Vec3 grad;
};

/// (Gamma* v)(r) = sum_{m,n} v_{m,n} gamma_{m,n}(r) and its spatial gradient.
/// v may have fewer columns than spec.n_samples (truncated window).
AdjointValue adjoint_eval(const Mat& v, const Vec3& r, const MicArray& array,
                          const FilterKernel& kernel, const SamplingSpec& spec, double c);

/// Value-only variant (cheaper; used for dense grid sweeps).
double adjoint_value(const Mat& v, const Vec3& r, const MicArray& array,
                     const FilterKernel& kernel, const SamplingSpec& spec, double c);

/// First j columns (1 <= j <= N).
Observation truncate_samples(const Observation& obs, int j);

/// Writes gamma(r) flattened m-major into out[0 .. M * spec.n_samples).
/// Column-assembly building block for the solver and certificates.
void gamma_flat(const Vec3& r, const MicArray& array, const FilterKernel& kernel,
                const SamplingSpec& spec, double c, double* out);

/// Squared l2 energy of each column.
std::vector<double> column_energies(const Mat& data);

} // namespace imsrc

#endif
