#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "imsrc/errors.hpp"
#include "imsrc/forward.hpp"
#include "imsrc/parallel.hpp"
#include "imsrc/rng.hpp"

using namespace imsrc;

namespace {

// Independent naive oracle: triple loop over (k, m, n) with its own sinc.
double oracle_sinc(double x) { return std::abs(x) < 1e-9 ? 1.0 : std::sin(x) / x; }

Mat oracle_apply(const SparseMeasure& measure, const MicArray& array, double f_s, int n_samples,
                 double c) {
    Mat x(static_cast<int>(array.positions.size()), n_samples);
    for (const Spike& sp : measure.spikes)
        for (std::size_t m = 0; m < array.positions.size(); ++m)
            for (int n = 0; n < n_samples; ++n) {
                const double d = distance(sp.position, array.positions[m]);
                const double t = n / f_s - d / c;
                x(static_cast<int>(m), n) +=
                    sp.amplitude * oracle_sinc(3.14159265358979323846 * f_s * t) /
                    (4.0 * 3.14159265358979323846 * d);
            }
    return x;
}

SparseMeasure random_measure(Rng& rng, int count, const MicArray& array) {
    SparseMeasure m;
    while (static_cast<int>(m.spikes.size()) < count) {
        const Vec3 p{rng.uniform(-4, 8), rng.uniform(-4, 8), rng.uniform(-3, 6)};
        bool ok = true;
        for (const Vec3& mic : array.positions)
            if (distance(p, mic) < 0.1) ok = false;
        if (ok) m.spikes.push_back({rng.uniform(0.05, 1.0), p});
    }
    return m;
}

} // namespace

TEST_SUITE("forward") {

TEST_CASE("empty measure maps to the zero matrix") {
    const MicArray array = make_em32_array({1, 1, 1});
    const Observation obs = apply_gamma({}, array, FilterKernel::sinc_lowpass(8000.0),
                                        {8000.0, 32}, 343.0);
    for (double v : obs.data.flat()) CHECK(v == 0.0);
}

TEST_CASE("on-grid spike gives a Kronecker row at the aligned microphone") {
    const double f_s = 16000.0;
    const double c = 343.0;
    MicArray array;
    array.positions = {{0, 0, 0}, {0.3, 0.1, -0.2}};
    const SamplingSpec spec{f_s, 48};
    const int n0 = 20;
    const Vec3 r{c * n0 / f_s, 0.0, 0.0};
    const FilterKernel lp = FilterKernel::sinc_lowpass(f_s);
    const Observation obs = apply_gamma({{{1.0, r}}}, array, lp, spec, c);

    const double d0 = r.norm();
    for (int n = 0; n < spec.n_samples; ++n)
        CHECK(obs.data(0, n) == (n == n0 ? 1.0 / (kFourPi * d0) : 0.0));
    // off-grid microphone row follows the generic formula
    for (int n = 0; n < spec.n_samples; ++n)
        CHECK(obs.data(1, n) ==
              doctest::Approx(gamma_eval(lp, spec, array.positions[1], n, r, c)).epsilon(1e-13));
}

TEST_CASE("random measures match the naive triple-loop oracle") {
    const double f_s = 16000.0;
    const double c = 343.0;
    const MicArray array = make_em32_array({1.2, 0.8, 1.5});
    const SamplingSpec spec{f_s, 128};
    Rng rng(11);
    for (int trial = 0; trial < 20; ++trial) {
        const SparseMeasure m = random_measure(rng, 10, array);
        const Observation obs = apply_gamma(m, array, FilterKernel::sinc_lowpass(f_s), spec, c);
        const Mat expect = oracle_apply(m, array, f_s, spec.n_samples, c);
        double max_err = 0.0;
        for (std::size_t i = 0; i < obs.data.size(); ++i)
            max_err = std::max(max_err, std::abs(obs.data.flat()[i] - expect.flat()[i]));
        CHECK(max_err < 1e-12);
    }
}

TEST_CASE("apply_gamma is linear in the measure") {
    const MicArray array = make_em32_array({0.5, 0.5, 0.5});
    const SamplingSpec spec{8000.0, 64};
    const FilterKernel lp = FilterKernel::sinc_lowpass(8000.0);
    Rng rng(12);
    const SparseMeasure m1 = random_measure(rng, 4, array);
    const SparseMeasure m2 = random_measure(rng, 3, array);
    const double a = 0.7;
    const double b = 1.9;

    SparseMeasure combo;
    for (const Spike& s : m1.spikes) combo.spikes.push_back({a * s.amplitude, s.position});
    for (const Spike& s : m2.spikes) combo.spikes.push_back({b * s.amplitude, s.position});

    const Observation o1 = apply_gamma(m1, array, lp, spec, 343.0);
    const Observation o2 = apply_gamma(m2, array, lp, spec, 343.0);
    const Observation oc = apply_gamma(combo, array, lp, spec, 343.0);
    for (std::size_t i = 0; i < oc.data.size(); ++i)
        CHECK(oc.data.flat()[i] ==
              doctest::Approx(a * o1.data.flat()[i] + b * o2.data.flat()[i]).epsilon(1e-12));
}

TEST_CASE("adjoint identity <Gamma psi, v> == sum a_k (Gamma* v)(r_k)") {
    const MicArray array = make_em32_array({1.0, 1.0, 1.0});
    const SamplingSpec spec{16000.0, 96};
    const FilterKernel lp = FilterKernel::sinc_lowpass(16000.0);
    const double c = 343.0;
    Rng rng(13);
    for (int trial = 0; trial < 20; ++trial) {
        const SparseMeasure m = random_measure(rng, 5, array);
        Mat v(static_cast<int>(array.positions.size()), spec.n_samples);
        for (double& x : v.flat()) x = rng.uniform(-1, 1);

        const Observation gm = apply_gamma(m, array, lp, spec, c);
        double lhs = 0.0;
        for (std::size_t i = 0; i < gm.data.size(); ++i) lhs += gm.data.flat()[i] * v.flat()[i];

        double rhs = 0.0;
        for (const Spike& s : m.spikes)
            rhs += s.amplitude * adjoint_eval(v, s.position, array, lp, spec, c).value;

        CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(std::abs(lhs), 1e-30));
    }
}

TEST_CASE("adjoint of its own column is the squared column norm") {
    const MicArray array = make_em32_array({0, 0, 0});
    const SamplingSpec spec{8000.0, 64};
    const FilterKernel lp = FilterKernel::sinc_lowpass(8000.0);
    const Vec3 r{1.1, -0.4, 0.6};
    const Observation g = apply_gamma({{{1.0, r}}}, array, lp, spec, 343.0);
    double norm2 = 0.0;
    for (double v : g.data.flat()) norm2 += v * v;
    const AdjointValue a = adjoint_eval(g.data, r, array, lp, spec, 343.0);
    CHECK(a.value == doctest::Approx(norm2).epsilon(1e-12));
    CHECK(a.value > 0.0);

    Mat zero(g.data.rows(), g.data.cols());
    const AdjointValue z = adjoint_eval(zero, r, array, lp, spec, 343.0);
    CHECK(z.value == 0.0);
    CHECK(z.grad.norm() == 0.0);
}

TEST_CASE("adjoint gradient matches finite differences") {
    const MicArray array = make_em32_array({0.6, -0.2, 0.9});
    const SamplingSpec spec{24000.0, 128};
    const FilterKernel lp = FilterKernel::sinc_lowpass(24000.0);
    const double c = 343.0;
    const double h = 1e-6;
    Rng rng(14);
    Mat v(static_cast<int>(array.positions.size()), spec.n_samples);
    for (double& x : v.flat()) x = rng.uniform(-1, 1);

    int checked = 0;
    for (int i = 0; i < 60; ++i) {
        const Vec3 r{rng.uniform(-2, 3), rng.uniform(-2, 3), rng.uniform(-2, 3)};
        bool ok = true;
        for (const Vec3& mic : array.positions)
            if (distance(r, mic) < 0.01) ok = false;
        if (!ok) continue;
        const AdjointValue a = adjoint_eval(v, r, array, lp, spec, c);
        Vec3 fd;
        for (int axis = 0; axis < 3; ++axis) {
            Vec3 rp = r;
            Vec3 rm = r;
            rp[axis] += h;
            rm[axis] -= h;
            fd[axis] = (adjoint_value(v, rp, array, lp, spec, c) -
                        adjoint_value(v, rm, array, lp, spec, c)) /
                       (2 * h);
        }
        if (fd.norm() > 1e-9) {
            CHECK((a.grad - fd).norm() / fd.norm() < 1e-6);
            ++checked;
        }
    }
    CHECK(checked > 40);
}

TEST_CASE("gamma_flat equals per-entry gamma_eval") {
    const MicArray array = make_em32_array({0.2, 0.4, 1.1});
    const SamplingSpec spec{16000.0, 40};
    const double c = 343.0;
    const Vec3 r{2.0, 1.0, 0.5};
    for (const FilterKernel& kernel :
         {FilterKernel::sinc_lowpass(16000.0), FilterKernel::gaussian(2e-4)}) {
        std::vector<double> flat(array.positions.size() * spec.n_samples);
        gamma_flat(r, array, kernel, spec, c, flat.data());
        for (std::size_t m = 0; m < array.positions.size(); ++m)
            for (int n = 0; n < spec.n_samples; ++n)
                CHECK(flat[m * spec.n_samples + n] ==
                      doctest::Approx(gamma_eval(kernel, spec, array.positions[m], n, r, c))
                          .epsilon(1e-12));
    }
}

TEST_CASE("noise: sigma formula, determinism, and the large-PSNR limit") {
    const MicArray array = make_em32_array({1, 1, 1});
    const SamplingSpec spec{8000.0, 125};
    Observation obs = zero_observation(array, FilterKernel::sinc_lowpass(8000.0), spec);
    Rng rng(15);
    for (double& v : obs.data.flat()) v = rng.uniform(-0.5, 1.0);
    obs.data(3, 7) = 1.0; // peak = 1 so sigma = 10^(-PSNR/20)

    SUBCASE("deterministic under the seed") {
        const Observation n1 = add_noise(obs, 30.0, 99);
        const Observation n2 = add_noise(obs, 30.0, 99);
        for (std::size_t i = 0; i < n1.data.size(); ++i)
            CHECK(n1.data.flat()[i] == n2.data.flat()[i]);
    }
    SUBCASE("very large PSNR returns the input") {
        const Observation n = add_noise(obs, 400.0, 7);
        for (std::size_t i = 0; i < n.data.size(); ++i)
            CHECK(std::abs(n.data.flat()[i] - obs.data.flat()[i]) < 1e-12);
    }
    SUBCASE("empirical std over 1e6 draws within 1% of sigma = 0.1") {
        // PSNR 20 dB with peak 1 -> sigma 0.1; pool the noise added across
        // repeated seeds until a million samples are drawn
        const double sigma = 0.1;
        double sum = 0.0;
        double sum2 = 0.0;
        long n = 0;
        for (std::uint64_t seed = 0; n < 1000000; ++seed) {
            const Observation noisy = add_noise(obs, 20.0, seed);
            for (std::size_t i = 0; i < obs.data.size(); ++i) {
                const double z = noisy.data.flat()[i] - obs.data.flat()[i];
                sum += z;
                sum2 += z * z;
                ++n;
            }
        }
        const double mean = sum / n;
        const double std = std::sqrt(sum2 / n - mean * mean);
        CHECK(std == doctest::Approx(sigma).epsilon(0.01));
    }
    SUBCASE("all-zero observation is rejected") {
        const Observation zero = zero_observation(array, obs.kernel, spec);
        CHECK_THROWS_AS(add_noise(zero, 30.0, 1), InvalidInput);
    }
}

TEST_CASE("residual") {
    const MicArray array = make_em32_array({0.8, 0.9, 1.0});
    const SamplingSpec spec{16000.0, 80};
    const FilterKernel lp = FilterKernel::sinc_lowpass(16000.0);
    const double c = 343.0;
    Rng rng(16);
    const SparseMeasure truth = random_measure(rng, 6, array);
    const Observation obs = apply_gamma(truth, array, lp, spec, c);

    SUBCASE("zero measure returns the observation") {
        const Observation r = residual(obs, {}, c);
        for (std::size_t i = 0; i < r.data.size(); ++i)
            CHECK(r.data.flat()[i] == obs.data.flat()[i]);
    }
    SUBCASE("the generating measure zeroes the residual") {
        const Observation r = residual(obs, truth, c);
        for (double v : r.data.flat()) CHECK(std::abs(v) < 1e-12);
    }
    SUBCASE("random measure versus the naive oracle") {
        const SparseMeasure other = random_measure(rng, 4, array);
        const Observation r = residual(obs, other, c);
        const Mat fit = oracle_apply(other, array, spec.f_s, spec.n_samples, c);
        for (std::size_t i = 0; i < r.data.size(); ++i)
            CHECK(r.data.flat()[i] ==
                  doctest::Approx(obs.data.flat()[i] - fit.flat()[i]).epsilon(1e-11));
    }
}

TEST_CASE("truncate_samples") {
    const MicArray array = make_em32_array({1, 1, 1});
    const SamplingSpec spec{8000.0, 50};
    Observation obs = zero_observation(array, FilterKernel::sinc_lowpass(8000.0), spec);
    Rng rng(17);
    for (double& v : obs.data.flat()) v = rng.uniform(-1, 1);

    const Observation full = truncate_samples(obs, 50);
    for (std::size_t i = 0; i < obs.data.size(); ++i)
        CHECK(full.data.flat()[i] == obs.data.flat()[i]);

    const Observation first = truncate_samples(obs, 1);
    CHECK(first.data.cols() == 1);
    CHECK(first.spec.n_samples == 1);
    for (int m = 0; m < obs.data.rows(); ++m) CHECK(first.data(m, 0) == obs.data(m, 0));

    // energies of disjoint column blocks sum to the total
    const int j = 17;
    const Observation head = truncate_samples(obs, j);
    double head_e = 0.0;
    for (double v : head.data.flat()) head_e += v * v;
    double tail_e = 0.0;
    for (int m = 0; m < obs.data.rows(); ++m)
        for (int n = j; n < obs.data.cols(); ++n) tail_e += obs.data(m, n) * obs.data(m, n);
    double total = 0.0;
    for (double v : obs.data.flat()) total += v * v;
    CHECK(head_e + tail_e == doctest::Approx(total).epsilon(1e-12));

    CHECK_THROWS_AS(truncate_samples(obs, 0), InvalidInput);
    CHECK_THROWS_AS(truncate_samples(obs, 51), InvalidInput);
}

TEST_CASE("observation norm stays positive for nonzero observable measures") {
    MicArray array;
    array.positions = {{0, 0, 0}, {0.1, 0, 0}, {0, 0.1, 0}, {0, 0, 0.1}};
    const SamplingSpec spec{8000.0, 32};
    const FilterKernel lp = FilterKernel::sinc_lowpass(8000.0);
    Rng rng(18);
    double min_ratio = 1e300;
    for (int trial = 0; trial < 10000; ++trial) {
        SparseMeasure m;
        const int k = 1 + static_cast<int>(rng.uniform(0, 3));
        for (int i = 0; i < k; ++i) {
            // inside the observable set: within c*t_max of every mic, off the mics
            const Vec3 p{rng.uniform(0.05, 1.2), rng.uniform(0.05, 1.2), rng.uniform(0.05, 1.2)};
            m.spikes.push_back({rng.uniform(0.01, 1.0), p});
        }
        const Observation obs = apply_gamma(m, array, lp, spec, 343.0);
        min_ratio = std::min(min_ratio, frobenius_norm(obs.data) / m.total_mass());
    }
    CHECK(min_ratio > 0.0);
}

TEST_CASE("spike on a microphone raises a singularity error") {
    const MicArray array = make_em32_array({1, 1, 1});
    const SamplingSpec spec{8000.0, 8};
    SparseMeasure m;
    m.spikes.push_back({1.0, array.positions[5]});
    CHECK_THROWS_AS(apply_gamma(m, array, FilterKernel::sinc_lowpass(8000.0), spec, 343.0),
                    SingularityError);
}

TEST_CASE("synthesize_rir composes enumeration and application") {
    Scenario s;
    s.room.dims = {4.0, 3.2, 2.6};
    s.room.absorption = {0.1, 0.1, 0.2, 0.2, 0.15, 0.15};
    s.src = {3.1, 1.1, 1.0};
    s.array = make_em32_array({1.2, 2.0, 1.3});
    const SamplingSpec spec{8000.0, 120};
    const FilterKernel lp = FilterKernel::sinc_lowpass(8000.0);

    auto [obs0, truth0] = synthesize_rir(s, lp, spec, 0, s.c);
    CHECK(truth0.sources.size() == 1);
    const Observation direct = apply_gamma(measure_from_sources(truth0), s.array, lp, spec, s.c);
    for (std::size_t i = 0; i < obs0.data.size(); ++i)
        CHECK(obs0.data.flat()[i] == direct.data.flat()[i]);

    auto [obs2, truth2] = synthesize_rir(s, lp, spec, 2, s.c);
    CHECK(truth2.sources.size() == 25);

    // doubling all amplitudes doubles the observation
    SparseMeasure doubled = measure_from_sources(truth2);
    for (Spike& sp : doubled.spikes) sp.amplitude *= 2.0;
    const Observation obs_doubled = apply_gamma(doubled, s.array, lp, spec, s.c);
    for (std::size_t i = 0; i < obs2.data.size(); ++i)
        CHECK(obs_doubled.data.flat()[i] ==
              doctest::Approx(2.0 * obs2.data.flat()[i]).epsilon(1e-12));
}

TEST_CASE("results are identical for any thread count") {
    const MicArray array = make_em32_array({1.0, 1.0, 1.0});
    const SamplingSpec spec{16000.0, 200};
    const FilterKernel lp = FilterKernel::sinc_lowpass(16000.0);
    Rng rng(19);
    const SparseMeasure m = random_measure(rng, 8, array);

    set_max_threads(1);
    const Observation serial = apply_gamma(m, array, lp, spec, 343.0);
    set_max_threads(4);
    const Observation parallel = apply_gamma(m, array, lp, spec, 343.0);
    set_max_threads(0);
    for (std::size_t i = 0; i < serial.data.size(); ++i)
        CHECK(serial.data.flat()[i] == parallel.data.flat()[i]);
}

} // TEST_SUITE
