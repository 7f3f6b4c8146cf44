// Acceptance suite: runs every criterion end to end and prints one
// PASS/FAIL line per criterion. Exit code is the number of failures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "imsrc/analysis.hpp"
#include "imsrc/harness.hpp"
#include "imsrc/rng.hpp"
#include "imsrc/solver.hpp"

using namespace imsrc;

namespace {

const double kC = 343.0;
int g_failures = 0;

void report(int criterion, bool pass, const std::string& detail) {
    std::printf("%s criterion %2d: %s\n", pass ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* format, ...) {
    va_list args;
    va_start(args, format);
    char buffer[512];
    std::vsnprintf(buffer, sizeof buffer, format, args);
    va_end(args);
    return buffer;
}

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double min_mic_dist(const Vec3& p, const MicArray& array) {
    double d = std::numeric_limits<double>::infinity();
    for (const Vec3& mic : array.positions) d = std::min(d, distance(p, mic));
    return d;
}

// The fixed desk-scale scene shared by criteria 8, 9 and 11.
Scenario desk_scenario() {
    Scenario s;
    s.room.dims = {6.45, 2.51, 2.35};
    s.room.absorption = {0.1, 0.25, 0.2, 0.15, 0.12, 0.28};
    s.src = {4.5, 1.1, 1.0};
    s.array = make_em32_array({2.2, 1.25, 1.2});
    s.rng_seed = 20260808;
    return s;
}

// --------------------------------------------------------------- criterion 1

void criterion_1() {
    const Room room{{6.4, 5.1, 2.9}, {0.1, 0.25, 0.04, 0.3, 0.12, 0.2}};
    const auto t0 = std::chrono::steady_clock::now();
    const ImageSourceSet set = enumerate_image_sources(room, {1.0, 2.0, 1.4}, 20);
    const double elapsed = seconds_since(t0);
    const bool pass = set.sources.size() == 11521 && elapsed < 1.0;
    report(1, pass,
           fmt("image sources at max_order 20: %zu (want 11521) in %.3f s (< 1 s)",
               set.sources.size(), elapsed));
}

// --------------------------------------------------------------- criterion 2

double oracle_sinc(double x) { return std::abs(x) < 1e-9 ? 1.0 : std::sin(x) / x; }

void criterion_2() {
    const double f_s = 16000.0;
    const MicArray array = make_em32_array({1.2, 0.8, 1.5});
    const SamplingSpec spec{f_s, 160};
    const FilterKernel lp = FilterKernel::sinc_lowpass(f_s);
    Rng rng(101);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        SparseMeasure m;
        while (static_cast<int>(m.spikes.size()) < 10) {
            const Vec3 p{rng.uniform(-4, 8), rng.uniform(-4, 8), rng.uniform(-3, 6)};
            if (min_mic_dist(p, array) < 0.1) continue;
            m.spikes.push_back({rng.uniform(0.05, 1.0), p});
        }
        const Observation obs = apply_gamma(m, array, lp, spec, kC);
        for (std::size_t mi = 0; mi < array.positions.size(); ++mi)
            for (int n = 0; n < spec.n_samples; ++n) {
                double expect = 0.0;
                for (const Spike& sp : m.spikes) {
                    const double d = distance(sp.position, array.positions[mi]);
                    expect += sp.amplitude * oracle_sinc(kPi * f_s * (n / f_s - d / kC)) /
                              (kFourPi * d);
                }
                worst = std::max(worst, std::abs(obs.data(static_cast<int>(mi), n) - expect));
            }
    }
    report(2, worst < 1e-12,
           fmt("forward vs naive triple loop over 100 random 10-spike measures: "
               "max abs err %.3g (< 1e-12)",
               worst));
}

// --------------------------------------------------------------- criterion 3

void criterion_3() {
    bool pass = true;
    std::string detail = "ALB sums:";
    Rng rng(103);
    for (double f_s : {8000.0, 16000.0, 24000.0, 32000.0}) {
        const FilterKernel lp = FilterKernel::sinc_lowpass(f_s);
        const SamplingSpec spec = SamplingSpec::from_duration(f_s, 0.05);
        std::vector<double> taus(10000);
        for (double& t : taus) t = rng.uniform(0.0, spec.t_max());
        const AlbResult random_taus = alb_discrete_check(lp, spec, taus);

        double grid_err = 0.0;
        for (int n0 : {0, 1, 5, spec.n_samples / 3, spec.n_samples / 2, spec.n_samples - 1}) {
            const AlbResult one = alb_discrete_check(lp, spec, {n0 / f_s});
            grid_err = std::max(grid_err, std::abs(one.min_sum - 1.0));
        }
        const bool ok = random_taus.ok && random_taus.min_sum > 0.0 && grid_err == 0.0;
        pass = pass && ok;
        detail += fmt(" [%g kHz N=%d min %.4f on-grid exact%s]", f_s / 1000.0, spec.n_samples,
                      random_taus.min_sum, ok ? "" : " FAIL");
    }
    report(3, pass, detail);
}

// --------------------------------------------------------------- criterion 4

void criterion_4() {
    const double f_s = 16000.0;
    const MicArray array = make_em32_array({1.0, 1.0, 1.0});
    const SamplingSpec spec{f_s, 128};
    const FilterKernel lp = FilterKernel::sinc_lowpass(f_s);
    Rng rng(104);
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
        SparseMeasure m;
        while (static_cast<int>(m.spikes.size()) < 6) {
            const Vec3 p{rng.uniform(-3, 5), rng.uniform(-3, 5), rng.uniform(-2, 4)};
            if (min_mic_dist(p, array) < 0.05) continue;
            m.spikes.push_back({rng.uniform(0.05, 1.0), p});
        }
        Mat v(static_cast<int>(array.positions.size()), spec.n_samples);
        for (double& x : v.flat()) x = rng.uniform(-1, 1);

        const Observation gm = apply_gamma(m, array, lp, spec, kC);
        double lhs = 0.0;
        for (std::size_t i = 0; i < gm.data.size(); ++i) lhs += gm.data.flat()[i] * v.flat()[i];
        double rhs = 0.0;
        for (const Spike& s : m.spikes)
            rhs += s.amplitude * adjoint_eval(v, s.position, array, lp, spec, kC).value;
        worst = std::max(worst, std::abs(lhs - rhs) / std::max(std::abs(lhs), 1e-30));
    }
    report(4, worst < 1e-10,
           fmt("adjoint identity over 100 random instances: max rel err %.3g (< 1e-10)", worst));
}

// --------------------------------------------------------------- criterion 5

void criterion_5() {
    const double f_s = 24000.0;
    const double h = 1e-6;
    const MicArray array = make_em32_array({0.6, -0.2, 0.9});
    const SamplingSpec spec{f_s, 128};
    const FilterKernel lp = FilterKernel::sinc_lowpass(f_s);
    Rng rng(105);

    // Points where a central difference at this h cannot certify 1e-6 (true
    // gradient below ~1% of its natural scale pi f_s / c * |field|) are
    // redrawn; h is pinned, so that floor is the oracle's own resolution.
    int checked_gamma = 0;
    double worst_gamma = 0.0;
    while (checked_gamma < 1000) {
        const Vec3 r{rng.uniform(-2, 3), rng.uniform(-2, 3), rng.uniform(-2, 3)};
        if (min_mic_dist(r, array) < 0.01) continue;
        const std::size_t mi = rng.next_u64() % array.positions.size();
        const Vec3 mic = array.positions[mi];
        const int n = static_cast<int>(rng.next_u64() % spec.n_samples);
        const Vec3 g = gamma_grad(lp, spec, mic, n, r, kC);
        Vec3 fd;
        double f_scale = 0.0;
        for (int axis = 0; axis < 3; ++axis) {
            Vec3 rp = r;
            Vec3 rm = r;
            rp[axis] += h;
            rm[axis] -= h;
            const double fp = gamma_eval(lp, spec, mic, n, rp, kC);
            const double fm = gamma_eval(lp, spec, mic, n, rm, kC);
            fd[axis] = (fp - fm) / (2 * h);
            f_scale = std::max({f_scale, std::abs(fp), std::abs(fm)});
        }
        if (fd.norm() <= 0.01 * kPi * f_s / kC * f_scale) continue;
        worst_gamma = std::max(worst_gamma, (g - fd).norm() / fd.norm());
        ++checked_gamma;
    }

    Mat v(static_cast<int>(array.positions.size()), spec.n_samples);
    for (double& x : v.flat()) x = rng.uniform(-1, 1);
    int checked_adj = 0;
    double worst_adj = 0.0;
    while (checked_adj < 1000) {
        const Vec3 r{rng.uniform(-2, 3), rng.uniform(-2, 3), rng.uniform(-2, 3)};
        if (min_mic_dist(r, array) < 0.01) continue;
        const AdjointValue a = adjoint_eval(v, r, array, lp, spec, kC);
        Vec3 fd;
        double f_scale = 0.0;
        for (int axis = 0; axis < 3; ++axis) {
            Vec3 rp = r;
            Vec3 rm = r;
            rp[axis] += h;
            rm[axis] -= h;
            const double fp = adjoint_value(v, rp, array, lp, spec, kC);
            const double fm = adjoint_value(v, rm, array, lp, spec, kC);
            fd[axis] = (fp - fm) / (2 * h);
            f_scale = std::max({f_scale, std::abs(fp), std::abs(fm)});
        }
        if (fd.norm() <= 0.01 * kPi * f_s / kC * f_scale) continue;
        worst_adj = std::max(worst_adj, (a.grad - fd).norm() / fd.norm());
        ++checked_adj;
    }

    report(5, worst_gamma < 1e-6 && worst_adj < 1e-6,
           fmt("analytic vs central-difference gradients at 1000+1000 points: "
               "grad gamma %.3g, grad adjoint %.3g (< 1e-6)",
               worst_gamma, worst_adj));
}

// --------------------------------------------------------------- criterion 6

void criterion_6() {
    DatasetSpec dspec;
    dspec.n_rooms = 1;
    dspec.rng_seed = 106;
    const Scenario s = generate_dataset(dspec).front();

    // five well-separated spikes: the source and four of its order-1 images
    const ImageSourceSet order1 = enumerate_image_sources(s.room, s.src, 1);
    std::vector<Vec3> positions{order1.sources.front().position};
    for (const ImageSource& cand : order1.sources) {
        if (positions.size() >= 5) break;
        bool separated = true;
        for (const Vec3& p : positions)
            if (distance(cand.position, p) < 0.8) separated = false;
        if (separated) positions.push_back(cand.position);
    }
    const std::vector<int> signs(positions.size(), 1);

    const double f_s = 24000.0;
    const FilterKernel lp = FilterKernel::sinc_lowpass(f_s);
    const SamplingSpec spec = SamplingSpec::from_duration(f_s, 0.015);
    const Precertificate cert = precertificate_eta_v(positions, signs, s.array, lp, spec, kC);

    double worst_val = 0.0;
    double worst_grad = 0.0;
    for (std::size_t k = 0; k < positions.size(); ++k) {
        const AdjointValue at = cert.eval(positions[k]);
        worst_val = std::max(worst_val, std::abs(at.value - 1.0));
        worst_grad = std::max(worst_grad, at.grad.norm() * kC / (kPi * f_s));
    }
    report(6, positions.size() == 5 && worst_val < 1e-6 && worst_grad < 1e-6,
           fmt("precertificate on 5 well-separated sources: |eta-1| %.3g, scaled grad %.3g "
               "(< 1e-6)",
               worst_val, worst_grad));
}

// --------------------------------------------------------------- criterion 7

void criterion_7() {
    const double t_max = 0.02;
    Room room;
    room.dims = {3.8, 3.1, 2.4};
    room.absorption = {0.12, 0.2, 0.15, 0.25, 0.1, 0.3};
    const Vec3 src{1.2, 0.9, 1.1};
    const Vec3 center{2.4, 2.0, 1.3};

    const ImageSourceSet all = enumerate_image_sources(room, src, 3);
    std::vector<Vec3> positions;
    std::vector<int> signs;
    for (const ImageSource& s : all.sources)
        if (distance(s.position, center) <= kC * t_max - 0.25) {
            positions.push_back(s.position);
            signs.push_back(1);
        }

    struct Config {
        double f_s;
        double radius;
    };
    std::vector<double> off_max;
    for (const Config& cfg :
         {Config{8000.0, 0.042}, Config{24000.0, 0.105}, Config{32000.0, 0.21}}) {
        const MicArray array = make_em32_array(center, cfg.radius);
        const SamplingSpec spec = SamplingSpec::from_duration(cfg.f_s, t_max);
        const FilterKernel lp = FilterKernel::sinc_lowpass(cfg.f_s);
        const Precertificate cert = precertificate_eta_v(positions, signs, array, lp, spec, kC);
        const PlaneSpec plane{2, 1.1, -4.5, 8.5, -4.5, 8.0, 141, 141};
        const Mat vals = sample_certificate_plane(
            [&](const Vec3& r) { return std::abs(cert.eval(r).value); }, plane);
        double peak = 0.0;
        for (int iv = 0; iv < plane.nv; ++iv)
            for (int iu = 0; iu < plane.nu; ++iu) {
                const Vec3 p = plane.point(iu, iv);
                bool off_source = true;
                for (const Vec3& sp : positions)
                    if (distance(p, sp) < 0.25) off_source = false;
                if (off_source) peak = std::max(peak, vals(iv, iu));
            }
        off_max.push_back(peak);
    }
    const bool pass = off_max[0] > 1.0 && off_max[0] > off_max[1] && off_max[1] > off_max[2];
    report(7, pass,
           fmt("off-source |eta_V| across (8k,4.2cm)->(24k,10.5cm)->(32k,21cm): "
               "%.4f > %.4f > %.4f, first > 1",
               off_max[0], off_max[1], off_max[2]));
}

// ----------------------------------------------------- criteria 8, 9 and 11

struct DeskRun {
    RecoveryResult result;
    MatchReport report;
    Observation obs;
};

DeskRun run_desk(bool noisy) {
    const double f_s = 32000.0;
    const double t_max = 0.02;
    const Scenario s = desk_scenario();
    const SamplingSpec spec = SamplingSpec::from_duration(f_s, t_max);
    const FilterKernel lp = FilterKernel::sinc_lowpass(f_s);
    auto [obs, truth] = synthesize_rir(s, lp, spec, 3, kC);
    if (noisy) obs = add_noise(obs, 30.0, s.rng_seed);
    DeskRun run;
    run.result = solve(obs, kC, {});
    const ImageSourceSet observable = observable_subset(truth, s.array, t_max, kC, 0.01);
    run.report = match_and_score(observable, run.result.measure, s.array.center());
    run.obs = std::move(obs);
    return run;
}

void criterion_8(const DeskRun& run, double elapsed) {
    const OrderStats* o0 = run.report.order_stats(0);
    const OrderStats* o1 = run.report.order_stats(1);
    const bool orders_ok = o0 && o1 && o0->recall() == 1.0 && o1->recall() == 1.0;
    double ee01 = 0.0;
    long n01 = 0;
    if (o0 && o1) {
        ee01 = o0->sum_ee + o1->sum_ee;
        n01 = o0->n_matched + o1->n_matched;
    }
    const double mean_ee01 = n01 ? ee01 / n01 : 1e9;
    const bool pass =
        run.report.recall >= 0.90 && orders_ok && mean_ee01 <= 0.015 && elapsed <= 900.0;
    report(8, pass,
           fmt("desk-scale noiseless: recall %.3f (>= 0.90), order 0+1 fully recovered %s, "
               "mean EE(order<=1) %.1f mm (<= 15 mm), %.0f s (<= 900 s)",
               run.report.recall, orders_ok ? "yes" : "NO", mean_ee01 * 1000.0, elapsed));
}

void criterion_9(const DeskRun& run) {
    const OrderStats* o0 = run.report.order_stats(0);
    const OrderStats* o1 = run.report.order_stats(1);
    const double r0 = o0 ? o0->recall() : 0.0;
    const double r1 = o1 ? o1->recall() : 0.0;
    const double ee1 = o1 ? o1->mean_ee() : 1e9;
    const bool pass = r0 >= 0.90 && r1 >= 0.90 && ee1 <= 0.05;
    report(9, pass,
           fmt("desk-scale at 30 dB PSNR: order-0 recall %.2f, order-1 recall %.2f (>= 0.90), "
               "order-1 mean EE %.1f mm (<= 50 mm)",
               r0, r1, ee1 * 1000.0));
}

// -------------------------------------------------------------- criterion 10

RecoveryResult criterion_10(Observation& obs_out) {
    const double f_s = 16000.0;
    const MicArray array = make_em32_array({1.5, 1.5, 1.5});
    const SamplingSpec spec{f_s, 201};
    const FilterKernel lp = FilterKernel::sinc_lowpass(f_s);
    Observation obs = zero_observation(array, lp, spec);
    // alpha large enough that a best-fit spike pinned at the exclusion surface
    // keeps an amplitude above alpha_min, so the returned measure is nonempty
    // (a spike 1 cm off one capsule also radiates into the neighboring ones,
    // which caps the fitted amplitude near 0.03 * alpha for this array)
    const double alpha = 1.0;
    for (int n = 0; n < spec.n_samples; ++n)
        obs.data(0, n) = alpha * kappa(lp, spec.sample_time(n));

    SolverConfig config;
    config.eps_excl = 0.01;
    const RecoveryResult result = solve(obs, kC, config);

    bool finite_ok = true;
    double min_dist = std::numeric_limits<double>::infinity();
    for (const Spike& sp : result.measure.spikes) {
        if (!std::isfinite(sp.amplitude) || !sp.position.finite()) finite_ok = false;
        min_dist = std::min(min_dist, min_mic_dist(sp.position, array));
    }
    const Observation res = residual(obs, result.measure, kC);
    double fit = 0.0;
    for (double v : res.data.flat()) fit += v * v;
    fit *= 0.5;

    const ExistenceReport rep = existence_verdict(obs, kC, config.lambda, 1.0);
    const bool pass = finite_ok && fit > 0.0 &&
                      (result.measure.empty() || min_dist >= config.eps_excl - 1e-12) &&
                      rep.verdict == ExistenceVerdict::Inconclusive && rep.mu[0] > 0.0;
    report(10, pass,
           fmt("unattainable-infimum stress: %zu spikes, min mic distance %.4f m (>= 0.01), "
               "residual objective %.3g (> 0), existence verdict %s with mu_1 %.3g",
               result.measure.spikes.size(),
               result.measure.empty() ? config.eps_excl : min_dist, fit, to_string(rep.verdict),
               rep.mu[0]));
    obs_out = std::move(obs);
    return result;
}

void criterion_11(const std::vector<std::pair<const Observation*, const RecoveryResult*>>& runs) {
    double worst_active = 0.0;
    bool pass = true;
    for (const auto& [obs, result] : runs) {
        const double lambda = result->config.lambda;
        const Observation res = residual(*obs, result->measure, kC);
        for (const Spike& sp : result->measure.spikes) {
            const double corr =
                adjoint_eval(res.data, sp.position, obs->array, obs->kernel, obs->spec, kC).value;
            if (sp.amplitude > 0.0) {
                worst_active = std::max(worst_active, std::abs(corr - lambda));
                if (std::abs(corr - lambda) > 1e-8) pass = false;
            } else if (corr > lambda + 1e-8) {
                pass = false;
            }
        }
    }
    report(11, pass,
           fmt("LASSO KKT residuals on every solve: worst active-spike residual %.3g (<= 1e-8)",
               worst_active));
}

} // namespace

int main() {
    std::printf("acceptance suite\n");
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();

    const auto t0 = std::chrono::steady_clock::now();
    const DeskRun noiseless = run_desk(false);
    const double desk_elapsed = seconds_since(t0);
    criterion_8(noiseless, desk_elapsed);

    const DeskRun noisy = run_desk(true);
    criterion_9(noisy);

    Observation stress_obs;
    const RecoveryResult stress = criterion_10(stress_obs);

    criterion_11({{&noiseless.obs, &noiseless.result},
                  {&noisy.obs, &noisy.result},
                  {&stress_obs, &stress}});

    std::printf("%d of 11 criteria failed\n", g_failures);
    return g_failures;
}
