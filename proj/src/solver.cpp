#include "imsrc/solver.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "imsrc/bfgs.hpp"
#include "imsrc/errors.hpp"
#include "imsrc/parallel.hpp"

namespace imsrc {

void SolverConfig::validate() const {
    if (!(lambda > 0.0)) throw InvalidInput("lambda must be positive");
    if (!(resid_drop > 0.0 && resid_drop < 1.0)) throw InvalidInput("resid_drop must be in (0,1)");
    if (!(alpha_min > 0.0)) throw InvalidInput("alpha_min must be positive");
    if (!(eps_excl >= 0.0)) throw InvalidInput("eps_excl must be nonnegative");
    if (i_max < 1 || i_ext < 1 || cutting_count < 1 || grid_top_mics < 1 || smoothing_window < 1)
        throw InvalidInput("solver counters must be positive");
    if (!(grid_angular_spacing_deg > 0.0)) throw InvalidInput("grid spacing must be positive");
}

const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::CertificateBelowLambda: return "CertificateBelowLambda";
        case StopReason::AmplitudeBelowThreshold: return "AmplitudeBelowThreshold";
        default: return "MaxIterations";
    }
}

namespace {

// A quantile boundary that lands on an arrival pulse truncates its tail and
// biases the fitted spike position. When the boundary column towers over its
// neighborhood median, move it to the quietest column nearby; on noise-like
// data the condition never fires and the plain greedy quantiles are kept.
int dodge_pulse(int j, const std::vector<double>& energy) {
    const int n = static_cast<int>(energy.size());
    const int w = 16;
    const int lo = std::max(0, j - w);
    const int hi = std::min(n - 1, j + w);
    std::vector<double> window(energy.begin() + lo, energy.begin() + hi + 1);
    std::nth_element(window.begin(), window.begin() + window.size() / 2, window.end());
    const double median = window[window.size() / 2];
    if (!(energy[j] > 4.0 * median)) return j;
    int best = j;
    for (int i = lo; i <= hi; ++i)
        if (energy[i] < energy[best]) best = i;
    return best;
}

} // namespace

std::vector<int> cutting_indices(const Observation& obs, int count) {
    if (count < 1) throw InvalidInput("cutting_indices: count must be >= 1");
    const std::vector<double> energy = column_energies(obs.data);
    const int n = static_cast<int>(energy.size());
    double total = 0.0;
    for (double e : energy) total += e;
    if (!(total > 0.0)) throw InvalidInput("cutting_indices: zero-energy observation");

    std::vector<int> cuts;
    cuts.reserve(count);
    double cum = 0.0;
    int next = 0;
    for (int l = 1; l <= count && next < n; ++l) {
        const double target = total * static_cast<double>(l) / count;
        while (next < n && cum + energy[next] < target - 1e-12 * total) cum += energy[next++];
        cuts.push_back(dodge_pulse(std::min(next, n - 1), energy));
        cum += next < n ? energy[next] : 0.0;
        ++next;
    }
    cuts.back() = n - 1;
    // strictly increasing, duplicates collapse
    std::vector<int> out;
    for (int j : cuts)
        if (out.empty() || j > out.back()) out.push_back(j);
    if (out.back() != n - 1) out.push_back(n - 1);
    return out;
}

namespace {

Vec3 fibonacci_dir(int i, int count) {
    constexpr double golden = 2.39996322972865332;
    const double z = 1.0 - (2.0 * i + 1.0) / count;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double ph = golden * i;
    return {r * std::cos(ph), r * std::sin(ph), z};
}

// Pushes r outside every exclusion ball (onto the nearest sphere surface).
void project_out_of_balls(Vec3& r, const MicArray& array, double eps_excl) {
    if (eps_excl <= 0.0) return;
    for (int pass = 0; pass < 8; ++pass) {
        bool moved = false;
        for (const Vec3& mic : array.positions) {
            const Vec3 diff = r - mic;
            const double d = diff.norm();
            if (d < eps_excl) {
                r = d == 0.0 ? mic + Vec3{eps_excl, 0.0, 0.0} : mic + diff * (eps_excl / d);
                moved = true;
            }
        }
        if (!moved) return;
    }
}

double min_mic_distance(const Vec3& r, const MicArray& array) {
    double d = std::numeric_limits<double>::infinity();
    for (const Vec3& mic : array.positions) d = std::min(d, distance(r, mic));
    return d;
}

// Cyclic coordinate descent for min_a 0.5 a'G a - q'a + lambda sum a, a >= 0.
std::vector<double> lasso_cd(const Mat& gram, const std::vector<double>& q, double lambda,
                             std::vector<double> a) {
    const int k = gram.rows();
    a.resize(k, 0.0);
    std::vector<double> s(k, 0.0); // G a
    for (int i = 0; i < k; ++i) {
        if (a[i] == 0.0) continue;
        for (int j = 0; j < k; ++j) s[j] += gram(j, i) * a[i];
    }
    for (int sweep = 0; sweep < 10000; ++sweep) {
        double max_delta = 0.0;
        for (int i = 0; i < k; ++i) {
            const double gii = gram(i, i);
            double a_new = 0.0;
            if (gii > 1e-300) {
                const double rho = q[i] - s[i] + gii * a[i];
                a_new = std::max(0.0, (rho - lambda) / gii);
            }
            const double delta = a_new - a[i];
            if (delta != 0.0) {
                a[i] = a_new;
                for (int j = 0; j < k; ++j) s[j] += gram(j, i) * delta;
                max_delta = std::max(max_delta, std::abs(delta));
            }
        }
        if (max_delta < 1e-12) break;
    }
    return a;
}

// Active-window solver state: spike rows, Gram matrix and residual.
struct ActiveState {
    Observation window;
    std::vector<Vec3> positions;
    std::vector<double> amps;
    Mat rows;                   // K x (M * N_active), row k = gamma(r_k) flattened
    Mat gram;                   // K x K
    std::vector<double> q;      // <gamma(r_k), x>
    std::vector<double> res;    // x - sum_k a_k gamma(r_k), flattened
    double c = 343.0;

    std::size_t flat_size() const { return window.data.size(); }

    void set_window(const Observation& w) {
        window = w;
        rebuild_rows();
        update_residual();
    }

    void rebuild_rows() {
        const int k = static_cast<int>(positions.size());
        rows = Mat(k, static_cast<int>(flat_size()));
        parallel_for(static_cast<std::size_t>(k), [&](std::size_t i) {
            gamma_flat(positions[i], window.array, window.kernel, window.spec, c,
                       rows.row(static_cast<int>(i)));
        });
        gram = Mat(k, k);
        q.assign(k, 0.0);
        for (int i = 0; i < k; ++i) {
            const double* gi = rows.row(i);
            for (int j = i; j < k; ++j) {
                double s = 0.0;
                const double* gj = rows.row(j);
                for (std::size_t t = 0; t < flat_size(); ++t) s += gi[t] * gj[t];
                gram(i, j) = s;
                gram(j, i) = s;
            }
            double qs = 0.0;
            const double* x = window.data.data();
            for (std::size_t t = 0; t < flat_size(); ++t) qs += gi[t] * x[t];
            q[i] = qs;
        }
    }

    void add_position(const Vec3& r) {
        const int k = static_cast<int>(positions.size());
        positions.push_back(r);
        amps.push_back(0.0);
        Mat new_rows(k + 1, static_cast<int>(flat_size()));
        for (int i = 0; i < k; ++i) std::copy_n(rows.row(i), flat_size(), new_rows.row(i));
        gamma_flat(r, window.array, window.kernel, window.spec, c, new_rows.row(k));
        rows = std::move(new_rows);

        Mat new_gram(k + 1, k + 1);
        for (int i = 0; i < k; ++i)
            for (int j = 0; j < k; ++j) new_gram(i, j) = gram(i, j);
        const double* gk = rows.row(k);
        for (int i = 0; i <= k; ++i) {
            double s = 0.0;
            const double* gi = rows.row(i);
            for (std::size_t t = 0; t < flat_size(); ++t) s += gi[t] * gk[t];
            new_gram(i, k) = s;
            new_gram(k, i) = s;
        }
        gram = std::move(new_gram);
        double qs = 0.0;
        const double* x = window.data.data();
        for (std::size_t t = 0; t < flat_size(); ++t) qs += gk[t] * x[t];
        q.push_back(qs);
    }

    /// Recomputes row idx, its Gram row/column and q after a position change.
    void refresh_position(int idx) {
        gamma_flat(positions[idx], window.array, window.kernel, window.spec, c, rows.row(idx));
        const double* gi = rows.row(idx);
        for (int j = 0; j < static_cast<int>(positions.size()); ++j) {
            double s = 0.0;
            const double* gj = rows.row(j);
            for (std::size_t t = 0; t < flat_size(); ++t) s += gi[t] * gj[t];
            gram(idx, j) = s;
            gram(j, idx) = s;
        }
        double qs = 0.0;
        const double* x = window.data.data();
        for (std::size_t t = 0; t < flat_size(); ++t) qs += gi[t] * x[t];
        q[idx] = qs;
    }

    /// Removes spikes with amplitude < threshold; returns how many went.
    int prune(double threshold) {
        std::vector<int> keep;
        for (int i = 0; i < static_cast<int>(amps.size()); ++i)
            if (amps[i] >= threshold) keep.push_back(i);
        const int removed = static_cast<int>(amps.size() - keep.size());
        if (removed == 0) return 0;
        std::vector<Vec3> new_pos;
        std::vector<double> new_amps;
        Mat new_rows(static_cast<int>(keep.size()), static_cast<int>(flat_size()));
        Mat new_gram(static_cast<int>(keep.size()), static_cast<int>(keep.size()));
        std::vector<double> new_q;
        for (std::size_t i = 0; i < keep.size(); ++i) {
            new_pos.push_back(positions[keep[i]]);
            new_amps.push_back(amps[keep[i]]);
            std::copy_n(rows.row(keep[i]), flat_size(), new_rows.row(static_cast<int>(i)));
            new_q.push_back(q[keep[i]]);
            for (std::size_t j = 0; j < keep.size(); ++j)
                new_gram(static_cast<int>(i), static_cast<int>(j)) = gram(keep[i], keep[j]);
        }
        positions = std::move(new_pos);
        amps = std::move(new_amps);
        rows = std::move(new_rows);
        gram = std::move(new_gram);
        q = std::move(new_q);
        update_residual();
        return removed;
    }

    void update_residual() {
        res.assign(window.data.data(), window.data.data() + flat_size());
        for (std::size_t k = 0; k < amps.size(); ++k) {
            if (amps[k] == 0.0) continue;
            const double* g = rows.row(static_cast<int>(k));
            for (std::size_t t = 0; t < res.size(); ++t) res[t] -= amps[k] * g[t];
        }
    }

    double residual_norm() const {
        double s = 0.0;
        for (double v : res) s += v * v;
        return std::sqrt(s);
    }

    Observation residual_observation() const {
        Observation r = window;
        std::copy(res.begin(), res.end(), r.data.data());
        return r;
    }

    double objective(double lambda) const {
        double fit = 0.0;
        for (double v : res) fit += v * v;
        double mass = 0.0;
        for (double a : amps) mass += a;
        return 0.5 * fit + lambda * mass;
    }
};

// One joint local descent over amplitudes and positions (the sliding step).
// Positions enter the BFGS variable scaled by the kernel length c / (pi f_s)
// so amplitude and position coordinates share comparable curvature.
void sliding_step(ActiveState& state, const SolverConfig& config) {
    const int k = static_cast<int>(state.positions.size());
    if (k == 0) return;
    const std::size_t flat = state.flat_size();
    const double len = state.c / (kPi * state.window.spec.f_s);
    std::vector<double> z(4 * k);
    for (int i = 0; i < k; ++i) {
        z[i] = state.amps[i];
        z[k + 3 * i + 0] = state.positions[i].x / len;
        z[k + 3 * i + 1] = state.positions[i].y / len;
        z[k + 3 * i + 2] = state.positions[i].z / len;
    }
    const auto position_of = [&](const std::vector<double>& zz, int i) {
        return Vec3{zz[k + 3 * i] * len, zz[k + 3 * i + 1] * len, zz[k + 3 * i + 2] * len};
    };

    Mat scratch_rows(k, static_cast<int>(flat));
    Mat res_mat(state.window.data.rows(), state.window.data.cols());

    auto fg = [&](const std::vector<double>& zz, std::vector<double>& grad) {
        grad.assign(zz.size(), 0.0);
        parallel_for(static_cast<std::size_t>(k), [&](std::size_t i) {
            gamma_flat(position_of(zz, static_cast<int>(i)), state.window.array,
                       state.window.kernel, state.window.spec, state.c,
                       scratch_rows.row(static_cast<int>(i)));
        });
        const double* x = state.window.data.data();
        double* res = res_mat.data();
        std::copy_n(x, flat, res);
        double mass = 0.0;
        for (int i = 0; i < k; ++i) {
            const double a = zz[i];
            mass += a;
            const double* g = scratch_rows.row(i);
            for (std::size_t t = 0; t < flat; ++t) res[t] -= a * g[t];
        }
        double fit = 0.0;
        for (std::size_t t = 0; t < flat; ++t) fit += res[t] * res[t];

        std::vector<AdjointValue> adj(k);
        parallel_for(static_cast<std::size_t>(k), [&](std::size_t i) {
            adj[i] = adjoint_eval(res_mat, position_of(zz, static_cast<int>(i)),
                                  state.window.array, state.window.kernel, state.window.spec,
                                  state.c);
        });
        for (int i = 0; i < k; ++i) {
            grad[i] = -adj[i].value + config.lambda;
            grad[k + 3 * i + 0] = -zz[i] * adj[i].grad.x * len;
            grad[k + 3 * i + 1] = -zz[i] * adj[i].grad.y * len;
            grad[k + 3 * i + 2] = -zz[i] * adj[i].grad.z * len;
        }
        return 0.5 * fit + config.lambda * mass;
    };

    auto project = [&](std::vector<double>& zz) {
        for (int i = 0; i < k; ++i) zz[i] = std::max(0.0, zz[i]);
        for (int i = 0; i < k; ++i) {
            Vec3 r = position_of(zz, i);
            project_out_of_balls(r, state.window.array, config.eps_excl);
            zz[k + 3 * i + 0] = r.x / len;
            zz[k + 3 * i + 1] = r.y / len;
            zz[k + 3 * i + 2] = r.z / len;
        }
    };

    BfgsOptions opts;
    opts.grad_tol = config.bfgs_grad_tol;
    opts.max_iters = config.bfgs_max_iters;
    const BfgsResult result = bfgs_minimize(z, fg, opts, project);

    for (int i = 0; i < k; ++i) {
        state.amps[i] = result.x[i];
        state.positions[i] = position_of(result.x, i);
    }
    state.rebuild_rows();
    state.update_residual();
}

// Cyclic per-spike refinement: re-localize each spike on the residual of the
// others, keep the move only if the re-solved objective improves. Untangles
// configurations the joint descent cannot, one coordinate block at a time.
bool respike_pass(ActiveState& state, const SolverConfig& config) {
    const int k = static_cast<int>(state.positions.size());
    if (k < 2) return false;
    std::vector<int> order(k);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](int a, int b) { return state.amps[a] > state.amps[b]; });

    Mat res_others(state.window.data.rows(), state.window.data.cols());
    BfgsOptions opts;
    opts.grad_tol = config.bfgs_grad_tol;
    opts.max_iters = config.bfgs_max_iters;

    bool any = false;
    for (int idx : order) {
        double before = state.objective(config.lambda);
        // residual with spike idx removed
        const double* g = state.rows.row(idx);
        for (std::size_t t = 0; t < state.res.size(); ++t)
            res_others.flat()[t] = state.res[t] + state.amps[idx] * g[t];

        auto fg = [&](const std::vector<double>& x, std::vector<double>& grad) {
            const AdjointValue v = adjoint_eval(res_others, {x[0], x[1], x[2]},
                                                state.window.array, state.window.kernel,
                                                state.window.spec, state.c);
            grad = {-v.grad.x, -v.grad.y, -v.grad.z};
            return -v.value;
        };
        auto project = [&](std::vector<double>& x) {
            Vec3 r{x[0], x[1], x[2]};
            project_out_of_balls(r, state.window.array, config.eps_excl);
            x = {r.x, r.y, r.z};
        };
        const Vec3 old_pos = state.positions[idx];
        const std::vector<double> old_amps = state.amps;
        const BfgsResult best =
            bfgs_minimize({old_pos.x, old_pos.y, old_pos.z}, fg, opts, project);
        const Vec3 candidate{best.x[0], best.x[1], best.x[2]};
        if (distance(candidate, old_pos) < 1e-12) continue;

        state.positions[idx] = candidate;
        state.refresh_position(idx);
        state.amps = lasso_cd(state.gram, state.q, config.lambda, state.amps);
        state.update_residual();
        if (state.objective(config.lambda) < before) {
            any = true;
        } else {
            state.positions[idx] = old_pos;
            state.refresh_position(idx);
            state.amps = old_amps;
            state.update_residual();
        }
    }
    return any;
}

// Fuses spikes that ended up within the merge radius of each other
// (amplitude-weighted position, summed amplitude). Returns true if any fused.
bool merge_nearby(ActiveState& state, double radius, double eps_excl) {
    const int k = static_cast<int>(state.positions.size());
    std::vector<int> owner(k);
    for (int i = 0; i < k; ++i) owner[i] = i;
    bool any = false;
    for (int i = 0; i < k; ++i) {
        if (owner[i] != i) continue;
        for (int j = i + 1; j < k; ++j) {
            if (owner[j] != j) continue;
            if (distance(state.positions[i], state.positions[j]) < radius) {
                owner[j] = i;
                any = true;
            }
        }
    }
    if (!any) return false;
    std::vector<Vec3> positions;
    std::vector<double> amps;
    for (int i = 0; i < k; ++i) {
        if (owner[i] != i) continue;
        double mass = state.amps[i];
        Vec3 centroid = state.positions[i] * state.amps[i];
        for (int j = i + 1; j < k; ++j) {
            if (owner[j] != i) continue;
            mass += state.amps[j];
            centroid += state.positions[j] * state.amps[j];
        }
        Vec3 merged = mass > 0.0 ? centroid / mass : state.positions[i];
        project_out_of_balls(merged, state.window.array, eps_excl);
        positions.push_back(merged);
        amps.push_back(mass);
    }
    state.positions = std::move(positions);
    state.amps = std::move(amps);
    state.rebuild_rows();
    state.update_residual();
    return true;
}

} // namespace

std::vector<Vec3> init_grid(const Observation& res, double c, const SolverConfig& config) {
    const int n_mics = res.data.rows();
    const int n = res.data.cols();
    const int left = (config.smoothing_window - 1) / 2;
    const int right = config.smoothing_window / 2;

    struct Peak {
        double value;
        int sample;
        int mic;
    };
    std::vector<Peak> peaks(n_mics);
    for (int m = 0; m < n_mics; ++m) {
        const double* row = res.data.row(m);
        double best = -1.0;
        int best_n = 0;
        for (int i = 0; i < n; ++i) {
            const int lo = std::max(0, i - left);
            const int hi = std::min(n - 1, i + right);
            double s = 0.0;
            for (int j = lo; j <= hi; ++j) s += row[j] * row[j];
            s /= (hi - lo + 1);
            if (s > best) { // strict: ties keep the earliest sample
                best = s;
                best_n = i;
            }
        }
        peaks[m] = {best, best_n, m};
    }
    std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
        if (a.value != b.value) return a.value > b.value;
        return a.mic < b.mic;
    });

    const double theta = config.grid_angular_spacing_deg * kPi / 180.0;
    const int per_sphere = std::max(16, static_cast<int>(std::lround(4.0 * kPi / (theta * theta))));
    const int n_top = std::min(config.grid_top_mics, n_mics);

    std::vector<Vec3> grid;
    grid.reserve(static_cast<std::size_t>(n_top) * config.grid_radial_offsets.size() * per_sphere);
    for (int t = 0; t < n_top; ++t) {
        const Vec3 mic = res.array.positions[peaks[t].mic];
        const double r0 = c * peaks[t].sample / res.spec.f_s;
        for (double off : config.grid_radial_offsets) {
            const double radius = r0 + off;
            if (radius <= 0.0) continue;
            for (int i = 0; i < per_sphere; ++i) {
                const Vec3 p = mic + fibonacci_dir(i, per_sphere) * radius;
                if (min_mic_distance(p, res.array) >= config.eps_excl) grid.push_back(p);
            }
        }
    }
    return grid;
}

CertificateMax maximize_certificate(const Observation& res, double c, const SolverConfig& config) {
    const std::vector<Vec3> grid = init_grid(res, c, config);

    Vec3 start = res.array.center() + Vec3{1.0, 0.0, 0.0};
    double start_value = 0.0;
    if (!grid.empty()) {
        std::vector<double> values(grid.size());
        parallel_for(grid.size(), [&](std::size_t i) {
            values[i] = adjoint_value(res.data, grid[i], res.array, res.kernel, res.spec, c);
        });
        std::size_t best = 0;
        for (std::size_t i = 1; i < values.size(); ++i)
            if (values[i] > values[best]) best = i;
        start = grid[best];
        start_value = values[best];
    } else {
        project_out_of_balls(start, res.array, config.eps_excl);
        start_value = adjoint_value(res.data, start, res.array, res.kernel, res.spec, c);
    }

    auto fg = [&](const std::vector<double>& x, std::vector<double>& grad) {
        const AdjointValue v =
            adjoint_eval(res.data, {x[0], x[1], x[2]}, res.array, res.kernel, res.spec, c);
        grad = {-v.grad.x, -v.grad.y, -v.grad.z};
        return -v.value;
    };
    auto project = [&](std::vector<double>& x) {
        Vec3 r{x[0], x[1], x[2]};
        project_out_of_balls(r, res.array, config.eps_excl);
        x = {r.x, r.y, r.z};
    };
    BfgsOptions opts;
    opts.grad_tol = config.bfgs_grad_tol;
    opts.max_iters = config.bfgs_max_iters;
    const BfgsResult result = bfgs_minimize({start.x, start.y, start.z}, fg, opts, project);

    CertificateMax out;
    if (-result.value >= start_value) {
        out.position = {result.x[0], result.x[1], result.x[2]};
        out.value = -result.value;
    } else {
        out.position = start;
        out.value = start_value;
    }
    return out;
}

std::vector<double> lasso_nonneg(const Observation& obs, const std::vector<Vec3>& positions,
                                 double lambda, double c) {
    if (!(lambda >= 0.0)) throw InvalidInput("lasso_nonneg: lambda must be nonnegative");
    ActiveState state;
    state.c = c;
    state.positions = positions;
    state.amps.assign(positions.size(), 0.0);
    state.set_window(obs);
    return lasso_cd(state.gram, state.q, lambda, std::vector<double>(positions.size(), 0.0));
}

RecoveryResult solve(const Observation& obs, double c, const SolverConfig& config) {
    config.validate();
    if (obs.data.rows() != static_cast<int>(obs.array.positions.size()) ||
        obs.data.cols() != obs.spec.n_samples)
        throw InvalidInput("solve: observation dimensions do not match its spec");
    for (double v : obs.data.flat())
        if (!std::isfinite(v)) throw InvalidInput("solve: observation must be finite");

    RecoveryResult result;
    result.config = config;

    if (frobenius_norm(obs.data) == 0.0) {
        IterationRecord rec;
        rec.active_samples = obs.spec.n_samples;
        result.trace.push_back(rec);
        result.stop_reason = StopReason::CertificateBelowLambda;
        return result;
    }

    const std::vector<int> cuts = cutting_indices(obs, config.cutting_count);
    std::size_t cut_idx = 0;

    ActiveState state;
    state.c = c;
    state.set_window(truncate_samples(obs, cuts[cut_idx] + 1));

    double ref_norm = state.residual_norm();
    int iters_since_ext = 0;
    const auto can_extend = [&] { return cut_idx + 1 < cuts.size(); };
    const auto extend = [&] {
        ++cut_idx;
        state.set_window(truncate_samples(obs, cuts[cut_idx] + 1));
        ref_norm = state.residual_norm();
        iters_since_ext = 0;
    };

    result.stop_reason = StopReason::MaxIterations;
    bool stopped = false;
    for (int i = 0; i < config.i_max && !stopped; ++i) {
        IterationRecord rec;
        rec.iteration = i;

        if (can_extend() && (iters_since_ext >= config.i_ext ||
                             state.residual_norm() < (1.0 - config.resid_drop) * ref_norm)) {
            extend();
            rec.extended = true;
        }

        const CertificateMax cert = maximize_certificate(state.residual_observation(), c, config);
        rec.certificate_max = cert.value;
        rec.active_samples = state.window.spec.n_samples;

        if (cert.value <= config.lambda) {
            if (can_extend()) {
                extend();
                rec.extended = true;
            } else {
                result.stop_reason = StopReason::CertificateBelowLambda;
                stopped = true;
            }
            rec.residual_norm = state.residual_norm();
            rec.n_spikes = static_cast<int>(state.positions.size());
            result.trace.push_back(rec);
            ++iters_since_ext;
            continue;
        }

        // merge candidates that landed on an existing spike
        int newest = -1;
        for (std::size_t k = 0; k < state.positions.size(); ++k)
            if (distance(state.positions[k], cert.position) < config.merge_radius) {
                newest = static_cast<int>(k);
                break;
            }
        if (newest < 0) {
            state.add_position(cert.position);
            newest = static_cast<int>(state.positions.size()) - 1;
            rec.spike_added = true;
        }
        rec.spike_position = state.positions[newest];

        state.amps = lasso_cd(state.gram, state.q, config.lambda, state.amps);
        state.update_residual();
        rec.spike_amplitude = state.amps[newest];
        rec.residual_norm = state.residual_norm();
        rec.objective = state.objective(config.lambda);
        rec.n_spikes = static_cast<int>(state.positions.size());

        if (state.amps[newest] < config.alpha_min) {
            if (can_extend()) {
                extend();
                rec.extended = true;
                result.trace.push_back(rec);
                ++iters_since_ext;
                continue;
            }
            result.trace.push_back(rec);
            result.stop_reason = StopReason::AmplitudeBelowThreshold;
            break;
        }

        state.prune(config.alpha_min);
        if (config.slide_each_iteration && !state.positions.empty()) {
            sliding_step(state, config);
            state.prune(config.alpha_min);
        }
        result.trace.push_back(rec);
        ++iters_since_ext;
    }

    // final sliding step on the full observation, then amplitude polish;
    // repeated while the slide keeps finding a better basin
    state.set_window(obs);
    state.prune(config.alpha_min);
    result.objective_before_slide = state.objective(config.lambda);
    double prev_objective = result.objective_before_slide;
    for (int round = 0; round < 8 && !state.positions.empty(); ++round) {
        sliding_step(state, config);
        state.prune(config.alpha_min);
        merge_nearby(state, config.merge_radius, config.eps_excl);
        respike_pass(state, config);
        state.prune(config.alpha_min);
        merge_nearby(state, config.merge_radius, config.eps_excl);
        while (!state.positions.empty()) {
            state.amps = lasso_cd(state.gram, state.q, config.lambda, state.amps);
            state.update_residual();
            if (state.prune(config.alpha_min) == 0) break;
        }
        const double objective = state.objective(config.lambda);
        if (objective >= prev_objective * (1.0 - 1e-9)) break;
        prev_objective = objective;
    }

    result.measure.spikes.clear();
    for (std::size_t k = 0; k < state.positions.size(); ++k)
        result.measure.spikes.push_back({state.amps[k], state.positions[k]});
    result.final_objective = state.objective(config.lambda);
    return result;
}

} // namespace imsrc
