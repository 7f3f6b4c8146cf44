#include "imsrc/bfgs.hpp"

#include <cmath>
#include <cstddef>

#include "imsrc/linalg.hpp"

namespace imsrc {

namespace {

bool all_finite(const std::vector<double>& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

} // namespace

BfgsResult bfgs_minimize(std::vector<double> x0, const ObjectiveFn& fg, const BfgsOptions& opts,
                         const ProjectFn& project) {
    const std::size_t n = x0.size();
    if (project) project(x0);

    std::vector<double> g(n, 0.0);
    double f = fg(x0, g);

    BfgsResult best;
    best.x = x0;
    best.value = f;
    best.grad_norm = norm2(g);

    // inverse Hessian approximation
    Mat h(static_cast<int>(n), static_cast<int>(n));
    auto reset_h = [&] {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j)
                h(static_cast<int>(i), static_cast<int>(j)) = (i == j) ? 1.0 : 0.0;
    };
    reset_h();

    std::vector<double> x = x0;
    std::vector<double> d(n), x_new(n), g_new(n), s(n), y(n), hy(n);

    int it = 0;
    for (; it < opts.max_iters; ++it) {
        const double gnorm = norm2(g);
        if (gnorm <= opts.grad_tol || !std::isfinite(f) || !all_finite(g)) break;

        for (std::size_t i = 0; i < n; ++i) {
            double s_i = 0.0;
            for (std::size_t j = 0; j < n; ++j) s_i -= h(static_cast<int>(i), static_cast<int>(j)) * g[j];
            d[i] = s_i;
        }
        double gd = dot(g, d);
        if (!(gd < 0.0)) { // not a descent direction; fall back to steepest descent
            for (std::size_t i = 0; i < n; ++i) d[i] = -g[i];
            gd = -gnorm * gnorm;
            reset_h();
        }

        // backtracking Armijo line search on the projected trial point
        constexpr double c1 = 1e-4;
        double alpha = 1.0;
        double f_new = f;
        bool accepted = false;
        bool projected = false;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + alpha * d[i];
            if (project) {
                const std::vector<double> before = x_new;
                project(x_new);
                projected = false;
                for (std::size_t i = 0; i < n; ++i)
                    if (x_new[i] != before[i]) {
                        projected = true;
                        break;
                    }
            }
            f_new = fg(x_new, g_new);
            const bool sufficient =
                projected ? (f_new < f) : (f_new <= f + c1 * alpha * gd);
            if (std::isfinite(f_new) && sufficient) {
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if (!accepted) break;

        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - x[i];
            y[i] = g_new[i] - g[i];
        }
        x = x_new;
        f = f_new;
        g = g_new;
        if (f < best.value) {
            best.x = x;
            best.value = f;
            best.grad_norm = norm2(g);
        }

        if (projected) {
            reset_h(); // curvature history is invalid across the boundary
            continue;
        }
        const double sy = dot(s, y);
        if (sy > 1e-12 * norm2(s) * norm2(y)) {
            // H <- (I - s y^T / sy) H (I - y s^T / sy) + s s^T / sy
            for (std::size_t i = 0; i < n; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < n; ++j) acc += h(static_cast<int>(i), static_cast<int>(j)) * y[j];
                hy[i] = acc;
            }
            const double yhy = dot(y, hy);
            const double coef = (sy + yhy) / (sy * sy);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    double v = h(static_cast<int>(i), static_cast<int>(j));
                    v += coef * s[i] * s[j];
                    v -= (hy[i] * s[j] + s[i] * hy[j]) / sy;
                    h(static_cast<int>(i), static_cast<int>(j)) = v;
                }
            }
        }
    }

    best.iterations = it;
    best.converged = best.grad_norm <= opts.grad_tol;
    return best;
}

} // namespace imsrc
