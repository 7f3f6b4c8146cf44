#include "imsrc/linalg.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "imsrc/parallel.hpp"

namespace imsrc {

namespace {
std::atomic<int> g_max_threads{0};
}

void set_max_threads(int n) { g_max_threads.store(n < 0 ? 0 : n); }

int max_threads() {
    const int n = g_max_threads.load();
    if (n > 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

double frobenius_norm(const Mat& m) {
    double s = 0.0;
    for (double v : m.flat()) s += v * v;
    return std::sqrt(s);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

SymEig jacobi_eigen(const Mat& sym, int max_sweeps) {
    const int n = sym.rows();
    if (n != sym.cols()) throw std::invalid_argument("jacobi_eigen: matrix not square");
    Mat a = sym;
    Mat v(n, n, 0.0);
    for (int i = 0; i < n; ++i) v(i, i) = 1.0;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-300) break;
        double diag = 0.0;
        for (int p = 0; p < n; ++p) diag += a(p, p) * a(p, p);
        if (off <= 1e-30 * std::max(diag, 1e-300)) break;

        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (apq == 0.0) continue;
                const double app = a(p, p);
                const double aqq = a(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                // smaller-magnitude root for a stable rotation angle
                const double t = (tau >= 0.0) ? 1.0 / (tau + std::sqrt(1.0 + tau * tau))
                                              : 1.0 / (tau - std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p);
                    const double akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k);
                    const double aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p);
                    const double vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> diag(n);
    for (int i = 0; i < n; ++i) diag[i] = a(i, i);
    std::sort(order.begin(), order.end(), [&](int i, int j) { return diag[i] < diag[j]; });

    SymEig out;
    out.values.resize(n);
    out.vectors = Mat(n, n);
    for (int j = 0; j < n; ++j) {
        out.values[j] = diag[order[j]];
        for (int i = 0; i < n; ++i) out.vectors(i, j) = v(i, order[j]);
    }
    return out;
}

namespace {

std::vector<double> apply_eig_inverse(const SymEig& eig, const std::vector<double>& b,
                                      double cutoff) {
    const int n = static_cast<int>(eig.values.size());
    std::vector<double> y(n, 0.0);
    for (int j = 0; j < n; ++j) {
        if (std::abs(eig.values[j]) <= cutoff) continue;
        double proj = 0.0;
        for (int i = 0; i < n; ++i) proj += eig.vectors(i, j) * b[i];
        proj /= eig.values[j];
        for (int i = 0; i < n; ++i) y[i] += proj * eig.vectors(i, j);
    }
    return y;
}

} // namespace

std::vector<double> solve_sym(const Mat& sym, const std::vector<double>& b, double rel_cutoff) {
    const int n = sym.rows();
    if (n != sym.cols() || static_cast<int>(b.size()) != n)
        throw std::invalid_argument("solve_sym: dimension mismatch");
    const SymEig eig = jacobi_eigen(sym);
    double vmax = 0.0;
    for (double v : eig.values) vmax = std::max(vmax, std::abs(v));
    const double cutoff = rel_cutoff * vmax;

    std::vector<double> x = apply_eig_inverse(eig, b, cutoff);
    // one refinement pass: x += S^-1 (b - S x)
    std::vector<double> r(n);
    for (int i = 0; i < n; ++i) {
        double s = 0.0;
        for (int j = 0; j < n; ++j) s += sym(i, j) * x[j];
        r[i] = b[i] - s;
    }
    const std::vector<double> dx = apply_eig_inverse(eig, r, cutoff);
    for (int i = 0; i < n; ++i) x[i] += dx[i];
    return x;
}

} // namespace imsrc
