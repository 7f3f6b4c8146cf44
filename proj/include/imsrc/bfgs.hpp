#ifndef IMSRC_BFGS_HPP
#define IMSRC_BFGS_HPP

#include <functional>
#include <vector>

namespace imsrc {

struct BfgsOptions {
    double grad_tol = 1e-9;
    int max_iters = 200;
};

struct BfgsResult {
    std::vector<double> x;
    double value = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Objective: fills grad and returns f(x).
using ObjectiveFn = std::function<double(const std::vector<double>&, std::vector<double>&)>;
/// Optional in-place projection onto the feasible set, applied to every trial
/// point. The inverse Hessian is reset whenever the projection moves a point.
using ProjectFn = std::function<void(std::vector<double>&)>;

/// Dense BFGS with backtracking line search. Monotone: the returned point is
/// the best accepted iterate, never worse than x0 (after projection).
BfgsResult bfgs_minimize(std::vector<double> x0, const ObjectiveFn& fg, const BfgsOptions& opts,
                         const ProjectFn& project = nullptr);

} // namespace imsrc

#endif
