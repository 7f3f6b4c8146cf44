#ifndef IMSRC_LINALG_HPP
#define IMSRC_LINALG_HPP

#include <cstddef>
#include <vector>

namespace imsrc {

/// Dense row-major matrix of doubles.
class Mat {
  public:
    Mat() = default;
    Mat(int rows, int cols, double fill = 0.0)
        : rows_(rows), cols_(cols), a_(static_cast<std::size_t>(rows) * cols, fill) {}

    int rows() const { return rows_; }
    int cols() const { return cols_; }
    std::size_t size() const { return a_.size(); }

    double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i) * cols_ + j]; }
    double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * cols_ + j]; }

    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }
    double* row(int i) { return a_.data() + static_cast<std::size_t>(i) * cols_; }
    const double* row(int i) const { return a_.data() + static_cast<std::size_t>(i) * cols_; }

    std::vector<double>& flat() { return a_; }
    const std::vector<double>& flat() const { return a_; }

  private:
    int rows_ = 0;
    int cols_ = 0;
    std::vector<double> a_;
};

double frobenius_norm(const Mat& m);
double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);

/// Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns eigenvalues in ascending order; eigenvectors as matrix columns.
struct SymEig {
    std::vector<double> values;
    Mat vectors;
};
SymEig jacobi_eigen(const Mat& sym, int max_sweeps = 64);

/// Solves sym * x = b for a symmetric positive (semi)definite matrix via its
/// eigen-decomposition, with one step of iterative refinement. Eigenvalues
/// below rel_cutoff * max eigenvalue are treated as zero (pseudo-inverse).
std::vector<double> solve_sym(const Mat& sym, const std::vector<double>& b,
                              double rel_cutoff = 1e-14);

} // namespace imsrc

#endif
