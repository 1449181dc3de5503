#include "backus/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "backus/errors.hpp"

namespace backus {

namespace {

int entry_index(const SparseSystem& s, int i, int j) {
    const auto begin = s.cols.begin() + s.row_offsets[i];
    const auto end = s.cols.begin() + s.row_offsets[i + 1];
    const auto it = std::lower_bound(begin, end, j);
    if (it == end || *it != j) return -1;
    return static_cast<int>(it - s.cols.begin());
}

}  // namespace

void SparseSystem::add(int i, int j, double v) {
    const int k = entry_index(*this, i, j);
    if (k < 0) throw std::logic_error("SparseSystem::add: entry outside the pattern");
    vals[k] += v;
}

double SparseSystem::at(int i, int j) const {
    const int k = entry_index(*this, i, j);
    return k < 0 ? 0.0 : vals[k];
}

SparseSystem SparseSystem::from_pattern(int n, const std::vector<std::vector<int>>& rows) {
    SparseSystem s;
    s.n = n;
    s.row_offsets.resize(n + 1, 0);
    for (int i = 0; i < n; ++i) s.row_offsets[i + 1] = s.row_offsets[i] + static_cast<int>(rows[i].size());
    s.cols.reserve(s.row_offsets[n]);
    for (int i = 0; i < n; ++i) {
        std::vector<int> sorted = rows[i];
        std::sort(sorted.begin(), sorted.end());
        s.cols.insert(s.cols.end(), sorted.begin(), sorted.end());
    }
    s.vals.assign(s.row_offsets[n], 0.0);
    s.rhs.assign(n, 0.0);
    return s;
}

std::vector<double> solve_linear(const SparseSystem& system) {
    const int n = system.n;
    if (n == 0) return {};
    using SpMat = Eigen::SparseMatrix<double>;
    Eigen::Map<const Eigen::SparseMatrix<double, Eigen::RowMajor, int>> mapped(
        n, n, system.row_offsets[n], system.row_offsets.data(), system.cols.data(),
        system.vals.data());
    SpMat a = mapped;

    Eigen::SparseLU<SpMat> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success) throw SolverError("sparse factorization failed: singular system");

    const Eigen::Map<const Eigen::VectorXd> b(system.rhs.data(), n);
    Eigen::VectorXd x = lu.solve(b);
    const double bnorm = b.norm();
    if (bnorm > 0.0) {
        Eigen::VectorXd r = b - a * x;
        if (r.norm() > 1e-13 * bnorm) x += lu.solve(r).eval();
        r = b - a * x;
        if (!(r.norm() <= 1e-12 * bnorm))
            throw SolverError("sparse solve did not reach the residual tolerance");
    }
    return std::vector<double>(x.data(), x.data() + n);
}

}  // namespace backus
