#pragma once

#include <vector>

namespace backus {

// Square sparse matrix in compressed row form with a fixed symmetric
// pattern, plus a right-hand side.
struct SparseSystem {
    int n = 0;
    std::vector<int> row_offsets;  // size n + 1
    std::vector<int> cols;         // sorted within each row
    std::vector<double> vals;
    std::vector<double> rhs;

    // Adds v to entry (i, j); the entry must exist in the pattern.
    void add(int i, int j, double v);
    // Returns the stored value of (i, j), or 0 if absent from the pattern.
    double at(int i, int j) const;

    // Builds a system with the given dense-row pattern filled with zeros.
    static SparseSystem from_pattern(int n, const std::vector<std::vector<int>>& rows);
};

// Direct sparse solve; the relative residual of the returned vector is
// at most 1e-12. Deterministic. Throws SolverError on breakdown.
std::vector<double> solve_linear(const SparseSystem& system);

}  // namespace backus
