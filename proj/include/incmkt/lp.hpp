/*
 * Copyright 2026 The incmkt Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace incmkt::lp {

enum class Status { Optimal, Infeasible, Unbounded };

struct Result {
    Status status = Status::Infeasible;
    Eigen::VectorXd x;
    double objective = std::numeric_limits<double>::quiet_NaN();
    double phase1_residual = 0.0;
};

struct Options {
    double pivot_tol = 1e-11;
    double feas_tol = 1e-9;
    int max_pivots = 50000;
};

namespace detail {

class Tableau {
public:
    // Rows 0..m-1 are constraints; the last column holds the rhs.
    Eigen::MatrixXd t;
    std::vector<int> basis;

    void pivot(int row, int col) {
        t.row(row) /= t(row, col);
        for (Eigen::Index r = 0; r < t.rows(); ++r) {
            if (r != row && t(r, col) != 0.0) t.row(r) -= t(r, col) * t.row(row);
        }
        basis[row] = col;
    }
};

// Minimizes cost . x over the tableau's current basis using Bland's rule.
// cost has one entry per structural column (rhs excluded). Columns flagged in
// `blocked` never enter.
inline Status run_simplex(Tableau& tab, const Eigen::VectorXd& cost, const std::vector<bool>& blocked,
                          const Options& opt) {
    const Eigen::Index m = tab.t.rows();
    const Eigen::Index ncol = tab.t.cols() - 1;
    for (int it = 0; it < opt.max_pivots; ++it) {
        // Reduced costs r_j = c_j - c_B^T B^{-1} A_j, evaluated on the fly.
        int enter = -1;
        for (Eigen::Index j = 0; j < ncol; ++j) {
            if (blocked[j]) continue;
            double r = cost[j];
            for (Eigen::Index i = 0; i < m; ++i) r -= cost[tab.basis[i]] * tab.t(i, j);
            if (r < -opt.pivot_tol) {
                enter = static_cast<int>(j);
                break;
            }
        }
        if (enter < 0) return Status::Optimal;
        int leave = -1;
        double best_ratio = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < m; ++i) {
            const double a = tab.t(i, enter);
            if (a > opt.pivot_tol) {
                const double ratio = tab.t(i, ncol) / a;
                if (ratio < best_ratio - 1e-14 ||
                    (std::abs(ratio - best_ratio) <= 1e-14 && leave >= 0 && tab.basis[i] < tab.basis[leave])) {
                    best_ratio = ratio;
                    leave = static_cast<int>(i);
                }
            }
        }
        if (leave < 0) return Status::Unbounded;
        tab.pivot(leave, enter);
    }
    return Status::Unbounded;
}

}  // namespace detail

/// Solves min c.x subject to A x = b, x >= 0 with a dense two-phase simplex
/// and Bland's anti-cycling rule. Redundant equality rows are tolerated.
inline Result solve_standard(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, const Eigen::VectorXd& c,
                             const Options& opt = {}) {
    const Eigen::Index m = A.rows();
    const Eigen::Index n = A.cols();
    detail::Tableau tab;
    tab.t = Eigen::MatrixXd::Zero(m, n + m + 1);
    tab.basis.resize(m);
    for (Eigen::Index i = 0; i < m; ++i) {
        const double sign = b[i] < 0.0 ? -1.0 : 1.0;
        tab.t.row(i).head(n) = sign * A.row(i);
        tab.t(i, n + i) = 1.0;
        tab.t(i, n + m) = sign * b[i];
        tab.basis[i] = static_cast<int>(n + i);
    }

    // Phase 1: minimize the sum of artificials.
    Eigen::VectorXd cost1 = Eigen::VectorXd::Zero(n + m);
    cost1.tail(m).setOnes();
    std::vector<bool> blocked(n + m, false);
    detail::run_simplex(tab, cost1, blocked, opt);
    double infeas = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (tab.basis[i] >= n) infeas += tab.t(i, n + m);
    }
    Result res;
    res.phase1_residual = infeas;
    const double scale = 1.0 + b.cwiseAbs().maxCoeff();
    if (infeas > opt.feas_tol * scale) {
        res.status = Status::Infeasible;
        return res;
    }

    // Drive artificials out of the basis; rows with no eligible pivot are redundant.
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < m; ++i) {
        if (tab.basis[i] >= n) {
            int col = -1;
            double best = opt.pivot_tol * 100.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (std::abs(tab.t(i, j)) > best) {
                    best = std::abs(tab.t(i, j));
                    col = static_cast<int>(j);
                }
            }
            if (col >= 0) {
                tab.pivot(static_cast<int>(i), col);
                keep.push_back(i);
            }
        } else {
            keep.push_back(i);
        }
    }
    detail::Tableau tab2;
    tab2.t.resize(static_cast<Eigen::Index>(keep.size()), n + 1);
    tab2.basis.resize(keep.size());
    for (std::size_t k = 0; k < keep.size(); ++k) {
        tab2.t.row(static_cast<Eigen::Index>(k)).head(n) = tab.t.row(keep[k]).head(n);
        tab2.t(static_cast<Eigen::Index>(k), n) = tab.t(keep[k], n + m);
        tab2.basis[k] = tab.basis[keep[k]];
    }

    std::vector<bool> blocked2(n, false);
    const Status st = detail::run_simplex(tab2, c, blocked2, opt);
    res.status = st;
    if (st != Status::Optimal) return res;
    res.x = Eigen::VectorXd::Zero(n);
    for (std::size_t k = 0; k < tab2.basis.size(); ++k) {
        res.x[tab2.basis[k]] = std::max(0.0, tab2.t(static_cast<Eigen::Index>(k), n));
    }
    res.objective = c.dot(res.x);
    return res;
}

}  // namespace incmkt::lp
