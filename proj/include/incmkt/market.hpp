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
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "incmkt/error.hpp"
#include "incmkt/lp.hpp"

namespace incmkt {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// One-period market: N assets, K states. payoffs(i, j) is the payoff of
/// asset j in state i; asset 0 is the riskless bond.
struct MarketModel {
    double riskless_rate = 0.0;
    Vector prices;
    Matrix payoffs;

    int n_assets() const { return static_cast<int>(payoffs.cols()); }
    int n_states() const { return static_cast<int>(payoffs.rows()); }
    double growth() const { return 1.0 + riskless_rate; }

    /// Excess gain per unit of money in each risky asset: d_j(w_i)/p_j - (1+r),
    /// shape K x (N-1).
    Matrix excess_gains() const {
        Matrix g(n_states(), n_assets() - 1);
        for (int j = 1; j < n_assets(); ++j) {
            g.col(j - 1) = payoffs.col(j) / prices[j] - Vector::Constant(n_states(), growth());
        }
        return g;
    }
};

/// Probability vector over the K states. Interior measures are strictly
/// positive; closed ones may touch the simplex boundary.
class BeliefMeasure {
public:
    static BeliefMeasure interior(Vector weights) { return BeliefMeasure(std::move(weights), false); }
    static BeliefMeasure closed(Vector weights) { return BeliefMeasure(std::move(weights), true); }

    const Vector& weights() const { return weights_; }
    bool boundary_allowed() const { return boundary_allowed_; }
    int size() const { return static_cast<int>(weights_.size()); }
    double operator[](int i) const { return weights_[i]; }

private:
    BeliefMeasure(Vector weights, bool boundary_allowed)
        : weights_(std::move(weights)), boundary_allowed_(boundary_allowed) {
        if (weights_.size() < 1) throw Error(ErrorCode::InvalidInput, "belief measure is empty");
        for (Eigen::Index i = 0; i < weights_.size(); ++i) {
            const double w = weights_[i];
            if (!std::isfinite(w) || w < 0.0 || (!boundary_allowed_ && w <= 0.0)) {
                throw Error(ErrorCode::InvalidInput,
                            "belief weight " + std::to_string(i) + " = " + std::to_string(w) +
                                (boundary_allowed_ ? " is negative" : " is not strictly positive"));
            }
        }
        if (std::abs(weights_.sum() - 1.0) > 1e-12) {
            throw Error(ErrorCode::InvalidInput, "belief weights sum to " + std::to_string(weights_.sum()));
        }
    }

    Vector weights_;
    bool boundary_allowed_;
};

struct ContingentClaim {
    Vector payoff;

    explicit ContingentClaim(Vector p) : payoff(std::move(p)) {
        for (Eigen::Index i = 0; i < payoff.size(); ++i) {
            if (!std::isfinite(payoff[i])) throw Error(ErrorCode::InvalidInput, "claim payoff is not finite");
        }
    }
    double spread() const { return payoff.maxCoeff() - payoff.minCoeff(); }
};

struct PriceBand {
    double lower = 0.0;
    double upper = 0.0;

    double width() const { return upper - lower; }
    bool contains(double p, double tol = 0.0) const { return p >= lower - tol && p <= upper + tol; }
};

struct ValidationReport {
    bool dimensions_consistent = false;
    bool positive_prices = false;
    bool ones_column = false;
    bool riskless_price = false;
    bool full_rank = false;
    bool incomplete = false;
    double min_singular_value = 0.0;
    std::vector<std::string> failures;

    bool ok() const { return failures.empty(); }
};

inline constexpr double kRankThreshold = 1e-10;

/// Structural checks: bond column, bond price 1/(1+r), no redundant asset, N < K.
inline ValidationReport validate_market(const MarketModel& m) {
    ValidationReport rep;
    const auto K = m.payoffs.rows();
    const auto N = m.payoffs.cols();
    rep.dimensions_consistent = N >= 1 && K >= 2 && m.prices.size() == N && m.riskless_rate > -1.0 &&
                                m.payoffs.allFinite() && m.prices.allFinite();
    if (!rep.dimensions_consistent) {
        rep.failures.emplace_back("dimensions: need N >= 1, K >= 2, one price per asset, r > -1, finite entries");
        return rep;
    }
    rep.positive_prices = (m.prices.array() > 0.0).all();
    if (!rep.positive_prices) rep.failures.emplace_back("prices must be strictly positive");
    rep.ones_column = (m.payoffs.col(0).array() - 1.0).abs().maxCoeff() <= 1e-12;
    if (!rep.ones_column) rep.failures.emplace_back("first payoff column must be the riskless unit payoff");
    rep.riskless_price = std::abs(m.prices[0] - 1.0 / m.growth()) <= 1e-12;
    if (!rep.riskless_price) rep.failures.emplace_back("riskless price must equal 1/(1+r)");
    Eigen::JacobiSVD<Matrix> svd(m.payoffs);
    rep.min_singular_value = svd.singularValues().minCoeff();
    rep.full_rank = rep.min_singular_value > kRankThreshold;
    if (!rep.full_rank) rep.failures.emplace_back("payoff matrix is rank deficient (redundant asset)");
    rep.incomplete = N < K;
    if (!rep.incomplete) rep.failures.emplace_back("market is not incomplete (need N < K)");
    return rep;
}

namespace detail {

// Equality system of the risk-neutral family: sum q = 1 and D^T q = (1+r) p.
inline void risk_neutral_system(const MarketModel& m, Matrix& A, Vector& b) {
    const int K = m.n_states();
    const int N = m.n_assets();
    A.resize(N + 1, K);
    b.resize(N + 1);
    A.row(0).setOnes();
    b[0] = 1.0;
    A.bottomRows(N) = m.payoffs.transpose();
    b.tail(N) = m.growth() * m.prices;
}

}  // namespace detail

struct ArbitrageCheck {
    bool arbitrage_free = false;
    std::optional<BeliefMeasure> witness;
    double min_weight = 0.0;  // max over the family of min_i q_i
};

/// True iff a strictly positive risk-neutral measure exists. The witness
/// maximizes its smallest component over the family.
inline ArbitrageCheck arbitrage_free(const MarketModel& m) {
    Matrix A;
    Vector b;
    detail::risk_neutral_system(m, A, b);
    const int K = m.n_states();
    // q = s + t*1 with s >= 0, t >= 0; maximize t.
    Matrix Alp(A.rows(), K + 1);
    Alp.leftCols(K) = A;
    Alp.col(K) = A.rowwise().sum();
    Vector c = Vector::Zero(K + 1);
    c[K] = -1.0;
    const auto res = lp::solve_standard(Alp, b, c);
    ArbitrageCheck out;
    if (res.status != lp::Status::Optimal) return out;
    const double t = res.x[K];
    out.min_weight = t;
    if (t <= 1e-9) return out;
    Vector q = res.x.head(K).array() + t;
    q /= q.sum();
    out.arbitrage_free = true;
    out.witness = BeliefMeasure::interior(q);
    return out;
}

inline double risk_neutral_price(const BeliefMeasure& q, const ContingentClaim& claim, double riskless_rate) {
    return q.weights().dot(claim.payoff) / (1.0 + riskless_rate);
}

/// Sub/super-replication band: extremes of E_Q[F]/(1+r) over the closed
/// risk-neutral family, each a linear program.
inline PriceBand price_band(const MarketModel& m, const ContingentClaim& claim) {
    if (claim.payoff.size() != m.n_states()) throw Error(ErrorCode::InvalidInput, "claim length != K");
    Matrix A;
    Vector b;
    detail::risk_neutral_system(m, A, b);
    const Vector c = claim.payoff / m.growth();
    const auto lo = lp::solve_standard(A, b, c);
    const auto hi = lp::solve_standard(A, b, -c);
    if (lo.status != lp::Status::Optimal || hi.status != lp::Status::Optimal) {
        throw Error(ErrorCode::Arbitrage, "risk-neutral family is empty");
    }
    PriceBand band{lo.objective, -hi.objective};
    if (band.upper < band.lower) band.upper = band.lower;
    return band;
}

/// Residual of the risk-neutral equalities and the most negative weight.
inline double risk_neutral_residual(const MarketModel& m, const Vector& q) {
    Matrix A;
    Vector b;
    detail::risk_neutral_system(m, A, b);
    double r = (A * q - b).cwiseAbs().maxCoeff();
    r = std::max(r, -q.minCoeff());
    return r;
}

/// Orthonormal basis of the directions along which the risk-neutral
/// equalities are invariant (K x d).
inline Matrix risk_neutral_directions(const MarketModel& m) {
    Matrix A;
    Vector b;
    detail::risk_neutral_system(m, A, b);
    Eigen::JacobiSVD<Matrix> svd(A, Eigen::ComputeFullV);
    const auto& sv = svd.singularValues();
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
        if (sv[i] > kRankThreshold * std::max(1.0, sv[0])) ++rank;
    }
    return svd.matrixV().rightCols(A.cols() - rank);
}

/// Euclidean projection onto the affine hull of the risk-neutral family.
inline Vector project_risk_neutral_affine(const MarketModel& m, const Vector& anchor, const Vector& x) {
    const Matrix Z = risk_neutral_directions(m);
    return anchor + Z * (Z.transpose() * (x - anchor));
}

/// Seeded interior samples of the risk-neutral family: uniform rejection
/// sampling on the LP bounding box of the family in null-space coordinates.
inline std::vector<BeliefMeasure> sample_risk_neutral(const MarketModel& m, std::uint64_t seed, int count) {
    std::vector<BeliefMeasure> out;
    if (count <= 0) return out;
    const auto arb = arbitrage_free(m);
    if (!arb.arbitrage_free) throw Error(ErrorCode::Arbitrage, "market admits arbitrage");
    const Vector q0 = arb.witness->weights();
    const Matrix Z = risk_neutral_directions(m);
    const int K = m.n_states();
    const auto d = Z.cols();
    out.reserve(count);
    if (d == 0) {
        for (int i = 0; i < count; ++i) out.push_back(*arb.witness);
        return out;
    }
    // Box bounds on y from min/max y_k subject to q0 + Z y >= 0.
    // Standard form with y = y+ - y-: Z y+ - Z y- - s = -q0.
    Matrix A(K, 2 * d + K);
    A.leftCols(d) = Z;
    A.middleCols(d, d) = -Z;
    A.rightCols(K) = -Matrix::Identity(K, K);
    const Vector b = -q0;
    Vector lo(d), hi(d);
    for (Eigen::Index k = 0; k < d; ++k) {
        Vector c = Vector::Zero(2 * d + K);
        c[k] = 1.0;
        c[d + k] = -1.0;
        const auto rmin = lp::solve_standard(A, b, c);
        const auto rmax = lp::solve_standard(A, b, -c);
        if (rmin.status != lp::Status::Optimal || rmax.status != lp::Status::Optimal) {
            throw Error(ErrorCode::Exhaustion, "could not bound the risk-neutral family");
        }
        lo[k] = rmin.objective;
        hi[k] = -rmax.objective;
    }
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::uint64_t attempts = 0;
    Vector y(d);
    while (static_cast<int>(out.size()) < count) {
        ++attempts;
        if (attempts > 1000000ULL * (out.size() + 1)) {
            throw Error(ErrorCode::Exhaustion, "acceptance rate below 1e-6");
        }
        for (Eigen::Index k = 0; k < d; ++k) y[k] = lo[k] + (hi[k] - lo[k]) * unif(rng);
        Vector q = q0 + Z * y;
        if ((q.array() <= 0.0).any()) continue;
        q /= q.sum();
        if (risk_neutral_residual(m, q) > 1e-10) continue;
        out.push_back(BeliefMeasure::interior(std::move(q)));
    }
    return out;
}

}  // namespace incmkt
