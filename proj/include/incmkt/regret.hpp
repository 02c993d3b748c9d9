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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "incmkt/error.hpp"
#include "incmkt/market.hpp"
#include "incmkt/numerics.hpp"
#include "incmkt/preferences.hpp"

namespace incmkt {

enum class Distance { SquaredEuclidean, KullbackLeibler };

inline constexpr std::string_view to_string(Distance d) {
    return d == Distance::SquaredEuclidean ? "squared-euclidean" : "kl-divergence";
}

/// Cost of moving from the anchor to q. KL uses the anchor as reference measure.
inline double belief_distance(Distance d, const Vector& q, const Vector& anchor) {
    if (d == Distance::SquaredEuclidean) return (q - anchor).squaredNorm();
    double s = 0.0;
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        if (q[i] > 0.0) s += q[i] * std::log(q[i] / anchor[i]);
    }
    return s;
}

inline Vector belief_distance_gradient(Distance d, const Vector& q, const Vector& anchor) {
    if (d == Distance::SquaredEuclidean) return 2.0 * (q - anchor);
    Vector g(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) g[i] = std::log(std::max(q[i], 1e-300) / anchor[i]) + 1.0;
    return g;
}

struct RegretConfig {
    double lambda = 0.5;
    Vector seller_anchor;
    Vector buyer_anchor;
    Distance distance = Distance::SquaredEuclidean;
    std::optional<double> budget;
    std::uint64_t seed = 1;

    void validate(int K) const {
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidInput, "lambda must lie in [0, 1]");
        for (const Vector* a : {&seller_anchor, &buyer_anchor}) {
            if (a->size() != K) throw Error(ErrorCode::InvalidInput, "anchor dimension mismatch");
            (void)BeliefMeasure::interior(*a);
        }
        if (budget && !(*budget >= 0.0)) throw Error(ErrorCode::InvalidInput, "regret budget must be >= 0");
    }
};

struct RegretSolution {
    Vector seller_beliefs;
    Vector buyer_beliefs;
    double seller_price = 0.0;
    double buyer_price = 0.0;
    double price = 0.0;
    double total_regret = 0.0;
    double constraint_residual = 0.0;  // max(0, P_S - P_B), or budget excess for the dual
    double price_gap = 0.0;            // P_B - P_S
    std::optional<double> grid_objective;
    bool certified = false;
    std::vector<std::string> warnings;
};

namespace detail {

/// Minimise f(x) subject to c(x) <= 0 over a product of two blocks, each
/// with its own Euclidean projection. Augmented Lagrangian outer loop with
/// projected-gradient inner solves.
struct BlockProblem {
    std::function<double(const Vector&, const Vector&)> objective;
    std::function<void(const Vector&, const Vector&, Vector&, Vector&)> objective_gradient;
    std::function<double(const Vector&, const Vector&)> constraint;
    std::function<void(const Vector&, const Vector&, Vector&, Vector&)> constraint_gradient;
    std::function<Vector(const Vector&)> project;
};

struct BlockPoint {
    Vector a;
    Vector b;
    double objective = numerics::kInf;
    double violation = numerics::kInf;
};

inline BlockPoint augmented_lagrangian(const BlockProblem& pb, Vector a, Vector b, double feas_tol = 1e-9) {
    a = pb.project(a);
    b = pb.project(b);
    double mu = 0.0, rho = 10.0;
    double prev_c = numerics::kInf;
    auto merit = [&](const Vector& x, const Vector& y, double& fo, double& co) {
        fo = pb.objective(x, y);
        co = pb.constraint(x, y);
        const double s = std::max(0.0, co + mu / rho);
        return fo + 0.5 * rho * s * s;
    };
    for (int outer = 0; outer < 40; ++outer) {
        double fo, co;
        double m = merit(a, b, fo, co);
        double t = 0.1;
        for (int inner = 0; inner < 300; ++inner) {
            Vector ga, gb, ca, cb;
            pb.objective_gradient(a, b, ga, gb);
            const double s = std::max(0.0, co + mu / rho);
            if (s > 0.0) {
                pb.constraint_gradient(a, b, ca, cb);
                ga += rho * s * ca;
                gb += rho * s * cb;
            }
            const double gnorm = std::max(ga.cwiseAbs().maxCoeff(), gb.cwiseAbs().maxCoeff());
            if (!(gnorm > 0.0)) break;
            bool moved = false;
            double change = 0.0;
            for (int ls = 0; ls < 50; ++ls) {
                const Vector na = pb.project(a - (t / gnorm) * ga);
                const Vector nb = pb.project(b - (t / gnorm) * gb);
                change = std::max((na - a).cwiseAbs().maxCoeff(), (nb - b).cwiseAbs().maxCoeff());
                if (change == 0.0) break;
                double nf, nc;
                const double nm = merit(na, nb, nf, nc);
                const double pred = ga.dot(na - a) + gb.dot(nb - b);
                if (nm <= m + 1e-4 * pred) {
                    a = na;
                    b = nb;
                    m = nm;
                    fo = nf;
                    co = nc;
                    moved = true;
                    break;
                }
                t *= 0.5;
            }
            if (!moved || change < 1e-13) break;
            t = std::min(1.0, 2.0 * t);
        }
        const double viol = std::max(0.0, co);
        const double new_mu = std::max(0.0, mu + rho * co);
        const bool converged = viol <= feas_tol && std::abs(new_mu - mu) <= 1e-10 * (1.0 + mu);
        mu = new_mu;
        if (converged) break;
        if (viol > 0.25 * prev_c) rho = std::min(rho * 4.0, 1e12);
        prev_c = viol;
    }
    BlockPoint out{a, b, pb.objective(a, b), std::max(0.0, pb.constraint(a, b))};
    return out;
}

/// Gradient of a belief-price map in the form v_i = D_{e_i - q} P, which
/// differs from the full gradient by a multiple of the ones vector.
template <class F>
Vector simplex_gradient(const F& price, const Vector& q, double pq) {
    const double h = 1e-7;
    Vector v(q.size());
    for (Eigen::Index i = 0; i < q.size(); ++i) {
        Vector qi = (1.0 - h) * q;
        qi[i] += h;
        v[i] = (price(qi) - pq) / h;
    }
    return v;
}

inline std::vector<std::pair<Vector, Vector>> regret_starts(const RegretConfig& cfg, int K, int seeded) {
    std::vector<std::pair<Vector, Vector>> starts;
    starts.emplace_back(cfg.seller_anchor, cfg.buyer_anchor);
    const Vector bary = Vector::Constant(K, 1.0 / K);
    starts.emplace_back(bary, bary);
    std::mt19937_64 rng(cfg.seed);
    std::exponential_distribution<double> expo(1.0);
    for (int s = 0; s < seeded; ++s) {
        Vector x(K), y(K);
        for (int i = 0; i < K; ++i) x[i] = expo(rng);
        for (int i = 0; i < K; ++i) y[i] = expo(rng);
        starts.emplace_back(x / x.sum(), y / y.sum());
    }
    return starts;
}

// Zero weights are replaced by a tiny one so the otherwise free party stays
// as close to its anchor as the optimum of the weighted party allows.
inline double effective_lambda(double lam) { return std::clamp(lam, 1e-6, 1.0 - 1e-6); }

}  // namespace detail

/// Prices quoted by a seller and a buyer as functions of their beliefs.
struct BeliefPricePair {
    BeliefPricer seller;
    BeliefPricer buyer;
    BeliefPricePair(const MarketModel& m, const AgentSpec& s, const AgentSpec& b, const ContingentClaim& f)
        : seller(m, s, f, Role::Seller), buyer(m, b, f, Role::Buyer) {}
};

namespace detail {

inline RegretSolution finish_regret(const BeliefPricePair& prices, const RegretConfig& cfg, const Vector& qs,
                                    const Vector& qb) {
    RegretSolution s;
    s.seller_beliefs = qs;
    s.buyer_beliefs = qb;
    s.seller_price = prices.seller(qs);
    s.buyer_price = prices.buyer(qb);
    s.price = 0.5 * (s.seller_price + s.buyer_price);
    s.price_gap = s.buyer_price - s.seller_price;
    s.total_regret = cfg.lambda * belief_distance(cfg.distance, qs, cfg.seller_anchor) +
                     (1.0 - cfg.lambda) * belief_distance(cfg.distance, qb, cfg.buyer_anchor);
    s.constraint_residual = std::max(0.0, -s.price_gap);
    return s;
}

}  // namespace detail

/// Minimises lambda*d(Q_S, anchor_S) + (1-lambda)*d(Q_B, anchor_B) subject
/// to P_S(Q_S) <= P_B(Q_B), over pairs of beliefs on the closed simplex.
inline RegretSolution solve_belief_primal(const BeliefPricePair& prices, const RegretConfig& cfg) {
    const int K = prices.seller.n_states();
    cfg.validate(K);
    const double ps0 = prices.seller(cfg.seller_anchor);
    const double pb0 = prices.buyer(cfg.buyer_anchor);
    if (ps0 <= pb0) {
        auto s = detail::finish_regret(prices, cfg, cfg.seller_anchor, cfg.buyer_anchor);
        s.certified = true;
        return s;
    }
    const double lam = detail::effective_lambda(cfg.lambda);
    detail::BlockProblem pb;
    pb.objective = [&](const Vector& x, const Vector& y) {
        return lam * belief_distance(cfg.distance, x, cfg.seller_anchor) +
               (1.0 - lam) * belief_distance(cfg.distance, y, cfg.buyer_anchor);
    };
    pb.objective_gradient = [&](const Vector& x, const Vector& y, Vector& gx, Vector& gy) {
        gx = lam * belief_distance_gradient(cfg.distance, x, cfg.seller_anchor);
        gy = (1.0 - lam) * belief_distance_gradient(cfg.distance, y, cfg.buyer_anchor);
    };
    pb.constraint = [&](const Vector& x, const Vector& y) { return prices.seller(x) - prices.buyer(y); };
    pb.constraint_gradient = [&](const Vector& x, const Vector& y, Vector& gx, Vector& gy) {
        gx = detail::simplex_gradient(prices.seller, x, prices.seller(x));
        gy = -detail::simplex_gradient(prices.buyer, y, prices.buyer(y));
    };
    pb.project = [](const Vector& v) { return numerics::project_simplex(v); };

    std::optional<detail::BlockPoint> best;
    auto consider = [&](const detail::BlockPoint& p) {
        if (p.violation > 1e-7) return;
        if (!best || p.objective < best->objective - 1e-12) best = p;
    };
    for (const auto& [x0, y0] : detail::regret_starts(cfg, K, 16)) consider(detail::augmented_lagrangian(pb, x0, y0));

    std::optional<double> grid_obj;
    if (K <= 3) {
        const auto grid = numerics::simplex_grid(K, 10);
        std::vector<double> gs, gb;
        for (const auto& q : grid) {
            gs.push_back(prices.seller(q));
            gb.push_back(prices.buyer(q));
        }
        std::size_t bi = 0, bj = 0;
        double g = numerics::kInf;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (std::size_t j = 0; j < grid.size(); ++j) {
                if (gs[i] > gb[j]) continue;
                const double v = pb.objective(grid[i], grid[j]);
                if (v < g) { g = v; bi = i; bj = j; }
            }
        }
        if (std::isfinite(g)) {
            grid_obj = g;
            if (!best || best->objective > g) consider(detail::augmented_lagrangian(pb, grid[bi], grid[bj]));
            if (!best || best->objective > g) {
                best = detail::BlockPoint{grid[bi], grid[bj], g, 0.0};
            }
        }
    }
    if (!best) {
        if (price_extremes(prices.buyer).max_price < price_extremes(prices.seller).min_price) {
            throw Error(ErrorCode::Infeasible, "no pair of beliefs lets the buyer price cover the seller price");
        }
        throw Error(ErrorCode::NonConvergence, "belief regret solver found no feasible point");
    }
    auto s = detail::finish_regret(prices, cfg, best->a, best->b);
    s.grid_objective = grid_obj;
    s.certified = !grid_obj || s.total_regret <= *grid_obj + 5e-3;
    return s;
}

/// Maximises P_B(Q_B) - P_S(Q_S) subject to total regret <= budget.
inline RegretSolution solve_belief_dual(const BeliefPricePair& prices, const RegretConfig& cfg) {
    const int K = prices.seller.n_states();
    cfg.validate(K);
    if (!cfg.budget) throw Error(ErrorCode::InvalidInput, "dual regret problem needs a budget");
    const double w = *cfg.budget;
    auto anchors = detail::finish_regret(prices, cfg, cfg.seller_anchor, cfg.buyer_anchor);
    anchors.constraint_residual = 0.0;
    if (w == 0.0) {
        anchors.certified = true;
        return anchors;
    }
    auto regret = [&](const Vector& x, const Vector& y) {
        return cfg.lambda * belief_distance(cfg.distance, x, cfg.seller_anchor) +
               (1.0 - cfg.lambda) * belief_distance(cfg.distance, y, cfg.buyer_anchor);
    };
    detail::BlockProblem pb;
    pb.objective = [&](const Vector& x, const Vector& y) { return prices.seller(x) - prices.buyer(y); };
    pb.objective_gradient = [&](const Vector& x, const Vector& y, Vector& gx, Vector& gy) {
        gx = detail::simplex_gradient(prices.seller, x, prices.seller(x));
        gy = -detail::simplex_gradient(prices.buyer, y, prices.buyer(y));
    };
    pb.constraint = [&](const Vector& x, const Vector& y) { return regret(x, y) - w; };
    pb.constraint_gradient = [&](const Vector& x, const Vector& y, Vector& gx, Vector& gy) {
        gx = cfg.lambda * belief_distance_gradient(cfg.distance, x, cfg.seller_anchor);
        gy = (1.0 - cfg.lambda) * belief_distance_gradient(cfg.distance, y, cfg.buyer_anchor);
    };
    pb.project = [](const Vector& v) { return numerics::project_simplex(v); };

    detail::BlockPoint best{cfg.seller_anchor, cfg.buyer_anchor, pb.objective(cfg.seller_anchor, cfg.buyer_anchor), 0.0};
    auto consider = [&](const detail::BlockPoint& p) {
        if (p.violation > 1e-7 * std::max(1.0, w)) return;
        if (p.objective < best.objective - 1e-12) best = p;
    };
    for (const auto& [x0, y0] : detail::regret_starts(cfg, K, 16)) consider(detail::augmented_lagrangian(pb, x0, y0));
    std::optional<double> grid_obj;
    if (K <= 3) {
        const auto grid = numerics::simplex_grid(K, 10);
        std::vector<double> gs, gb;
        for (const auto& q : grid) {
            gs.push_back(prices.seller(q));
            gb.push_back(prices.buyer(q));
        }
        double g = numerics::kInf;
        std::size_t bi = 0, bj = 0;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            for (std::size_t j = 0; j < grid.size(); ++j) {
                if (regret(grid[i], grid[j]) > w) continue;
                if (gs[i] - gb[j] < g) { g = gs[i] - gb[j]; bi = i; bj = j; }
            }
        }
        if (std::isfinite(g)) {
            grid_obj = -g;
            if (best.objective > g) consider(detail::augmented_lagrangian(pb, grid[bi], grid[bj]));
            if (best.objective > g) best = detail::BlockPoint{grid[bi], grid[bj], g, 0.0};
        }
    }
    auto s = detail::finish_regret(prices, cfg, best.a, best.b);
    s.constraint_residual = std::max(0.0, s.total_regret - w);
    s.grid_objective = grid_obj;
    s.certified = !grid_obj || s.price_gap >= *grid_obj - 5e-3;
    return s;
}

enum class RegretShape { Linear, Quadratic, ExponentialConcave };

/// Increasing regret function with phi(0) = 0: scale*x, scale*x^2 or
/// scale*(1 - exp(-rate*x))/rate.
struct RegretFunction {
    RegretShape shape = RegretShape::Quadratic;
    double scale = 1.0;
    double rate = 1.0;

    double operator()(double x) const {
        switch (shape) {
            case RegretShape::Linear: return scale * x;
            case RegretShape::Quadratic: return scale * x * x;
            case RegretShape::ExponentialConcave: return scale * -std::expm1(-rate * x) / rate;
        }
        return numerics::kNaN;
    }
    bool strictly_convex() const { return shape == RegretShape::Quadratic; }
    void validate() const {
        if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(ErrorCode::InvalidInput, "regret scale must be positive");
        if (shape == RegretShape::ExponentialConcave && !(rate > 0.0)) {
            throw Error(ErrorCode::InvalidInput, "regret rate must be positive");
        }
    }
};

inline constexpr std::string_view to_string(RegretShape s) {
    switch (s) {
        case RegretShape::Linear: return "linear";
        case RegretShape::Quadratic: return "quadratic";
        case RegretShape::ExponentialConcave: return "exponential-concave";
    }
    return "unknown";
}

/// Price rectangle [buyer_lower, buyer_upper] x [seller_lower, seller_upper].
struct PriceRegretConfig {
    double buyer_lower = 0.0;
    double buyer_upper = 1.0;
    double seller_lower = 0.0;
    double seller_upper = 1.0;
    RegretFunction buyer_regret;
    RegretFunction seller_regret;
    double lambda = 0.5;

    void validate() const {
        if (!(buyer_lower <= buyer_upper) || !(seller_lower <= seller_upper)) {
            throw Error(ErrorCode::InvalidInput, "price rectangle is empty");
        }
        if (!(lambda >= 0.0 && lambda <= 1.0)) throw Error(ErrorCode::InvalidInput, "lambda must lie in [0, 1]");
        buyer_regret.validate();
        seller_regret.validate();
    }
};

/// Minimises lambda*phi_B(P_B - buyer_lower) + (1-lambda)*phi_S(seller_upper - P_S)
/// subject to P_B >= P_S on the rectangle.
inline RegretSolution solve_price_regret(const PriceRegretConfig& cfg) {
    cfg.validate();
    RegretSolution s;
    if (!cfg.buyer_regret.strictly_convex() || !cfg.seller_regret.strictly_convex()) {
        s.warnings.push_back("regret functions are not strictly convex; the optimal price may not be unique");
    }
    if (cfg.buyer_lower >= cfg.seller_upper) {
        s.buyer_price = cfg.buyer_lower;
        s.seller_price = cfg.seller_upper;
        s.price = 0.5 * (s.buyer_price + s.seller_price);
        s.price_gap = s.buyer_price - s.seller_price;
        s.total_regret = 0.0;
        s.certified = true;
        return s;
    }
    const double lo = std::max(cfg.buyer_lower, cfg.seller_lower);
    const double hi = std::min(cfg.buyer_upper, cfg.seller_upper);
    if (!(lo <= hi)) throw Error(ErrorCode::EmptyInterval, "no point of the price rectangle has P_B >= P_S");
    auto h = [&](double p) {
        return cfg.lambda * cfg.buyer_regret(p - cfg.buyer_lower) + (1.0 - cfg.lambda) * cfg.seller_regret(cfg.seller_upper - p);
    };
    const auto best = numerics::minimize_scalar(h, lo, hi);
    s.price = s.buyer_price = s.seller_price = best.x;
    s.total_regret = best.value;
    s.certified = true;
    return s;
}

namespace detail {

/// Euclidean projection onto {q >= 0, sum q = 1, A q = b} by Dykstra's
/// alternating projections between the simplex and the affine set.
class RiskNeutralProjector {
public:
    explicit RiskNeutralProjector(const MarketModel& m) {
        risk_neutral_system(m, A_, b_);
        Eigen::CompleteOrthogonalDecomposition<Matrix> cod(A_ * A_.transpose());
        gram_inv_ = cod.pseudoInverse();
    }

    Vector affine(const Vector& x) const { return x - A_.transpose() * (gram_inv_ * (A_ * x - b_)); }

    Vector operator()(const Vector& x) const {
        Vector y = x, p = Vector::Zero(x.size()), q = Vector::Zero(x.size());
        for (int it = 0; it < 20000; ++it) {
            const Vector z = affine(y + p);
            p = y + p - z;
            const Vector yn = numerics::project_simplex(z + q);
            q = z + q - yn;
            const double change = (yn - y).cwiseAbs().maxCoeff();
            y = yn;
            if (change < 1e-15 && (A_ * y - b_).cwiseAbs().maxCoeff() < 1e-13) break;
        }
        return y;
    }

private:
    Matrix A_;
    Vector b_;
    Matrix gram_inv_;
};

}  // namespace detail

/// Belief regret with linear prices P(Q) = E_Q[F]/(1+r), beliefs restricted
/// to the closure of the risk-neutral family.
inline RegretSolution risk_neutral_regret(const MarketModel& model, const ContingentClaim& claim,
                                          const RegretConfig& cfg) {
    const int K = model.n_states();
    cfg.validate(K);
    for (const Vector* a : {&cfg.seller_anchor, &cfg.buyer_anchor}) {
        if (risk_neutral_residual(model, *a) > 1e-9) {
            throw Error(ErrorCode::AnchorNotRiskNeutral, "anchor violates the risk-neutral pricing equations");
        }
    }
    const Vector fstar = claim.payoff / model.growth();
    const detail::RiskNeutralProjector project(model);
    const double lam = detail::effective_lambda(cfg.lambda);
    detail::BlockProblem pb;
    pb.objective = [&](const Vector& x, const Vector& y) {
        return lam * belief_distance(cfg.distance, x, cfg.seller_anchor) +
               (1.0 - lam) * belief_distance(cfg.distance, y, cfg.buyer_anchor);
    };
    pb.objective_gradient = [&](const Vector& x, const Vector& y, Vector& gx, Vector& gy) {
        gx = lam * belief_distance_gradient(cfg.distance, x, cfg.seller_anchor);
        gy = (1.0 - lam) * belief_distance_gradient(cfg.distance, y, cfg.buyer_anchor);
    };
    pb.constraint = [&](const Vector& x, const Vector& y) { return fstar.dot(x) - fstar.dot(y); };
    pb.constraint_gradient = [&](const Vector&, const Vector&, Vector& gx, Vector& gy) {
        gx = fstar;
        gy = -fstar;
    };
    pb.project = [&](const Vector& v) { return project(v); };

    RegretSolution s;
    Vector qs = cfg.seller_anchor, qb = cfg.buyer_anchor;
    if (fstar.dot(qs) > fstar.dot(qb)) {
        // convex problem: a single run from the anchors suffices
        const auto p = detail::augmented_lagrangian(pb, qs, qb, 1e-12);
        qs = p.a;
        qb = p.b;
    }
    s.seller_beliefs = qs;
    s.buyer_beliefs = qb;
    s.seller_price = fstar.dot(qs);
    s.buyer_price = fstar.dot(qb);
    s.price = 0.5 * (s.seller_price + s.buyer_price);
    s.price_gap = s.buyer_price - s.seller_price;
    s.constraint_residual = std::max(0.0, -s.price_gap);
    s.total_regret = cfg.lambda * belief_distance(cfg.distance, qs, cfg.seller_anchor) +
                     (1.0 - cfg.lambda) * belief_distance(cfg.distance, qb, cfg.buyer_anchor);
    s.certified = true;
    return s;
}

}  // namespace incmkt
