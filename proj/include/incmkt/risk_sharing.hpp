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
#include <functional>
#include <future>
#include <optional>
#include <string>
#include <vector>

#include "incmkt/curves.hpp"
#include "incmkt/error.hpp"
#include "incmkt/numerics.hpp"

namespace incmkt {

/// Weight lambda on the seller's risk in lambda*eps_S + (1-lambda)*eps_B.
struct SharingConfig {
    double lambda = 0.5;
    std::optional<double> budget;
    double tolerance = 1e-6;

    void validate() const {
        if (!(lambda > 0.0 && lambda < 1.0)) throw Error(ErrorCode::InvalidInput, "lambda must lie in (0, 1)");
        if (budget && !(*budget > 0.0)) throw Error(ErrorCode::InvalidInput, "risk budget must be positive");
    }
};

struct KktReport {
    double multiplier = 0.0;
    double stationarity_seller = 0.0;  // lambda + mu * dP_S/deps_S
    double stationarity_buyer = 0.0;   // (1 - lambda) - mu * dP_B/deps_B
    double complementarity = 0.0;      // eps_S * s_S + eps_B * s_B + mu * (P_S - P_B)
    double infeasibility = 0.0;        // max(0, P_S - P_B)
    double max_violation = 0.0;
};

struct SharingSolution {
    double eps_seller = 0.0;
    double eps_buyer = 0.0;
    double price = 0.0;
    double seller_price = 0.0;
    double buyer_price = 0.0;
    double objective = 0.0;
    double multiplier = 0.0;
    double kkt_residual = 0.0;
    bool slack = false;

    double price_gap() const { return buyer_price - seller_price; }
};

/// Evaluates the first-order conditions of the primal at a candidate point.
/// The multiplier is the non-negative least-squares fit of the two
/// stationarity relations, or zero when the price constraint is slack.
inline KktReport kkt_residuals(const PriceCurvePair& curves, const SharingSolution& s, double lambda) {
    KktReport r;
    const double ps = curves.seller(s.eps_seller);
    const double pb = curves.buyer(s.eps_buyer);
    const double gap = ps - pb;
    const bool inactive = gap < -1e-9 * (1.0 + std::abs(ps) + std::abs(pb));
    if (inactive) {
        r.multiplier = 0.0;
        r.stationarity_seller = lambda;
        r.stationarity_buyer = 1.0 - lambda;
    } else {
        const double a = curves.seller.derivative(s.eps_seller);
        const double b = curves.buyer.derivative(s.eps_buyer);
        double mu = (-lambda * a + (1.0 - lambda) * b) / (a * a + b * b);
        if (!std::isfinite(mu)) mu = 0.0;
        r.multiplier = std::max(0.0, mu);
        r.stationarity_seller = lambda + r.multiplier * a;
        r.stationarity_buyer = (1.0 - lambda) - r.multiplier * b;
    }
    auto violation = [](double eps, double st) { return eps > 0.0 ? std::abs(st) : std::max(0.0, -st); };
    r.complementarity = s.eps_seller * r.stationarity_seller + s.eps_buyer * r.stationarity_buyer +
                        r.multiplier * gap;
    r.infeasibility = std::max(0.0, gap);
    r.max_violation = std::max({violation(s.eps_seller, r.stationarity_seller),
                                violation(s.eps_buyer, r.stationarity_buyer), std::abs(r.complementarity),
                                r.infeasibility});
    return r;
}

/// Total risk g(P) = lambda * P_S^{-1}(P) + (1 - lambda) * P_B^{-1}(P) along
/// the set of allocations where seller and buyer quote the same price.
struct SharingFrontier {
    double lower;
    double upper;
    std::function<double(double)> total_risk;
};

inline SharingFrontier sharing_frontier(const PriceCurvePair& curves, double lambda) {
    const double ps0 = curves.seller(0.0);
    const double pb0 = curves.buyer(0.0);
    const double lo = std::max(pb0, curves.seller.terminal_value());
    const double hi = std::min(ps0, curves.buyer.terminal_value());
    if (!(lo <= hi)) {
        throw Error(ErrorCode::EmptyFrontier, "seller and buyer curves never quote a common price (range [" +
                                                  std::to_string(lo) + ", " + std::to_string(hi) + "])");
    }
    const PriceCurvePair* c = &curves;
    return {lo, hi, [c, lambda](double p) {
                return lambda * c->seller.inverse(p) + (1.0 - lambda) * c->buyer.inverse(p);
            }};
}

namespace detail {

inline void check_directions(const PriceCurvePair& curves) {
    if (!curves.seller.decreasing() || curves.buyer.decreasing()) {
        throw Error(ErrorCode::NonMonotoneCurve, "seller curve must decrease and buyer curve increase in risk");
    }
}

inline SharingSolution finish(const PriceCurvePair& curves, SharingSolution s, double lambda) {
    s.seller_price = curves.seller(s.eps_seller);
    s.buyer_price = curves.buyer(s.eps_buyer);
    const auto k = kkt_residuals(curves, s, lambda);
    s.multiplier = k.multiplier;
    s.kkt_residual = k.max_violation;
    return s;
}

}  // namespace detail

/// Minimises lambda*eps_S + (1-lambda)*eps_B subject to P_S(eps_S) <= P_B(eps_B).
inline SharingSolution solve_primal(const PriceCurvePair& curves, const SharingConfig& cfg) {
    cfg.validate();
    detail::check_directions(curves);
    const double ps0 = curves.seller(0.0);
    const double pb0 = curves.buyer(0.0);
    SharingSolution s;
    if (ps0 <= pb0) {
        s.slack = true;
        s.price = 0.5 * (ps0 + pb0);
        return detail::finish(curves, s, cfg.lambda);
    }
    const auto frontier = sharing_frontier(curves, cfg.lambda);
    const auto best = numerics::minimize_scalar(frontier.total_risk, frontier.lower, frontier.upper);
    s.price = best.x;
    s.eps_seller = curves.seller.inverse(best.x);
    s.eps_buyer = curves.buyer.inverse(best.x);
    s.objective = cfg.lambda * s.eps_seller + (1.0 - cfg.lambda) * s.eps_buyer;
    s = detail::finish(curves, s, cfg.lambda);
    if (std::abs(s.seller_price - s.buyer_price) > cfg.tolerance) {
        throw Error(ErrorCode::NonConvergence, "optimal allocation leaves a price gap of " +
                                                   std::to_string(s.seller_price - s.buyer_price));
    }
    return s;
}

/// Maximises P_B(eps_B) - P_S(eps_S) subject to lambda*eps_S + (1-lambda)*eps_B <= w.
/// Both prices improve with risk, so the search runs along the budget line.
inline SharingSolution solve_dual(const PriceCurvePair& curves, const SharingConfig& cfg) {
    cfg.validate();
    detail::check_directions(curves);
    if (!cfg.budget) throw Error(ErrorCode::InvalidInput, "dual problem needs a risk budget");
    const double w = *cfg.budget;
    const double lam = cfg.lambda;
    auto eps_b = [&](double t) { return (w - lam * t) / (1.0 - lam); };
    double t_hi = w / lam;
    if (std::isfinite(curves.seller.domain_max())) t_hi = std::min(t_hi, curves.seller.domain_max() * (1.0 - 1e-12));
    double t_lo = 0.0;
    if (std::isfinite(curves.buyer.domain_max())) {
        t_lo = std::max(0.0, (w - (1.0 - lam) * curves.buyer.domain_max() * (1.0 - 1e-12)) / lam);
    }
    if (!(t_lo <= t_hi)) throw Error(ErrorCode::EmptyFrontier, "risk budget exceeds both curve domains");
    auto neg_gap = [&](double t) { return curves.seller(t) - curves.buyer(eps_b(t)); };
    const auto best = numerics::minimize_scalar(neg_gap, t_lo, t_hi);
    SharingSolution s;
    s.eps_seller = best.x;
    s.eps_buyer = std::max(0.0, eps_b(best.x));
    s.objective = -best.value;
    s.seller_price = curves.seller(s.eps_seller);
    s.buyer_price = curves.buyer(s.eps_buyer);
    s.price = 0.5 * (s.seller_price + s.buyer_price);
    s.slack = s.objective > cfg.tolerance;
    return s;
}

struct SweepReport {
    std::vector<double> lambdas;
    std::vector<SharingSolution> entries;
    bool seller_risk_nonincreasing = true;
    bool buyer_risk_nondecreasing = true;
};

/// Solves the primal for every lambda on the grid; entries are computed
/// concurrently and reported in grid order.
inline SweepReport lambda_sweep(const PriceCurvePair& curves, const std::vector<double>& lambdas,
                                double monotone_tol = 1e-8) {
    SweepReport rep;
    rep.lambdas = lambdas;
    std::vector<std::future<SharingSolution>> jobs;
    jobs.reserve(lambdas.size());
    for (double lam : lambdas) {
        jobs.push_back(std::async(std::launch::async, [&curves, lam] {
            SharingConfig cfg;
            cfg.lambda = lam;
            return solve_primal(curves, cfg);
        }));
    }
    for (auto& j : jobs) rep.entries.push_back(j.get());
    std::vector<std::size_t> order(lambdas.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return lambdas[a] < lambdas[b]; });
    for (std::size_t k = 1; k < order.size(); ++k) {
        const auto& prev = rep.entries[order[k - 1]];
        const auto& cur = rep.entries[order[k]];
        if (cur.eps_seller > prev.eps_seller + monotone_tol) rep.seller_risk_nonincreasing = false;
        if (cur.eps_buyer < prev.eps_buyer - monotone_tol) rep.buyer_risk_nondecreasing = false;
    }
    return rep;
}

}  // namespace incmkt
