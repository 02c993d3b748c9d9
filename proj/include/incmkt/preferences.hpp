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

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "incmkt/curves.hpp"
#include "incmkt/error.hpp"
#include "incmkt/lp.hpp"
#include "incmkt/market.hpp"
#include "incmkt/numerics.hpp"

namespace incmkt {

enum class UtilityFamily { Exponential, Power, Log };
enum class Role { Seller, Buyer };

inline constexpr std::string_view to_string(Role r) { return r == Role::Seller ? "seller" : "buyer"; }

class UtilitySpec {
public:
    static UtilitySpec exponential(double gamma) {
        if (!(gamma > 0.0) || !std::isfinite(gamma)) throw Error(ErrorCode::InvalidInput, "gamma must be positive");
        return UtilitySpec(UtilityFamily::Exponential, gamma);
    }
    static UtilitySpec power(double eta) {
        if (!(eta > 0.0) || eta == 1.0 || !std::isfinite(eta)) {
            throw Error(ErrorCode::InvalidInput, "power utility needs eta > 0 and eta != 1");
        }
        return UtilitySpec(UtilityFamily::Power, eta);
    }
    static UtilitySpec log() { return UtilitySpec(UtilityFamily::Log, 1.0); }

    UtilityFamily family() const { return family_; }
    double parameter() const { return param_; }
    bool positive_wealth_only() const { return family_ != UtilityFamily::Exponential; }

    /// u(w); -inf outside the wealth domain.
    double value(double w) const {
        switch (family_) {
            case UtilityFamily::Exponential: return -std::exp(-param_ * w);
            case UtilityFamily::Power:
                return w > 0.0 ? std::pow(w, 1.0 - param_) / (1.0 - param_) : -numerics::kInf;
            case UtilityFamily::Log: return w > 0.0 ? std::log(w) : -numerics::kInf;
        }
        return numerics::kNaN;
    }
    double d1(double w) const {
        switch (family_) {
            case UtilityFamily::Exponential: return param_ * std::exp(-param_ * w);
            case UtilityFamily::Power: return w > 0.0 ? std::pow(w, -param_) : numerics::kInf;
            case UtilityFamily::Log: return w > 0.0 ? 1.0 / w : numerics::kInf;
        }
        return numerics::kNaN;
    }
    double d2(double w) const {
        switch (family_) {
            case UtilityFamily::Exponential: return -param_ * param_ * std::exp(-param_ * w);
            case UtilityFamily::Power: return w > 0.0 ? -param_ * std::pow(w, -param_ - 1.0) : -numerics::kInf;
            case UtilityFamily::Log: return w > 0.0 ? -1.0 / (w * w) : -numerics::kInf;
        }
        return numerics::kNaN;
    }

private:
    UtilitySpec(UtilityFamily f, double p) : family_(f), param_(p) {}
    UtilityFamily family_;
    double param_;
};

struct AgentSpec {
    UtilitySpec utility;
    double wealth;
    BeliefMeasure beliefs;
};

/// Optimal allocation. `amounts` are the money positions in the risky assets
/// 2..N; `proportions` covers all N assets and is left empty when the
/// invested wealth is zero.
struct PortfolioSolution {
    Vector proportions;
    Vector amounts;
    double expected_utility = numerics::kNaN;
    double gradient_residual = numerics::kNaN;
    int iterations = 0;
};

/// Expected utility of terminal wealth base + G theta, theta the money held
/// in each risky asset. For exponential utility the objective is evaluated
/// relative to a wealth shift so that large negative wealth levels do not
/// overflow; value() undoes the shift.
class PortfolioObjective {
public:
    PortfolioObjective(const UtilitySpec& u, Matrix gains, Vector q, Vector base)
        : u_(u), G_(std::move(gains)), q_(std::move(q)), base_(std::move(base)) {
        if (u_.family() == UtilityFamily::Exponential) shift_ = base_.minCoeff();
    }

    int dimension() const { return static_cast<int>(G_.cols()); }
    const Vector& base() const { return base_; }
    double weight(Eigen::Index i) const { return q_[i]; }
    const Matrix& gains() const { return G_; }

    Vector wealth(const Vector& theta) const {
        return G_.cols() == 0 ? base_ : Vector(base_ + G_ * theta);
    }

    /// Objective in working units (exponential family: divided by exp(-gamma*shift)).
    double scaled_value(const Vector& theta) const {
        const Vector w = wealth(theta);
        double s = 0.0;
        for (Eigen::Index i = 0; i < w.size(); ++i) {
            if (q_[i] == 0.0) continue;
            const double v = u_.value(w[i] - shift_);
            if (v == -numerics::kInf) return -numerics::kInf;
            s += q_[i] * v;
        }
        return s;
    }

    double value(const Vector& theta) const { return unscale(scaled_value(theta)); }

    double unscale(double scaled) const {
        if (u_.family() != UtilityFamily::Exponential || shift_ == 0.0) return scaled;
        if (scaled == 0.0) return 0.0;
        return scaled * std::exp(-u_.parameter() * shift_);
    }

    Vector scaled_gradient(const Vector& theta) const {
        const Vector w = wealth(theta);
        Vector weights(w.size());
        for (Eigen::Index i = 0; i < w.size(); ++i) weights[i] = q_[i] == 0.0 ? 0.0 : q_[i] * u_.d1(w[i] - shift_);
        return G_.transpose() * weights;
    }

    Vector gradient(const Vector& theta) const {
        Vector g = scaled_gradient(theta);
        if (u_.family() == UtilityFamily::Exponential) g *= std::exp(-u_.parameter() * shift_);
        return g;
    }

    Matrix scaled_hessian(const Vector& theta) const {
        const Vector w = wealth(theta);
        Vector weights(w.size());
        for (Eigen::Index i = 0; i < w.size(); ++i) weights[i] = q_[i] == 0.0 ? 0.0 : q_[i] * u_.d2(w[i] - shift_);
        return G_.transpose() * weights.asDiagonal() * G_;
    }

    /// Gradient norm relative to the marginal-utility scale of the problem.
    double relative_residual(const Vector& theta) const {
        const Vector w = wealth(theta);
        double mu = 0.0;
        for (Eigen::Index i = 0; i < w.size(); ++i) mu += q_[i] == 0.0 ? 0.0 : q_[i] * u_.d1(w[i] - shift_);
        if (G_.cols() == 0) return 0.0;
        const double gmax = std::max(1.0, G_.cwiseAbs().maxCoeff());
        return scaled_gradient(theta).cwiseAbs().maxCoeff() / (mu * gmax);
    }

private:
    UtilitySpec u_;
    Matrix G_;
    Vector q_;
    Vector base_;
    double shift_ = 0.0;
};

namespace detail {

/// Max-min wealth portfolio, used as a feasible start for power and log
/// utility. Returns theta and the attained minimum wealth.
inline std::pair<Vector, double> maxmin_wealth(const Matrix& G, const Vector& base) {
    const int K = static_cast<int>(G.rows());
    const int M = static_cast<int>(G.cols());
    // variables: theta+ (M), theta- (M), t+, t-, slack (K); rows: base + G theta - t - s = 0
    const int nv = 2 * M + 2 + K;
    Matrix A = Matrix::Zero(K, nv);
    A.leftCols(M) = G;
    A.middleCols(M, M) = -G;
    A.col(2 * M) = -Vector::Ones(K);
    A.col(2 * M + 1) = Vector::Ones(K);
    A.rightCols(K) = -Matrix::Identity(K, K);
    Vector c = Vector::Zero(nv);
    c[2 * M] = -1.0;
    c[2 * M + 1] = 1.0;
    const auto res = lp::solve_standard(A, -base, c);
    if (res.status != lp::Status::Optimal) {
        throw Error(ErrorCode::UnboundedUtility, "max-min wealth problem is unbounded; the market admits arbitrage");
    }
    Vector theta = res.x.head(M) - res.x.segment(M, M);
    return {theta, (base + G * theta).minCoeff()};
}

inline PortfolioSolution maximize(const PortfolioObjective& obj, const UtilitySpec& u) {
    const int M = obj.dimension();
    Vector theta = Vector::Zero(M);
    if (u.positive_wealth_only() && obj.base().minCoeff() <= 0.0) {
        if (M == 0) throw Error(ErrorCode::DomainError, "terminal wealth is not positive in every state");
        auto [start, minw] = maxmin_wealth(obj.gains(), obj.base());
        if (!(minw > 0.0)) {
            throw Error(ErrorCode::DomainError, "no portfolio keeps terminal wealth positive in every state");
        }
        theta = start;
    }
    PortfolioSolution sol;
    double f = obj.scaled_value(theta);
    if (!std::isfinite(f)) throw Error(ErrorCode::DomainError, "expected utility undefined at the starting portfolio");
    const double scale0 = 1.0 + obj.base().cwiseAbs().maxCoeff();
    const double eps = std::numeric_limits<double>::epsilon();
    int it = 0;
    for (; it < 200 && M > 0; ++it) {
        if (obj.relative_residual(theta) <= 1e-13) break;
        const Vector g = obj.scaled_gradient(theta);
        const Matrix H = obj.scaled_hessian(theta);
        Eigen::LDLT<Matrix> ldlt(-H);
        Vector d;
        if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 0.0).all()) {
            d = ldlt.solve(g);
        } else {
            d = g;
        }
        const double dec = g.dot(d);
        if (!(dec > 0.0) || !d.allFinite()) break;
        double alpha = 1.0;
        bool accepted = false;
        for (int ls = 0; ls < 60; ++ls) {
            const Vector cand = theta + alpha * d;
            const double fc = obj.scaled_value(cand);
            if (std::isfinite(fc) && (fc >= f + 1e-4 * alpha * dec || (alpha == 1.0 && fc >= f - 8.0 * eps * std::abs(f)))) {
                const double step = (alpha * d).cwiseAbs().maxCoeff();
                theta = cand;
                f = fc;
                accepted = true;
                if (step <= 1e-15 * (1.0 + theta.cwiseAbs().maxCoeff())) it = 1000;
                break;
            }
            alpha *= 0.5;
        }
        if (theta.cwiseAbs().maxCoeff() > 1e12 * scale0) {
            throw Error(ErrorCode::UnboundedUtility, "portfolio positions diverge; expected utility is unbounded");
        }
        if (!accepted) break;
    }
    sol.iterations = std::min(it, 200);
    sol.amounts = theta;
    sol.expected_utility = obj.unscale(f);
    sol.gradient_residual = obj.relative_residual(theta);
    if (!(sol.gradient_residual <= 1e-8)) {
        // a non-negative gain direction on the belief support means utility grows without bound
        const double tn = theta.norm();
        if (tn > 0.0) {
            const Vector dir = obj.gains() * (theta / tn);
            bool nonneg = true;
            for (Eigen::Index i = 0; i < dir.size(); ++i) {
                if (obj.weight(i) > 0.0 && dir[i] < -1e-9) nonneg = false;
            }
            if (nonneg || tn > 1e6 * scale0) {
                throw Error(ErrorCode::UnboundedUtility, "portfolio optimisation diverges along an arbitrage direction");
            }
        }
        throw Error(ErrorCode::NonConvergence,
                    "portfolio optimality residual " + std::to_string(sol.gradient_residual) + " exceeds 1e-8");
    }
    return sol;
}

inline Vector signed_liability(const ContingentClaim& claim, Role role) {
    return role == Role::Seller ? Vector(-claim.payoff) : claim.payoff;
}

}  // namespace detail

/// Maximises expected utility of W0 * sum_j (pi_j / p_j) d_j + liability over
/// proportions with sum 1. Shorting is allowed.
inline PortfolioSolution optimize_portfolio(const MarketModel& model, const AgentSpec& agent,
                                            const std::optional<Vector>& liability = std::nullopt) {
    if (agent.beliefs.size() != model.n_states()) {
        throw Error(ErrorCode::InvalidInput, "belief dimension does not match the number of states");
    }
    if (!std::isfinite(agent.wealth)) throw Error(ErrorCode::InvalidInput, "initial wealth must be finite");
    Vector base = Vector::Constant(model.n_states(), agent.wealth * model.growth());
    if (liability) {
        if (liability->size() != model.n_states()) throw Error(ErrorCode::InvalidInput, "liability dimension mismatch");
        base += *liability;
    }
    PortfolioObjective obj(agent.utility, model.excess_gains(), agent.beliefs.weights(), base);
    PortfolioSolution sol = detail::maximize(obj, agent.utility);
    if (agent.wealth != 0.0) {
        sol.proportions.resize(model.n_assets());
        sol.proportions.tail(model.n_assets() - 1) = sol.amounts / agent.wealth;
        sol.proportions[0] = 1.0 - sol.proportions.tail(model.n_assets() - 1).sum();
    }
    return sol;
}

/// Utility bookkeeping for one agent, one claim and one side of the trade.
///
/// utility_gap(P) is the expected-utility shortfall U*(W0) - U*(W0 +/- P, -/+F)
/// the agent accepts when trading at P; price_at_risk inverts it. Instances
/// are immutable after construction.
class ClaimValuation {
public:
    ClaimValuation(MarketModel model, AgentSpec agent, ContingentClaim claim, Role role,
                   std::optional<PriceBand> band = std::nullopt)
        : model_(std::move(model)), agent_(std::move(agent)), claim_(std::move(claim)), role_(role) {
        if (claim_.payoff.size() != model_.n_states()) throw Error(ErrorCode::InvalidInput, "claim dimension mismatch");
        band_ = band ? *band : price_band(model_, claim_);
        const double pad = 1.0 + claim_.spread();
        lo_ = band_.lower - pad;
        hi_ = band_.upper + pad;
        u0_ = optimize_portfolio(model_, agent_).expected_utility;
        gap_lo_ = utility_gap(lo_);
        gap_hi_ = utility_gap(hi_);
    }

    double reference_utility() const { return u0_; }
    const PriceBand& band() const { return band_; }
    PriceBand bracket() const { return {lo_, hi_}; }
    Role role() const { return role_; }

    /// Expected utility after trading the claim at `price` and investing optimally.
    double traded_utility(double price) const {
        const double w = role_ == Role::Seller ? agent_.wealth + price : agent_.wealth - price;
        AgentSpec a{agent_.utility, w, agent_.beliefs};
        try {
            return optimize_portfolio(model_, a, detail::signed_liability(claim_, role_)).expected_utility;
        } catch (const Error& e) {
            if (e.code() == ErrorCode::DomainError) return -numerics::kInf;
            throw;
        }
    }

    double utility_gap(double price) const { return u0_ - traded_utility(price); }

    /// Largest attainable risk on the price bracket (possibly infinite).
    double max_risk() const { return role_ == Role::Seller ? gap_lo_ : gap_hi_; }

    double price_at_risk(double eps) const {
        if (!(eps >= 0.0) || !std::isfinite(eps)) throw Error(ErrorCode::InvalidInput, "risk level must be finite and >= 0");
        // seller gap decreases in price, buyer gap increases
        const double sign = role_ == Role::Seller ? -1.0 : 1.0;
        auto f = [&](double p) { return sign * (utility_gap(p) - eps); };
        const double f_lo = sign * (gap_lo_ - eps);
        const double f_hi = sign * (gap_hi_ - eps);
        const double room = max_risk() - eps;
        if (!(room >= 0.0)) {
            throw Error(ErrorCode::RiskTooLarge, "risk " + std::to_string(eps) + " exceeds the attainable utility gap " +
                                                     std::to_string(max_risk()));
        }
        if (room == 0.0) return role_ == Role::Seller ? lo_ : hi_;
        const double near = (role_ == Role::Seller ? gap_hi_ : gap_lo_) - eps;
        if (near == 0.0) return role_ == Role::Seller ? hi_ : lo_;
        if (!(near < 0.0)) {
            throw Error(ErrorCode::BracketError, std::string(to_string(role_)) + " price bracket [" +
                                                     std::to_string(lo_) + ", " + std::to_string(hi_) +
                                                     "] shows no sign change of the utility gap");
        }
        const double p = numerics::brent_root(f, lo_, hi_, f_lo, f_hi);
        const double residual = std::abs(utility_gap(p) - eps);
        if (!(residual <= 1e-10 * std::max(1.0, std::abs(u0_)))) {
            throw Error(ErrorCode::NonConvergence, "indifference equation residual " + std::to_string(residual));
        }
        return p;
    }

    double indifference_price() const { return price_at_risk(0.0); }

private:
    MarketModel model_;
    AgentSpec agent_;
    ContingentClaim claim_;
    Role role_;
    PriceBand band_;
    double lo_ = 0.0, hi_ = 0.0, u0_ = 0.0, gap_lo_ = 0.0, gap_hi_ = 0.0;
};

inline double indifference_price(const MarketModel& model, const AgentSpec& agent, const ContingentClaim& claim,
                                 Role role) {
    return ClaimValuation(model, agent, claim, role).indifference_price();
}

inline double price_at_risk(const MarketModel& model, const AgentSpec& agent, const ContingentClaim& claim, Role role,
                            double eps) {
    return ClaimValuation(model, agent, claim, role).price_at_risk(eps);
}

/// Weight given to the barycentre when a boundary belief is used in a market
/// with risky assets; keeps the portfolio problem bounded.
inline constexpr double kBoundaryMix = 1e-9;

/// Indifference price as a function of the agent's beliefs, with the
/// no-arbitrage band computed once.
class BeliefPricer {
public:
    BeliefPricer(MarketModel model, AgentSpec agent, ContingentClaim claim, Role role)
        : model_(std::move(model)), agent_(std::move(agent)), claim_(std::move(claim)), role_(role),
          band_(price_band(model_, claim_)) {}

    double operator()(const Vector& q) const {
        if (q.size() != model_.n_states()) throw Error(ErrorCode::InvalidInput, "belief dimension mismatch");
        Vector w = q;
        const bool boundary = (q.array() <= 0.0).any();
        if (boundary && model_.n_assets() > 1) {
            w = (1.0 - kBoundaryMix) * q + Vector::Constant(q.size(), kBoundaryMix / q.size());
        }
        w /= w.sum();
        AgentSpec a{agent_.utility, agent_.wealth, BeliefMeasure::closed(w)};
        return ClaimValuation(model_, a, claim_, role_, band_).indifference_price();
    }

    Role role() const { return role_; }
    const PriceBand& band() const { return band_; }
    int n_states() const { return model_.n_states(); }

private:
    MarketModel model_;
    AgentSpec agent_;
    ContingentClaim claim_;
    Role role_;
    PriceBand band_;
};

inline double price_at_belief(const MarketModel& model, const AgentSpec& agent, const ContingentClaim& claim,
                              Role role, const Vector& q) {
    return BeliefPricer(model, agent, claim, role)(q);
}

struct PriceExtremes {
    double min_price = numerics::kNaN;
    double max_price = numerics::kNaN;
    Vector argmin;
    Vector argmax;
    double grid_min = numerics::kNaN;
    double grid_max = numerics::kNaN;
    bool certified = false;
};

namespace detail {

/// Projected-gradient descent of f over the closed simplex from x0.
template <class F>
std::pair<Vector, double> simplex_descent(F&& f, Vector x, int max_iter = 80) {
    const int K = static_cast<int>(x.size());
    double fx = f(x);
    double t = 0.5;
    const double h = 1e-6;
    for (int it = 0; it < max_iter; ++it) {
        Vector v(K);
        for (int i = 0; i < K; ++i) {
            Vector xi = (1.0 - h) * x;
            xi[i] += h;
            v[i] = (f(xi) - fx) / h;
        }
        const double vmax = v.cwiseAbs().maxCoeff();
        if (!(vmax > 0.0)) break;
        t = std::max(t, 1e-12);
        bool moved = false;
        double change = 0.0;
        for (int ls = 0; ls < 40; ++ls) {
            const Vector cand = numerics::project_simplex(x - (t / vmax) * v);
            const double fc = f(cand);
            const double pred = v.dot(cand - x);
            change = (cand - x).cwiseAbs().maxCoeff();
            if (change == 0.0) break;
            if (fc <= fx + 1e-4 * pred) {
                x = cand;
                fx = fc;
                moved = true;
                break;
            }
            t *= 0.5;
        }
        if (!moved || change < 1e-10) break;
        t *= 2.0;
    }
    return {x, fx};
}

}  // namespace detail

/// Minimum and maximum of the belief-dependent indifference price over the
/// closed simplex, by multi-start projected gradient; the result is compared
/// with a 0.05 simplex grid when the grid has at most 20000 points.
inline PriceExtremes price_extremes(const BeliefPricer& price, std::uint64_t seed = 20260101) {
    const int K = price.n_states();
    std::vector<Vector> starts;
    for (int i = 0; i < K; ++i) starts.push_back(Vector::Unit(K, i));
    starts.push_back(Vector::Constant(K, 1.0 / K));
    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> expo(1.0);
    for (int s = 0; s < 32; ++s) {
        Vector v(K);
        for (int i = 0; i < K; ++i) v[i] = expo(rng);
        starts.push_back(v / v.sum());
    }
    PriceExtremes out;
    out.min_price = numerics::kInf;
    out.max_price = -numerics::kInf;
    for (const auto& x0 : starts) {
        auto [xmin, fmin] = detail::simplex_descent(price, x0);
        if (fmin < out.min_price) { out.min_price = fmin; out.argmin = xmin; }
        auto neg = [&](const Vector& q) { return -price(q); };
        auto [xmax, fneg] = detail::simplex_descent(neg, x0);
        if (-fneg > out.max_price) { out.max_price = -fneg; out.argmax = xmax; }
    }
    if (numerics::simplex_grid_size(K, 20) <= 20000) {
        out.grid_min = numerics::kInf;
        out.grid_max = -numerics::kInf;
        Vector gmin, gmax;
        for (const auto& q : numerics::simplex_grid(K, 20)) {
            const double p = price(q);
            if (p < out.grid_min) { out.grid_min = p; gmin = q; }
            if (p > out.grid_max) { out.grid_max = p; gmax = q; }
        }
        out.certified = out.min_price <= out.grid_min + 1e-4 && out.max_price >= out.grid_max - 1e-4;
        if (out.grid_min < out.min_price) { out.min_price = out.grid_min; out.argmin = gmin; }
        if (out.grid_max > out.max_price) { out.max_price = out.grid_max; out.argmax = gmax; }
    }
    return out;
}

inline PriceExtremes price_extremes(const MarketModel& model, const AgentSpec& agent, const ContingentClaim& claim,
                                    Role role, std::uint64_t seed = 20260101) {
    return price_extremes(BeliefPricer(model, agent, claim, role), seed);
}

/// Price-at-risk curves for a seller and a buyer agent. Evaluations solve the
/// indifference equation with the risk offset; derivatives are central
/// differences and must carry the expected sign.
inline PriceCurvePair derived_curves(const MarketModel& model, const AgentSpec& seller, const AgentSpec& buyer,
                                     const ContingentClaim& claim) {
    auto make = [&](const AgentSpec& agent, Role role) {
        auto val = std::make_shared<const ClaimValuation>(model, agent, claim, role);
        const double eps_max = val->max_risk();
        const double dom = std::isfinite(eps_max) ? eps_max : numerics::kInf;
        auto value = [val](double e) { return val->price_at_risk(e); };
        PriceCurve::Parts parts;
        parts.value = value;
        parts.derivative = [val, value, dom, role](double e) {
            const double h = std::max(1e-6, 1e-6 * std::abs(e));
            double d;
            if (e - h >= 0.0 && e + h < dom) {
                d = (value(e + h) - value(e - h)) / (2.0 * h);
            } else if (e - h < 0.0) {
                d = (-3.0 * value(e) + 4.0 * value(e + h) - value(e + 2.0 * h)) / (2.0 * h);
            } else {
                d = (3.0 * value(e) - 4.0 * value(e - h) + value(e - 2.0 * h)) / (2.0 * h);
            }
            if ((role == Role::Seller && !(d < 0.0)) || (role == Role::Buyer && !(d > 0.0))) {
                throw Error(ErrorCode::NonMonotoneCurve, std::string(to_string(role)) + " price derivative " +
                                                             std::to_string(d) + " has the wrong sign at eps " +
                                                             std::to_string(e));
            }
            return d;
        };
        parts.inverse = [val](double p) {
            const double g = val->utility_gap(p);
            if (g < 0.0) {
                if (g >= -1e-9 * std::max(1.0, std::abs(val->reference_utility()))) return 0.0;
                throw Error(ErrorCode::OutOfRange, "price " + std::to_string(p) + " needs negative risk");
            }
            return g;
        };
        parts.domain_max = dom;
        return PriceCurve(std::move(parts), role == Role::Seller ? Monotonicity::Decreasing : Monotonicity::Increasing);
    };
    return make_curve_pair(make(seller, Role::Seller), make(buyer, Role::Buyer), Provenance::PreferenceDerived);
}

}  // namespace incmkt
