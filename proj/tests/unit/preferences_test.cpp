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

#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "incmkt/preferences.hpp"

namespace incmkt {
namespace {

MarketModel riskless_market(int K, double r = 0.0) {
    MarketModel m;
    m.riskless_rate = r;
    m.prices = Vector::Constant(1, 1.0 / (1.0 + r));
    m.payoffs = Matrix::Ones(K, 1);
    return m;
}

MarketModel three_state_market() {
    MarketModel m;
    m.riskless_rate = 0.0;
    m.prices = Vector::Ones(2);
    m.payoffs.resize(3, 2);
    m.payoffs << 1, 2, 1, 1, 1, 0;
    return m;
}

MarketModel random_market(std::mt19937_64& rng, int K, int N) {
    std::uniform_real_distribution<double> u(0.2, 2.0);
    std::uniform_real_distribution<double> rate(-0.05, 0.1);
    MarketModel m;
    m.riskless_rate = rate(rng);
    m.payoffs.resize(K, N);
    for (int i = 0; i < K; ++i) {
        m.payoffs(i, 0) = 1.0;
        for (int j = 1; j < N; ++j) m.payoffs(i, j) = u(rng);
    }
    Vector q(K);
    for (int i = 0; i < K; ++i) q[i] = u(rng);
    q /= q.sum();
    m.prices = m.payoffs.transpose() * q / m.growth();
    m.prices[0] = 1.0 / m.growth();
    return m;
}

Vector random_belief(std::mt19937_64& rng, int K) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    Vector q(K);
    for (int i = 0; i < K; ++i) q[i] = u(rng);
    return q / q.sum();
}

BeliefMeasure belief(std::initializer_list<double> w) {
    Vector v(static_cast<Eigen::Index>(w.size()));
    Eigen::Index i = 0;
    for (double x : w) v[i++] = x;
    return BeliefMeasure::interior(v);
}

// Closed-form exponential-utility prices in a market with only the riskless asset.
double cara_seller(const Vector& q, const Vector& f, double gamma, double r, double w0, double eps) {
    const double m = (q.array() * (gamma * f.array()).exp()).sum();
    return (std::log(m) - std::log1p(eps * std::exp(gamma * w0 * (1 + r)))) / (gamma * (1 + r));
}

double cara_buyer(const Vector& q, const Vector& f, double gamma, double r, double w0, double eps) {
    const double m = (q.array() * (-gamma * f.array()).exp()).sum();
    return (std::log1p(eps * std::exp(gamma * w0 * (1 + r))) - std::log(m)) / (gamma * (1 + r));
}

TEST(Utility, DerivativesHaveRequiredSigns) {
    for (const auto& u : {UtilitySpec::exponential(2.0), UtilitySpec::power(0.5), UtilitySpec::power(3.0),
                          UtilitySpec::log()}) {
        for (double w : {0.1, 1.0, 5.0}) {
            EXPECT_GT(u.d1(w), 0.0);
            EXPECT_LT(u.d2(w), 0.0);
            const double h = 1e-6;
            EXPECT_NEAR(u.d1(w), (u.value(w + h) - u.value(w - h)) / (2 * h), 1e-5 * (1 + u.d1(w)));
        }
    }
    EXPECT_EQ(UtilitySpec::log().value(-1.0), -std::numeric_limits<double>::infinity());
    EXPECT_THROW(UtilitySpec::power(1.0), Error);
    EXPECT_THROW(UtilitySpec::exponential(0.0), Error);
}

TEST(Portfolio, RiskNeutralBeliefsHoldOnlyRiskless) {
    AgentSpec a{UtilitySpec::exponential(1.0), 2.0, belief({0.25, 0.5, 0.25})};
    const auto sol = optimize_portfolio(three_state_market(), a);
    EXPECT_NEAR(sol.proportions[0], 1.0, 1e-10);
    EXPECT_NEAR(sol.proportions[1], 0.0, 1e-10);
    EXPECT_NEAR(sol.proportions.sum(), 1.0, 1e-12);
}

TEST(Portfolio, RisklessOnlyMarket) {
    AgentSpec a{UtilitySpec::log(), 3.0, belief({0.5, 0.5})};
    const auto sol = optimize_portfolio(riskless_market(2, 0.1), a);
    ASSERT_EQ(sol.proportions.size(), 1);
    EXPECT_DOUBLE_EQ(sol.proportions[0], 1.0);
    EXPECT_NEAR(sol.expected_utility, std::log(3.0 * 1.1), 1e-15);
}

TEST(Portfolio, MatchesGridOracleForExponentialUtility) {
    const auto m = three_state_market();
    AgentSpec a{UtilitySpec::exponential(1.0), 1.0, belief({0.5, 0.25, 0.25})};
    const auto sol = optimize_portfolio(m, a);
    // brute force over pi_2, then shrink the window around the best point
    auto eu = [&](double pi2) {
        double s = 0.0;
        for (int i = 0; i < 3; ++i) {
            const double w = 1.0 * ((1 - pi2) * m.payoffs(i, 0) + pi2 * m.payoffs(i, 1));
            s += a.beliefs[i] * -std::exp(-w);
        }
        return s;
    };
    double lo = -5.0, hi = 5.0, best = 0.0;
    for (int round = 0; round < 8; ++round) {
        double best_v = -1e300;
        const int n = 2000;
        for (int k = 0; k <= n; ++k) {
            const double x = lo + (hi - lo) * k / n;
            if (eu(x) > best_v) { best_v = eu(x); best = x; }
        }
        const double cell = (hi - lo) / n;
        lo = best - 2 * cell;
        hi = best + 2 * cell;
    }
    EXPECT_NEAR(sol.proportions[1], best, 1e-6);
    EXPECT_NEAR(sol.proportions[1], 0.5 * std::log(2.0), 1e-9);
    EXPECT_LE(sol.gradient_residual, 1e-8);
}

TEST(Portfolio, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_market(rng, 5, 3);
        const UtilitySpec u = trial % 2 ? UtilitySpec::exponential(1.5) : UtilitySpec::power(2.0);
        PortfolioObjective obj(u, m.excess_gains(), random_belief(rng, 5), Vector::Constant(5, 4.0));
        Vector theta(2);
        theta << 0.3 * n01(rng), 0.3 * n01(rng);
        const Vector g = obj.gradient(theta);
        for (int j = 0; j < 2; ++j) {
            const double h = 1e-6;
            Vector tp = theta, tm = theta;
            tp[j] += h;
            tm[j] -= h;
            const double fd = (obj.value(tp) - obj.value(tm)) / (2 * h);
            EXPECT_NEAR(g[j], fd, 1e-5 * std::max(1.0, std::abs(fd)));
        }
    }
}

TEST(Portfolio, DomainErrorWhenWealthCannotStayPositive) {
    AgentSpec a{UtilitySpec::log(), -1.0, belief({0.5, 0.5})};
    try {
        optimize_portfolio(riskless_market(2), a);
        FAIL() << "expected DomainError";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DomainError);
    }
}

TEST(Portfolio, UnboundedUnderArbitrage) {
    MarketModel m;
    m.riskless_rate = 0.0;
    m.prices = Vector::Ones(2);
    m.payoffs.resize(3, 2);
    m.payoffs << 1, 2, 1, 1.5, 1, 1.2;
    AgentSpec a{UtilitySpec::exponential(1.0), 1.0, belief({0.3, 0.3, 0.4})};
    try {
        optimize_portfolio(m, a);
        FAIL() << "expected UnboundedUtility";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnboundedUtility);
    }
}

TEST(IndifferencePrice, ClosedFormCaraExample) {
    const auto m = riskless_market(2);
    AgentSpec a{UtilitySpec::exponential(1.0), 0.0, belief({0.5, 0.5})};
    const ContingentClaim f(Vector::Unit(2, 0));
    const double e = std::exp(1.0);
    EXPECT_NEAR(indifference_price(m, a, f, Role::Seller), std::log((e + 1) / 2), 1e-12);
    EXPECT_NEAR(indifference_price(m, a, f, Role::Buyer), std::log(2 * e / (1 + e)), 1e-12);
    EXPECT_NEAR(indifference_price(m, a, f, Role::Seller), 0.620115, 1e-6);
    EXPECT_NEAR(indifference_price(m, a, f, Role::Buyer), 0.379885, 1e-6);
}

TEST(IndifferencePrice, RandomCaraRisklessInstances) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> g(0.2, 3.0), fd(-2.0, 2.0), wd(-3.0, 3.0), rd(0.0, 0.1);
    for (int trial = 0; trial < 30; ++trial) {
        const int K = 2 + trial % 4;
        const double r = rd(rng), gamma = g(rng), w0 = wd(rng);
        const auto m = riskless_market(K, r);
        const Vector q = random_belief(rng, K);
        Vector f(K);
        for (int i = 0; i < K; ++i) f[i] = fd(rng);
        AgentSpec a{UtilitySpec::exponential(gamma), w0, BeliefMeasure::interior(q)};
        EXPECT_NEAR(indifference_price(m, a, ContingentClaim(f), Role::Seller), cara_seller(q, f, gamma, r, w0, 0), 1e-8);
        EXPECT_NEAR(indifference_price(m, a, ContingentClaim(f), Role::Buyer), cara_buyer(q, f, gamma, r, w0, 0), 1e-8);
    }
}

TEST(IndifferencePrice, LogUtilityMatchesBisectionOracle) {
    const auto m = riskless_market(3, 0.05);
    const Vector q = (Vector(3) << 0.2, 0.5, 0.3).finished();
    const Vector f = (Vector(3) << 1.0, 0.4, -0.3).finished();
    const double w0 = 2.0;
    AgentSpec a{UtilitySpec::log(), w0, BeliefMeasure::interior(q)};
    const double u0 = std::log(w0 * 1.05);
    auto seller_eq = [&](double p) {
        double s = 0;
        for (int i = 0; i < 3; ++i) s += q[i] * std::log((w0 + p) * 1.05 - f[i]);
        return s - u0;
    };
    double lo = 0.0, hi = 2.0;
    for (int k = 0; k < 200; ++k) {
        const double mid = 0.5 * (lo + hi);
        (seller_eq(mid) > 0 ? hi : lo) = mid;
    }
    EXPECT_NEAR(indifference_price(m, a, ContingentClaim(f), Role::Seller), lo, 1e-10);
}

TEST(IndifferencePrice, ConstantAndReplicableClaims) {
    const auto m = three_state_market();
    for (const auto& u : {UtilitySpec::exponential(1.3), UtilitySpec::power(2.5), UtilitySpec::log()}) {
        AgentSpec a{u, 3.0, belief({0.5, 0.2, 0.3})};
        for (Role role : {Role::Seller, Role::Buyer}) {
            EXPECT_NEAR(indifference_price(m, a, ContingentClaim(Vector::Constant(3, 0.7)), role), 0.7, 1e-9);
            EXPECT_NEAR(indifference_price(m, a, ContingentClaim(m.payoffs.col(1)), role), 1.0, 1e-6);
        }
    }
}

TEST(IndifferencePrice, InsideBandOnRandomMarkets) {
    std::mt19937_64 rng(23);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 30; ++trial) {
        const int K = 3 + trial % 3;
        const auto m = random_market(rng, K, 2 + trial % (K - 2));
        Vector f(K);
        for (int i = 0; i < K; ++i) f[i] = n01(rng);
        const ContingentClaim claim(f);
        const auto band = price_band(m, claim);
        const UtilitySpec u = trial % 3 == 0 ? UtilitySpec::power(2.0)
                              : trial % 3 == 1 ? UtilitySpec::log() : UtilitySpec::exponential(0.8);
        AgentSpec a{u, 6.0, BeliefMeasure::interior(random_belief(rng, K))};
        for (Role role : {Role::Seller, Role::Buyer}) {
            const double p = indifference_price(m, a, claim, role);
            EXPECT_TRUE(band.contains(p, 1e-6)) << p << " not in [" << band.lower << ", " << band.upper << "]";
        }
    }
}

TEST(IndifferencePrice, CaraWealthInvariance) {
    std::mt19937_64 rng(29);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 10; ++trial) {
        const auto m = random_market(rng, 4, 2);
        Vector f(4);
        for (int i = 0; i < 4; ++i) f[i] = n01(rng);
        const Vector q = random_belief(rng, 4);
        for (Role role : {Role::Seller, Role::Buyer}) {
            AgentSpec a{UtilitySpec::exponential(1.2), 0.5, BeliefMeasure::interior(q)};
            const double p0 = indifference_price(m, a, ContingentClaim(f), role);
            for (double shift : {-10.0, 10.0}) {
                a.wealth = 0.5 + shift;
                EXPECT_NEAR(indifference_price(m, a, ContingentClaim(f), role), p0, 1e-7);
            }
        }
    }
}

TEST(PriceAtRisk, ZeroRiskIsIndifferencePrice) {
    const auto m = three_state_market();
    AgentSpec a{UtilitySpec::power(2.0), 2.0, belief({0.4, 0.3, 0.3})};
    const ContingentClaim f((Vector(3) << 1.0, 0.0, 0.5).finished());
    for (Role role : {Role::Seller, Role::Buyer}) {
        EXPECT_NEAR(price_at_risk(m, a, f, role, 0.0), indifference_price(m, a, f, role), 1e-9);
    }
}

TEST(PriceAtRisk, ClosedFormCaraSeller) {
    const auto m = riskless_market(2);
    AgentSpec a{UtilitySpec::exponential(1.0), 0.0, belief({0.5, 0.5})};
    const ContingentClaim f(Vector::Unit(2, 0));
    const double e = std::exp(1.0);
    EXPECT_NEAR(price_at_risk(m, a, f, Role::Seller, 0.5), std::log((e + 1) / 2) - std::log(1.5), 1e-10);
    for (double eps : {0.05, 0.2, 0.7}) {
        const Vector q = a.beliefs.weights();
        EXPECT_NEAR(price_at_risk(m, a, f, Role::Seller, eps), cara_seller(q, f.payoff, 1.0, 0.0, 0.0, eps), 1e-10);
        EXPECT_NEAR(price_at_risk(m, a, f, Role::Buyer, eps), cara_buyer(q, f.payoff, 1.0, 0.0, 0.0, eps), 1e-10);
    }
}

TEST(PriceAtRisk, RiskTooLarge) {
    const auto m = riskless_market(2);
    AgentSpec a{UtilitySpec::exponential(1.0), 0.0, belief({0.5, 0.5})};
    const ClaimValuation v(m, a, ContingentClaim(Vector::Unit(2, 0)), Role::Seller);
    ASSERT_TRUE(std::isfinite(v.max_risk()));
    try {
        v.price_at_risk(v.max_risk() * 1.5 + 1.0);
        FAIL() << "expected RiskTooLarge";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::RiskTooLarge);
    }
}

TEST(PriceAtRisk, MonotoneAndQuasiShapeOnGrid) {
    const auto m = three_state_market();
    AgentSpec s{UtilitySpec::exponential(1.0), 1.0, belief({0.5, 0.3, 0.2})};
    AgentSpec b{UtilitySpec::power(3.0), 2.0, belief({0.2, 0.3, 0.5})};
    const auto pair = derived_curves(m, s, b, ContingentClaim((Vector(3) << 1.0, 0.0, 0.2).finished()));
    const double top = std::min({0.5, 0.9 * pair.seller.domain_max(), 0.9 * pair.buyer.domain_max()});
    std::vector<double> ps, pb;
    for (int k = 0; k < 20; ++k) {
        const double eps = top * k / 19.0;
        ps.push_back(pair.seller(eps));
        pb.push_back(pair.buyer(eps));
        EXPECT_LE(pair.seller.derivative(eps), -1e-12);
        EXPECT_GE(pair.buyer.derivative(eps), 1e-12);
    }
    for (int i = 0; i < 20; ++i) {
        for (int j = i + 1; j < 20; ++j) {
            EXPECT_LT(ps[j], ps[i]);
            EXPECT_GT(pb[j], pb[i]);
            for (int k = i + 1; k < j; ++k) {
                EXPECT_GE(ps[k], std::min(ps[i], ps[j]) - 1e-10);
                EXPECT_LE(pb[k], std::max(pb[i], pb[j]) + 1e-10);
            }
        }
    }
}

TEST(DerivedCurves, AnchoredAtIndifferencePrices) {
    const auto m = three_state_market();
    AgentSpec s{UtilitySpec::log(), 2.0, belief({0.5, 0.3, 0.2})};
    AgentSpec b{UtilitySpec::exponential(0.5), 0.0, belief({0.3, 0.3, 0.4})};
    const ContingentClaim f(Vector::Unit(3, 0));
    const auto pair = derived_curves(m, s, b, f);
    EXPECT_EQ(pair.provenance, Provenance::PreferenceDerived);
    EXPECT_NEAR(pair.seller(0.0), indifference_price(m, s, f, Role::Seller), 1e-12);
    EXPECT_NEAR(pair.buyer(0.0), indifference_price(m, b, f, Role::Buyer), 1e-12);
    const double p = pair.seller(0.1);
    EXPECT_NEAR(pair.seller.inverse(p), 0.1, 1e-9);
}

TEST(SyntheticCurves, SqrtPairRoundTrips) {
    const auto pair = make_curve_pair(sqrt_curve(1.0, -1.0), sqrt_curve(0.0, 1.0));
    for (double e : {0.01, 0.25, 0.64, 2.0}) {
        EXPECT_NEAR(pair.seller(e), 1.0 - std::sqrt(e), 1e-15);
        EXPECT_NEAR(pair.buyer(e), std::sqrt(e), 1e-15);
        EXPECT_NEAR(pair.seller.derivative(e), -0.5 / std::sqrt(e), 1e-8);
        EXPECT_NEAR(pair.buyer.inverse(pair.buyer(e)), e, 1e-12);
    }
    EXPECT_THROW(make_curve_pair(sqrt_curve(0.0, 1.0), sqrt_curve(0.0, 1.0)), Error);
}

TEST(SyntheticCurves, TableCurveInterpolates) {
    const auto c = table_curve({{0.0, 1.0}, {1.0, 0.5}, {3.0, 0.0}});
    EXPECT_TRUE(c.decreasing());
    EXPECT_DOUBLE_EQ(c(0.5), 0.75);
    EXPECT_DOUBLE_EQ(c(2.0), 0.25);
    EXPECT_DOUBLE_EQ(c.derivative(2.0), -0.25);
    EXPECT_DOUBLE_EQ(c.inverse(0.25), 2.0);
    EXPECT_THROW(table_curve({{0.0, 1.0}, {1.0, 1.0}}), Error);
}

TEST(PriceAtBelief, ClosedFormBuyerAndPointMass) {
    const auto m = riskless_market(2);
    AgentSpec a{UtilitySpec::exponential(1.0), 0.0, belief({0.5, 0.5})};
    const ContingentClaim f(Vector::Unit(2, 0));
    const Vector q = (Vector(2) << 0.9, 0.1).finished();
    EXPECT_NEAR(price_at_belief(m, a, f, Role::Buyer, q), -std::log(0.9 * std::exp(-1.0) + 0.1), 1e-10);
    EXPECT_NEAR(price_at_belief(m, a, f, Role::Buyer, a.beliefs.weights()), indifference_price(m, a, f, Role::Buyer),
                1e-14);
    EXPECT_NEAR(price_at_belief(m, a, f, Role::Seller, Vector::Unit(2, 0)), 1.0, 1e-10);
    EXPECT_NEAR(price_at_belief(m, a, f, Role::Seller, Vector::Unit(2, 1)), 0.0, 1e-10);
}

TEST(PriceExtremes, RisklessCaraDigital) {
    const auto m = riskless_market(2);
    AgentSpec a{UtilitySpec::exponential(1.0), 0.0, belief({0.5, 0.5})};
    const auto ex = price_extremes(m, a, ContingentClaim(Vector::Unit(2, 0)), Role::Buyer);
    EXPECT_NEAR(ex.min_price, 0.0, 1e-9);
    EXPECT_NEAR(ex.max_price, 1.0, 1e-9);
    EXPECT_TRUE(ex.certified);
    EXPECT_NEAR(ex.argmax[0], 1.0, 1e-9);
}

TEST(PriceExtremes, ConstantClaim) {
    const auto m = three_state_market();
    AgentSpec a{UtilitySpec::exponential(1.0), 0.0, belief({0.3, 0.3, 0.4})};
    const auto ex = price_extremes(m, a, ContingentClaim(Vector::Constant(3, 0.4)), Role::Seller);
    EXPECT_NEAR(ex.min_price, 0.4, 1e-9);
    EXPECT_NEAR(ex.max_price, 0.4, 1e-9);
}

TEST(PriceExtremes, AgreesWithGridOnRandomInstances) {
    std::mt19937_64 rng(31);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 3; ++trial) {
        const auto m = riskless_market(3, 0.02);
        Vector f(3);
        for (int i = 0; i < 3; ++i) f[i] = n01(rng);
        AgentSpec a{UtilitySpec::exponential(0.5 + trial), 0.0, BeliefMeasure::interior(random_belief(rng, 3))};
        const auto ex = price_extremes(m, a, ContingentClaim(f), trial % 2 ? Role::Seller : Role::Buyer);
        EXPECT_TRUE(ex.certified);
        EXPECT_LE(std::abs(ex.min_price - ex.grid_min), 1e-4 + std::abs(ex.grid_min - ex.min_price));
        EXPECT_LE(ex.min_price, ex.grid_min + 1e-4);
        EXPECT_GE(ex.max_price, ex.grid_max - 1e-4);
    }
}

}  // namespace
}  // namespace incmkt
