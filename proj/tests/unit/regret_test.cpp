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

#include "incmkt/regret.hpp"

namespace incmkt {
namespace {

MarketModel riskless_market(int K) {
    MarketModel m;
    m.riskless_rate = 0.0;
    m.prices = Vector::Ones(1);
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

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out[i++] = x;
    return out;
}

AgentSpec cara_agent(int K) {
    return AgentSpec{UtilitySpec::exponential(1.0), 0.0, BeliefMeasure::interior(Vector::Constant(K, 1.0 / K))};
}

// closed-form exponential-utility prices of F = (1, 0) with riskless asset only
double seller_price(double q1) { return std::log(q1 * std::exp(1.0) + (1 - q1)); }
double buyer_price(double q1) { return -std::log(q1 * std::exp(-1.0) + (1 - q1)); }

RegretConfig two_state_config(double lam) {
    RegretConfig cfg;
    cfg.lambda = lam;
    cfg.seller_anchor = vec({0.8, 0.2});
    cfg.buyer_anchor = vec({0.3, 0.7});
    return cfg;
}

double two_state_grid_oracle(double lam, double mesh) {
    const int n = static_cast<int>(std::lround(1.0 / mesh));
    double best = 1e300;
    for (int i = 0; i <= n; ++i) {
        const double s = i * mesh;
        for (int j = 0; j <= n; ++j) {
            const double b = j * mesh;
            if (seller_price(s) > buyer_price(b)) continue;
            const double ds = 2 * (s - 0.8) * (s - 0.8), db = 2 * (b - 0.3) * (b - 0.3);
            best = std::min(best, lam * ds + (1 - lam) * db);
        }
    }
    return best;
}

TEST(BeliefPrimal, AnchorsAlreadyCompatible) {
    const auto m = riskless_market(2);
    const BeliefPricePair prices(m, cara_agent(2), cara_agent(2), ContingentClaim(vec({1.0, 0.0})));
    RegretConfig cfg;
    cfg.seller_anchor = vec({0.3, 0.7});
    cfg.buyer_anchor = vec({0.8, 0.2});
    const auto s = solve_belief_primal(prices, cfg);
    EXPECT_EQ(s.total_regret, 0.0);
    EXPECT_EQ(s.seller_beliefs, cfg.seller_anchor);
    EXPECT_EQ(s.buyer_beliefs, cfg.buyer_anchor);
}

TEST(BeliefPrimal, TwoStateMatchesGridOracle) {
    const auto m = riskless_market(2);
    const BeliefPricePair prices(m, cara_agent(2), cara_agent(2), ContingentClaim(vec({1.0, 0.0})));
    const auto s = solve_belief_primal(prices, two_state_config(0.5));
    EXPECT_NEAR(s.total_regret, two_state_grid_oracle(0.5, 0.005), 5e-3);
    EXPECT_LE(s.total_regret, two_state_grid_oracle(0.5, 0.005) + 1e-9);
    EXPECT_LE(s.seller_price, s.buyer_price + 1e-6);
    EXPECT_NEAR(s.seller_price, seller_price(s.seller_beliefs[0]), 1e-9);
    EXPECT_TRUE(s.certified);
}

TEST(BeliefPrimal, DegenerateWeights) {
    const auto m = riskless_market(2);
    const BeliefPricePair prices(m, cara_agent(2), cara_agent(2), ContingentClaim(vec({1.0, 0.0})));
    for (double lam : {0.0, 1.0}) {
        const auto s = solve_belief_primal(prices, two_state_config(lam));
        EXPECT_NEAR(s.total_regret, two_state_grid_oracle(lam, 0.005), 5e-3) << "lambda " << lam;
        EXPECT_LE(s.seller_price, s.buyer_price + 1e-6);
    }
}

TEST(BeliefPrimal, ThreeStateMarketFeasibleAndCertified) {
    const auto m = three_state_market();
    const BeliefPricePair prices(m, cara_agent(3), cara_agent(3), ContingentClaim(vec({1.0, 0.0, 0.3})));
    RegretConfig cfg;
    cfg.seller_anchor = vec({0.6, 0.2, 0.2});
    cfg.buyer_anchor = vec({0.2, 0.3, 0.5});
    ASSERT_GT(prices.seller(cfg.seller_anchor), prices.buyer(cfg.buyer_anchor));
    const auto s = solve_belief_primal(prices, cfg);
    EXPECT_LE(s.seller_price, s.buyer_price + 1e-6);
    ASSERT_TRUE(s.grid_objective);
    EXPECT_LE(s.total_regret, *s.grid_objective + 1e-9);
    EXPECT_TRUE(s.certified);
}

TEST(BeliefPrimal, KlDistance) {
    const auto m = riskless_market(2);
    const BeliefPricePair prices(m, cara_agent(2), cara_agent(2), ContingentClaim(vec({1.0, 0.0})));
    auto cfg = two_state_config(0.5);
    cfg.distance = Distance::KullbackLeibler;
    const auto s = solve_belief_primal(prices, cfg);
    EXPECT_LE(s.seller_price, s.buyer_price + 1e-6);
    // grid oracle on the KL objective
    double best = 1e300;
    for (int i = 1; i < 1000; ++i) {
        for (int j = 1; j < 1000; ++j) {
            const double a = i / 1000.0, b = j / 1000.0;
            if (seller_price(a) > buyer_price(b)) continue;
            const double ds = a * std::log(a / 0.8) + (1 - a) * std::log((1 - a) / 0.2);
            const double db = b * std::log(b / 0.3) + (1 - b) * std::log((1 - b) / 0.7);
            best = std::min(best, 0.5 * ds + 0.5 * db);
        }
    }
    EXPECT_NEAR(s.total_regret, best, 5e-3);
}

TEST(BeliefDual, BudgetCases) {
    const auto m = riskless_market(2);
    const BeliefPricePair prices(m, cara_agent(2), cara_agent(2), ContingentClaim(vec({1.0, 0.0})));
    const auto primal = solve_belief_primal(prices, two_state_config(0.5));

    auto cfg = two_state_config(0.5);
    cfg.budget = primal.total_regret;
    EXPECT_NEAR(solve_belief_dual(prices, cfg).price_gap, 0.0, 1e-3);

    cfg.budget = 0.0;
    const auto zero = solve_belief_dual(prices, cfg);
    EXPECT_EQ(zero.seller_beliefs, cfg.seller_anchor);
    EXPECT_NEAR(zero.price_gap, buyer_price(0.3) - seller_price(0.8), 1e-10);

    cfg.budget = 2.0;
    EXPECT_NEAR(solve_belief_dual(prices, cfg).price_gap, 1.0, 1e-6);
}

TEST(PriceRegret, QuadraticExample) {
    PriceRegretConfig cfg{0.2, 0.6, 0.3, 0.7, {}, {}, 0.5};
    const auto s = solve_price_regret(cfg);
    EXPECT_NEAR(s.price, 0.45, 1e-8);
    EXPECT_NEAR(s.total_regret, 0.0625, 1e-12);
    EXPECT_TRUE(s.warnings.empty());
}

TEST(PriceRegret, LinearExampleHitsUpperEnd) {
    PriceRegretConfig cfg{0.2, 0.6, 0.3, 0.7, {RegretShape::Linear}, {RegretShape::Linear}, 0.25};
    const auto s = solve_price_regret(cfg);
    EXPECT_NEAR(s.price, 0.6, 1e-10);
    EXPECT_FALSE(s.warnings.empty());
}

TEST(PriceRegret, InactiveAndEmpty) {
    const auto s = solve_price_regret(PriceRegretConfig{0.6, 0.9, 0.1, 0.5, {}, {}, 0.5});
    EXPECT_EQ(s.total_regret, 0.0);
    EXPECT_EQ(s.buyer_price, 0.6);
    EXPECT_EQ(s.seller_price, 0.5);
    try {
        solve_price_regret(PriceRegretConfig{0.1, 0.2, 0.5, 0.7, {}, {}, 0.5});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyInterval);
    }
}

TEST(PriceRegret, RestartsAgreeForConvexRegret) {
    PriceRegretConfig cfg{0.1, 0.8, 0.2, 0.9, {RegretShape::Quadratic, 2.0}, {RegretShape::Quadratic, 0.5}, 0.3};
    const auto s = solve_price_regret(cfg);
    const double lo = 0.2, hi = 0.8;
    EXPECT_GE(s.price, lo);
    EXPECT_LE(s.price, hi);
    auto h = [&](double p) { return 0.3 * 2.0 * (p - 0.1) * (p - 0.1) + 0.7 * 0.5 * (0.9 - p) * (0.9 - p); };
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(lo, hi);
    for (int r = 0; r < 16; ++r) {
        double x = u(rng), step = 0.1;
        while (step > 1e-13) {
            const double a = std::clamp(x - step, lo, hi), b = std::clamp(x + step, lo, hi);
            if (h(a) < h(x)) x = a;
            else if (h(b) < h(x)) x = b;
            else step *= 0.5;
        }
        EXPECT_NEAR(x, s.price, 1e-8);
    }
}

TEST(RiskNeutralRegret, SymmetricMeetingPoint) {
    const auto m = three_state_market();
    RegretConfig cfg;
    cfg.seller_anchor = vec({0.4, 0.2, 0.4});
    cfg.buyer_anchor = vec({0.1, 0.8, 0.1});
    const auto s = risk_neutral_regret(m, ContingentClaim(vec({1.0, 0.0, 0.0})), cfg);
    EXPECT_NEAR(s.seller_beliefs[0], 0.25, 1e-6);
    EXPECT_NEAR(s.buyer_beliefs[0], 0.25, 1e-6);
    EXPECT_NEAR(s.price, 0.25, 1e-6);
    EXPECT_LE(risk_neutral_residual(m, s.seller_beliefs), 1e-10);
}

TEST(RiskNeutralRegret, ZeroRegretAndAnchorCheck) {
    const auto m = three_state_market();
    RegretConfig cfg;
    cfg.seller_anchor = vec({0.1, 0.8, 0.1});
    cfg.buyer_anchor = vec({0.4, 0.2, 0.4});
    EXPECT_EQ(risk_neutral_regret(m, ContingentClaim(vec({1.0, 0.0, 0.0})), cfg).total_regret, 0.0);
    cfg.seller_anchor = vec({0.5, 0.3, 0.2});
    try {
        risk_neutral_regret(m, ContingentClaim(vec({1.0, 0.0, 0.0})), cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::AnchorNotRiskNeutral);
    }
}

TEST(RiskNeutralRegret, PriceInsideBand) {
    std::mt19937_64 rng(8);
    std::normal_distribution<double> n01;
    const auto m = three_state_market();
    for (int trial = 0; trial < 10; ++trial) {
        const auto qs = sample_risk_neutral(m, 50 + trial, 2);
        RegretConfig cfg;
        cfg.seller_anchor = qs[0].weights();
        cfg.buyer_anchor = qs[1].weights();
        const ContingentClaim f(vec({n01(rng), n01(rng), n01(rng)}));
        const auto s = risk_neutral_regret(m, f, cfg);
        const auto band = price_band(m, f);
        EXPECT_TRUE(band.contains(s.price, 1e-9));
        EXPECT_LE(s.seller_price, s.buyer_price + 1e-6);
    }
}

}  // namespace
}  // namespace incmkt
