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

#include <random>

#include "incmkt/market.hpp"

namespace incmkt {
namespace {

MarketModel three_state_market() {
    MarketModel m;
    m.riskless_rate = 0.0;
    m.prices = Vector::Ones(2);
    m.payoffs.resize(3, 2);
    m.payoffs << 1, 2, 1, 1, 1, 0;
    return m;
}

// Random arbitrage-free market: payoffs drawn first, prices set from a
// random interior pricing measure.
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

TEST(ValidateMarket, AcceptsThreeStateExample) {
    const auto r = validate_market(three_state_market());
    EXPECT_TRUE(r.ok());
    EXPECT_TRUE(r.full_rank);
    EXPECT_TRUE(r.incomplete);
}

TEST(ValidateMarket, FlagsDuplicatedColumn) {
    MarketModel m = three_state_market();
    m.payoffs.resize(3, 3);
    m.payoffs << 1, 2, 2, 1, 1, 1, 1, 0, 0;
    m.prices = Vector::Ones(3);
    const auto r = validate_market(m);
    EXPECT_FALSE(r.full_rank);
    EXPECT_FALSE(r.ok());
}

TEST(ValidateMarket, FlagsCompleteMarket) {
    MarketModel m;
    m.riskless_rate = 0.0;
    m.prices = Vector::Constant(2, 1.0);
    m.payoffs.resize(2, 2);
    m.payoffs << 1, 2, 1, 0;
    const auto r = validate_market(m);
    EXPECT_FALSE(r.incomplete);
}

TEST(ValidateMarket, FlagsWrongRisklessPrice) {
    MarketModel m = three_state_market();
    m.prices[0] = 0.9;
    EXPECT_FALSE(validate_market(m).riskless_price);
}

TEST(ArbitrageFree, WitnessLiesInRiskNeutralFamily) {
    const auto chk = arbitrage_free(three_state_market());
    ASSERT_TRUE(chk.arbitrage_free);
    ASSERT_TRUE(chk.witness.has_value());
    const Vector& q = chk.witness->weights();
    // family (t, 1-2t, t), 0 < t < 1/2
    EXPECT_NEAR(q[0], q[2], 1e-12);
    EXPECT_NEAR(q[1], 1.0 - 2.0 * q[0], 1e-12);
    EXPECT_GT(q[0], 0.0);
    EXPECT_LT(q[0], 0.5);
    EXPECT_NEAR(chk.min_weight, q.minCoeff(), 1e-12);
}

TEST(ArbitrageFree, DominatedAssetIsArbitrage) {
    MarketModel m;
    m.riskless_rate = 0.0;
    m.prices = Vector::Ones(3);
    m.payoffs.resize(4, 3);
    m.payoffs << 1, 2, 2.5, 1, 1, 1.5, 1, 0, 0.5, 1, 0.5, 1.0;
    EXPECT_FALSE(arbitrage_free(m).arbitrage_free);
}

TEST(ArbitrageFree, RisklessOnlyMarket) {
    MarketModel m;
    m.riskless_rate = 0.05;
    m.prices = Vector::Constant(1, 1.0 / 1.05);
    m.payoffs = Matrix::Ones(4, 1);
    const auto chk = arbitrage_free(m);
    EXPECT_TRUE(chk.arbitrage_free);
    EXPECT_GT(chk.witness->weights().minCoeff(), 0.0);
}

TEST(RiskNeutralPrice, Examples) {
    const auto q = BeliefMeasure::interior((Vector(3) << 0.25, 0.5, 0.25).finished());
    EXPECT_DOUBLE_EQ(risk_neutral_price(q, ContingentClaim(Vector::Unit(3, 0)), 0.0), 0.25);
    EXPECT_NEAR(risk_neutral_price(q, ContingentClaim(Vector::Constant(3, 2.0)), 0.1), 2.0 / 1.1, 1e-15);
    const auto point = BeliefMeasure::closed(Vector::Unit(3, 1));
    EXPECT_DOUBLE_EQ(risk_neutral_price(point, ContingentClaim((Vector(3) << 4, 7, 9).finished()), 0.0), 7.0);
}

TEST(PriceBand, ThreeStateDigital) {
    const auto band = price_band(three_state_market(), ContingentClaim(Vector::Unit(3, 0)));
    EXPECT_NEAR(band.lower, 0.0, 1e-12);
    EXPECT_NEAR(band.upper, 0.5, 1e-12);
}

TEST(PriceBand, ReplicableAndConstantClaimsCollapse) {
    const auto m = three_state_market();
    const auto rep = price_band(m, ContingentClaim(m.payoffs.col(1)));
    EXPECT_NEAR(rep.lower, 1.0, 1e-9);
    EXPECT_LE(rep.width(), 1e-9);
    const auto cst = price_band(m, ContingentClaim(Vector::Constant(3, 3.0)));
    EXPECT_NEAR(cst.lower, 3.0, 1e-12);
    EXPECT_LE(cst.width(), 1e-12);
}

TEST(PriceBand, ContainsSampledRiskNeutralPrices) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
        const int K = 3 + trial % 4;
        const int N = 1 + trial % (K - 1);
        const auto m = random_market(rng, K, N);
        Vector f(K);
        for (int i = 0; i < K; ++i) f[i] = n01(rng);
        const ContingentClaim claim(f);
        const auto band = price_band(m, claim);
        for (const auto& q : sample_risk_neutral(m, 100 + trial, 10)) {
            const double p = risk_neutral_price(q, claim, m.riskless_rate);
            EXPECT_GE(p, band.lower - 1e-9);
            EXPECT_LE(p, band.upper + 1e-9);
        }
    }
}

TEST(PriceBand, MonotoneAndAffineEquivariant) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> n01;
    std::uniform_real_distribution<double> pos(0.1, 3.0);
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_market(rng, 5, 3);
        Vector f(5), g(5);
        for (int i = 0; i < 5; ++i) {
            f[i] = n01(rng);
            g[i] = f[i] + std::abs(n01(rng));
        }
        const auto bf = price_band(m, ContingentClaim(f));
        const auto bg = price_band(m, ContingentClaim(g));
        EXPECT_LE(bf.lower, bg.lower + 1e-12);
        EXPECT_LE(bf.upper, bg.upper + 1e-12);
        const double a = pos(rng), c = n01(rng);
        const auto bt = price_band(m, ContingentClaim(Vector(a * f.array() + c)));
        EXPECT_NEAR(bt.lower, a * bf.lower + c / m.growth(), 1e-8);
        EXPECT_NEAR(bt.upper, a * bf.upper + c / m.growth(), 1e-8);
    }
}

TEST(PriceBand, ReplicableClaimsOnRandomMarkets) {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> n01;
    for (int trial = 0; trial < 20; ++trial) {
        const auto m = random_market(rng, 6, 3);
        Vector w(3);
        for (int j = 0; j < 3; ++j) w[j] = n01(rng);
        EXPECT_LE(price_band(m, ContingentClaim(m.payoffs * w)).width(), 1e-8);
    }
}

TEST(SampleRiskNeutral, MembershipAndDeterminism) {
    const auto m = three_state_market();
    const auto a = sample_risk_neutral(m, 7, 3);
    const auto b = sample_risk_neutral(m, 7, 3);
    ASSERT_EQ(a.size(), 3u);
    for (std::size_t k = 0; k < a.size(); ++k) {
        const Vector& q = a[k].weights();
        EXPECT_NEAR(q[0], q[2], 1e-10);
        EXPECT_NEAR(q[1], 1.0 - 2.0 * q[0], 1e-10);
        EXPECT_GT(q[0], 0.0);
        EXPECT_LT(q[0], 0.5);
        EXPECT_LE(risk_neutral_residual(m, q), 1e-10);
        EXPECT_EQ(q, b[k].weights());
    }
    EXPECT_TRUE(sample_risk_neutral(m, 7, 0).empty());
}

TEST(BeliefMeasure, RejectsInvalidWeights) {
    EXPECT_THROW(BeliefMeasure::interior((Vector(2) << 0.0, 1.0).finished()), Error);
    EXPECT_THROW(BeliefMeasure::interior((Vector(2) << 0.5, 0.6).finished()), Error);
    EXPECT_NO_THROW(BeliefMeasure::closed((Vector(2) << 0.0, 1.0).finished()));
}

}  // namespace
}  // namespace incmkt
