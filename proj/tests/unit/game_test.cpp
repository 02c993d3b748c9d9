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

#include "incmkt/game.hpp"

namespace incmkt {
namespace {

const GameConfig kUnit{0.0, 1.0};

TEST(MinimaxOffers, WorkedValues) {
    EXPECT_DOUBLE_EQ(minimax_bid(0.2, kUnit), 0.2);
    EXPECT_NEAR(minimax_bid(0.5, kUnit), 5.0 / 12.0, 1e-15);
    EXPECT_NEAR(minimax_bid(3.0, GameConfig{2.0, 4.0}), 2.0 + 2.0 * (5.0 / 12.0), 1e-14);
    EXPECT_NEAR(minimax_bid(3.0, GameConfig{2.0, 4.0}), 17.0 / 6.0, 1e-14);
    EXPECT_NEAR(minimax_ask(0.5, kUnit), 7.0 / 12.0, 1e-15);
    EXPECT_DOUBLE_EQ(minimax_ask(0.9, kUnit), 0.9);
    EXPECT_NEAR(minimax_ask(0.75, kUnit), 0.75, 1e-15);
}

TEST(MinimaxOffers, OutOfSupport) {
    try {
        minimax_bid(1.2, kUnit);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::OutOfSupport);
    }
    EXPECT_THROW(minimax_ask(-0.1, kUnit), Error);
    EXPECT_THROW(invert_bid(0.9, kUnit), Error);
    EXPECT_THROW(invert_ask(0.1, kUnit), Error);
}

TEST(MinimaxOffers, InversesRoundTrip) {
    EXPECT_NEAR(invert_bid(5.0 / 12.0, kUnit), 0.5, 1e-15);
    EXPECT_DOUBLE_EQ(invert_ask(0.9, kUnit), 0.9);
    for (const GameConfig& cfg : {kUnit, GameConfig{-1.0, 3.0}}) {
        for (int k = 0; k <= 100; ++k) {
            const double v = cfg.support_lower + cfg.width() * k / 100.0;
            EXPECT_NEAR(invert_bid(minimax_bid(v, cfg), cfg), v, 1e-12);
            EXPECT_NEAR(invert_ask(minimax_ask(v, cfg), cfg), v, 1e-12);
        }
    }
}

TEST(MinimaxOffers, ShadingMonotoneAndContinuous) {
    const GameConfig cfg{2.0, 4.0};
    double prev_b = -1e9, prev_a = -1e9;
    for (int k = 0; k <= 1000; ++k) {
        const double v = 2.0 + 2.0 * k / 1000.0;
        const double b = minimax_bid(v, cfg), a = minimax_ask(v, cfg);
        EXPECT_LE(b, v + 1e-15);
        EXPECT_GE(a, v - 1e-15);
        EXPECT_GT(b, prev_b);
        EXPECT_GT(a, prev_a);
        if (k > 0) {
            EXPECT_LE(b - prev_b, 0.002 + 1e-12);
            EXPECT_LE(a - prev_a, 0.002 + 1e-12);
        }
        prev_b = b;
        prev_a = a;
    }
}

TEST(PlayGame, WorkedExamples) {
    const auto g1 = play_game(0.8, 0.4, kUnit);
    EXPECT_EQ(g1.stage, GameStage::Stage1);
    EXPECT_NEAR(g1.bid, 37.0 / 60.0, 1e-15);
    EXPECT_NEAR(g1.ask, 31.0 / 60.0, 1e-15);
    ASSERT_TRUE(g1.price);
    EXPECT_NEAR(*g1.price, 17.0 / 30.0, 1e-15);
    EXPECT_NEAR(*g1.buyer_profit(), 0.8 - 17.0 / 30.0, 1e-15);

    const auto g2 = play_game(0.6, 0.5, kUnit);
    EXPECT_EQ(g2.stage, GameStage::Stage2);
    EXPECT_DOUBLE_EQ(*g2.price, 0.55);

    const auto g3 = play_game(0.3, 0.6, kUnit);
    EXPECT_EQ(g3.stage, GameStage::NoTrade);
    EXPECT_TRUE(g3.escalation);
    EXPECT_FALSE(g3.traded);
    EXPECT_FALSE(g3.price.has_value());
}

TEST(PlayGame, StageOneTradeIffQuarterGap) {
    int violations = 0;
    for (int i = 0; i <= 100; ++i) {
        for (int j = 0; j <= 100; ++j) {
            const double pb = i / 100.0, ps = j / 100.0;
            const auto g = play_game(pb, ps, kUnit);
            // integer grid distance decides the threshold exactly
            if ((g.stage == GameStage::Stage1) != (i - j >= 25)) ++violations;
            if (g.stage == GameStage::Stage1) {
                EXPECT_GE(*g.price, ps);
                EXPECT_LE(*g.price, pb);
            }
            if (g.traded) {
                EXPECT_GE(*g.price, ps - 1e-15);
                EXPECT_LE(*g.price, pb + 1e-15);
            }
        }
    }
    EXPECT_EQ(violations, 0);
}

}  // namespace
}  // namespace incmkt
