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
#include <limits>
#include <optional>
#include <string>
#include <string_view>

#include "incmkt/error.hpp"

namespace incmkt {

/// Common-knowledge support [alpha, beta] of both valuations.
struct GameConfig {
    double support_lower = 0.0;
    double support_upper = 1.0;

    void validate() const {
        if (!std::isfinite(support_lower) || !std::isfinite(support_upper) || !(support_upper > support_lower)) {
            throw Error(ErrorCode::InvalidInput, "game support needs finite alpha < beta");
        }
    }
    double width() const { return support_upper - support_lower; }
};

enum class GameStage { Stage1, Stage2, NoTrade };

inline constexpr std::string_view to_string(GameStage s) {
    switch (s) {
        case GameStage::Stage1: return "stage1";
        case GameStage::Stage2: return "stage2";
        case GameStage::NoTrade: return "no-trade";
    }
    return "unknown";
}

struct GameOutcome {
    double buyer_value = 0.0;
    double seller_value = 0.0;
    double bid = 0.0;
    double ask = 0.0;
    bool traded = false;
    std::optional<double> price;
    GameStage stage = GameStage::NoTrade;
    bool escalation = false;

    std::optional<double> buyer_profit() const {
        return price ? std::optional<double>(buyer_value - *price) : std::nullopt;
    }
    std::optional<double> seller_profit() const {
        return price ? std::optional<double>(*price - seller_value) : std::nullopt;
    }
};

namespace detail {

inline double normalize(double v, const GameConfig& cfg, std::string_view what) {
    cfg.validate();
    if (!(v >= cfg.support_lower && v <= cfg.support_upper)) {
        throw Error(ErrorCode::OutOfSupport, std::string(what) + " " + std::to_string(v) + " outside [" +
                                                 std::to_string(cfg.support_lower) + ", " +
                                                 std::to_string(cfg.support_upper) + "]");
    }
    return (v - cfg.support_lower) / cfg.width();
}

inline double denormalize(double x, const GameConfig& cfg) { return cfg.support_lower + cfg.width() * x; }

}  // namespace detail

/// Minimax-regret bid of a buyer valuing the claim at p_buyer.
inline double minimax_bid(double p_buyer, const GameConfig& cfg) {
    const double x = detail::normalize(p_buyer, cfg, "buyer valuation");
    const double b = x <= 0.25 ? x : 2.0 / 3.0 * x + 1.0 / 12.0;
    return detail::denormalize(b, cfg);
}

/// Minimax-regret ask of a seller valuing the claim at p_seller.
inline double minimax_ask(double p_seller, const GameConfig& cfg) {
    const double x = detail::normalize(p_seller, cfg, "seller valuation");
    const double a = x <= 0.75 ? 2.0 / 3.0 * x + 0.25 : x;
    return detail::denormalize(a, cfg);
}

inline double invert_bid(double bid, const GameConfig& cfg) {
    cfg.validate();
    const double b = (bid - cfg.support_lower) / cfg.width();
    if (!(b >= 0.0 && b <= 0.75)) throw Error(ErrorCode::OutOfRange, "bid " + std::to_string(bid) + " is not a minimax bid");
    const double x = b <= 0.25 ? b : 1.5 * (b - 1.0 / 12.0);
    return detail::denormalize(x, cfg);
}

inline double invert_ask(double ask, const GameConfig& cfg) {
    cfg.validate();
    const double a = (ask - cfg.support_lower) / cfg.width();
    if (!(a >= 0.25 && a <= 1.0)) throw Error(ErrorCode::OutOfRange, "ask " + std::to_string(ask) + " is not a minimax ask");
    const double x = a < 0.75 ? 1.5 * (a - 0.25) : a;
    return detail::denormalize(x, cfg);
}

/// Sealed-bid game: trade at the midpoint of bid and ask when the bid covers
/// the ask; otherwise each side recovers the other's valuation from its offer
/// and they split the difference if the valuations overlap.
inline GameOutcome play_game(double p_buyer, double p_seller, const GameConfig& cfg) {
    GameOutcome out;
    out.buyer_value = p_buyer;
    out.seller_value = p_seller;
    out.bid = minimax_bid(p_buyer, cfg);
    out.ask = minimax_ask(p_seller, cfg);
    // offers are affine images of the valuations; a few ulps of slack keeps exact ties trading
    const double slack = 8.0 * std::numeric_limits<double>::epsilon() *
                         std::max({1.0, std::abs(out.bid), std::abs(out.ask)});
    if (out.bid >= out.ask - slack) {
        out.traded = true;
        out.price = 0.5 * (out.bid + out.ask);
        out.stage = GameStage::Stage1;
        return out;
    }
    // inversion is exact up to rounding; the revealed values are the valuations themselves
    (void)invert_bid(out.bid, cfg);
    (void)invert_ask(out.ask, cfg);
    if (p_buyer >= p_seller) {
        out.traded = true;
        out.price = 0.5 * (p_buyer + p_seller);
        out.stage = GameStage::Stage2;
    } else {
        out.stage = GameStage::NoTrade;
        out.escalation = true;
    }
    return out;
}

}  // namespace incmkt
