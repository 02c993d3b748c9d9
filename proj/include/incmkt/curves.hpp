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
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "incmkt/error.hpp"
#include "incmkt/numerics.hpp"

namespace incmkt {

enum class Monotonicity { Decreasing, Increasing };
enum class Provenance { Synthetic, PreferenceDerived };

/// A differentiable price map eps -> P(eps) on [0, domain_max).
///
/// Seller curves are decreasing and buyer curves increasing in the risk eps
/// the agent accepts. Missing derivatives are filled in by finite differences
/// and a missing inverse by bisection, so a curve is usable from its value
/// function alone. Handles are immutable and safe to share across threads.
class PriceCurve {
public:
    using Fn = std::function<double(double)>;

    struct Parts {
        Fn value;
        Fn derivative;
        Fn second_derivative;
        Fn inverse;
        double domain_max = numerics::kInf;
    };

    PriceCurve(Parts parts, Monotonicity direction) : parts_(std::move(parts)), direction_(direction) {
        if (!parts_.value) throw Error(ErrorCode::InvalidInput, "price curve needs a value function");
        if (!(parts_.domain_max > 0.0)) throw Error(ErrorCode::InvalidInput, "price curve domain is empty");
    }

    double operator()(double eps) const { return parts_.value(eps); }
    double value(double eps) const { return parts_.value(eps); }

    double derivative(double eps) const {
        if (parts_.derivative) return parts_.derivative(eps);
        const double h = std::max(1e-6, 1e-6 * std::abs(eps));
        return fd_first(eps, h);
    }

    double second_derivative(double eps) const {
        if (parts_.second_derivative) return parts_.second_derivative(eps);
        const double h = 1e-4 * std::max(1.0, std::abs(eps));
        const double f0 = value(eps);
        if (eps - h >= 0.0 && eps + h < parts_.domain_max) {
            return (value(eps + h) - 2.0 * f0 + value(eps - h)) / (h * h);
        }
        if (eps - h < 0.0) return (value(eps + 2.0 * h) - 2.0 * value(eps + h) + f0) / (h * h);
        return (f0 - 2.0 * value(eps - h) + value(eps - 2.0 * h)) / (h * h);
    }

    /// Risk level at which the curve quotes `price`.
    double inverse(double price) const {
        if (parts_.inverse) return parts_.inverse(price);
        const double sign = direction_ == Monotonicity::Increasing ? 1.0 : -1.0;
        auto f = [&](double e) { return sign * (value(e) - price); };
        const double f0 = f(0.0);
        if (f0 >= 0.0) {
            if (f0 == 0.0) return 0.0;
            throw Error(ErrorCode::OutOfRange, "price " + std::to_string(price) + " below the curve range");
        }
        double hi = std::isfinite(parts_.domain_max) ? parts_.domain_max * (1.0 - 1e-12) : 1.0;
        double f_hi = f(hi);
        for (int i = 0; i < 80 && f_hi < 0.0 && !std::isfinite(parts_.domain_max); ++i) {
            hi *= 2.0;
            f_hi = f(hi);
        }
        if (f_hi < 0.0) throw Error(ErrorCode::OutOfRange, "price " + std::to_string(price) + " not attained");
        return numerics::brent_root(f, 0.0, hi, f0, f_hi);
    }

    double domain_max() const { return parts_.domain_max; }
    Monotonicity direction() const { return direction_; }
    bool decreasing() const { return direction_ == Monotonicity::Decreasing; }

    /// Price approached at the right end of the domain.
    double terminal_value() const {
        if (std::isfinite(parts_.domain_max)) return value(parts_.domain_max * (1.0 - 1e-12));
        return decreasing() ? -numerics::kInf : numerics::kInf;
    }

private:
    double fd_first(double eps, double h) const {
        if (eps - h >= 0.0 && eps + h < parts_.domain_max) return (value(eps + h) - value(eps - h)) / (2.0 * h);
        if (eps - h < 0.0) return (-3.0 * value(eps) + 4.0 * value(eps + h) - value(eps + 2.0 * h)) / (2.0 * h);
        return (3.0 * value(eps) - 4.0 * value(eps - h) + value(eps - 2.0 * h)) / (2.0 * h);
    }

    Parts parts_;
    Monotonicity direction_;
};

struct PriceCurvePair {
    PriceCurve seller;
    PriceCurve buyer;
    Provenance provenance = Provenance::Synthetic;
};

/// P(eps) = intercept + slope * eps.
inline PriceCurve affine_curve(double intercept, double slope, double domain_max = numerics::kInf) {
    if (slope == 0.0 || !std::isfinite(slope)) throw Error(ErrorCode::NonMonotoneCurve, "affine slope must be nonzero");
    PriceCurve::Parts p;
    p.value = [=](double e) { return intercept + slope * e; };
    p.derivative = [=](double) { return slope; };
    p.second_derivative = [](double) { return 0.0; };
    p.inverse = [=](double price) { return (price - intercept) / slope; };
    p.domain_max = domain_max;
    return PriceCurve(std::move(p), slope < 0.0 ? Monotonicity::Decreasing : Monotonicity::Increasing);
}

/// P(eps) = intercept + scale * sqrt(eps).
inline PriceCurve sqrt_curve(double intercept, double scale) {
    if (scale == 0.0 || !std::isfinite(scale)) throw Error(ErrorCode::NonMonotoneCurve, "sqrt scale must be nonzero");
    PriceCurve::Parts p;
    p.value = [=](double e) { return intercept + scale * std::sqrt(e); };
    p.derivative = [=](double e) { return scale / (2.0 * std::sqrt(e)); };
    p.second_derivative = [=](double e) { return -scale / (4.0 * e * std::sqrt(e)); };
    p.inverse = [=](double price) {
        const double r = (price - intercept) / scale;
        if (r < 0.0) throw Error(ErrorCode::OutOfRange, "price outside sqrt curve range");
        return r * r;
    };
    return PriceCurve(std::move(p), scale < 0.0 ? Monotonicity::Decreasing : Monotonicity::Increasing);
}

/// Piecewise-linear curve through (eps_k, P_k); eps_0 must be 0 and the
/// domain ends at the last knot.
inline PriceCurve table_curve(std::vector<std::pair<double, double>> points) {
    if (points.size() < 2) throw Error(ErrorCode::InvalidInput, "table curve needs at least two points");
    if (points.front().first != 0.0) throw Error(ErrorCode::InvalidInput, "table curve must start at eps = 0");
    const bool dec = points[1].second < points[0].second;
    for (std::size_t k = 1; k < points.size(); ++k) {
        if (!(points[k].first > points[k - 1].first)) {
            throw Error(ErrorCode::InvalidInput, "table eps values must be strictly increasing");
        }
        const bool step_dec = points[k].second < points[k - 1].second;
        if (points[k].second == points[k - 1].second || step_dec != dec) {
            throw Error(ErrorCode::NonMonotoneCurve, "table prices must be strictly monotone");
        }
    }
    auto pts = std::make_shared<const std::vector<std::pair<double, double>>>(std::move(points));
    auto segment = [pts](double e) {
        const auto& v = *pts;
        auto it = std::upper_bound(v.begin(), v.end(), e, [](double x, const auto& pt) { return x < pt.first; });
        std::size_t k = it == v.begin() ? 0 : static_cast<std::size_t>(it - v.begin()) - 1;
        return std::min(k, v.size() - 2);
    };
    PriceCurve::Parts p;
    p.value = [pts, segment](double e) {
        const auto k = segment(e);
        const auto& [e0, p0] = (*pts)[k];
        const auto& [e1, p1] = (*pts)[k + 1];
        return p0 + (p1 - p0) * (e - e0) / (e1 - e0);
    };
    p.derivative = [pts, segment](double e) {
        const auto k = segment(e);
        return ((*pts)[k + 1].second - (*pts)[k].second) / ((*pts)[k + 1].first - (*pts)[k].first);
    };
    p.second_derivative = [](double) { return 0.0; };
    p.inverse = [pts, dec](double price) {
        const auto& v = *pts;
        for (std::size_t k = 0; k + 1 < v.size(); ++k) {
            const double lo = std::min(v[k].second, v[k + 1].second);
            const double hi = std::max(v[k].second, v[k + 1].second);
            if (price >= lo && price <= hi) {
                return v[k].first + (price - v[k].second) * (v[k + 1].first - v[k].first) /
                                        (v[k + 1].second - v[k].second);
            }
        }
        (void)dec;
        throw Error(ErrorCode::OutOfRange, "price outside table curve range");
    };
    p.domain_max = pts->back().first;
    return PriceCurve(std::move(p), dec ? Monotonicity::Decreasing : Monotonicity::Increasing);
}

inline PriceCurvePair make_curve_pair(PriceCurve seller, PriceCurve buyer,
                                      Provenance provenance = Provenance::Synthetic) {
    if (!seller.decreasing()) throw Error(ErrorCode::NonMonotoneCurve, "seller curve must be decreasing in risk");
    if (buyer.decreasing()) throw Error(ErrorCode::NonMonotoneCurve, "buyer curve must be increasing in risk");
    return PriceCurvePair{std::move(seller), std::move(buyer), provenance};
}

}  // namespace incmkt
