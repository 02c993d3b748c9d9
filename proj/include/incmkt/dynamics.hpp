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
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "incmkt/curves.hpp"
#include "incmkt/error.hpp"
#include "incmkt/numerics.hpp"

namespace incmkt {

struct TraceRow {
    double t;
    double eps_S;
    double eps_B;
    double P_S;
    double P_B;
    double gap;  // P_S - P_B
};

struct TraceEvent {
    double t;
    std::string kind;
    std::string detail;
};

struct Trace {
    std::string scheme;
    double step = 0.0;
    std::optional<std::uint64_t> seed;
    std::vector<TraceRow> rows;
    std::vector<TraceEvent> events;
    std::map<std::string, double> stats;

    const TraceRow& back() const { return rows.back(); }
    void event(double t, std::string kind, std::string detail = {}) {
        events.push_back({t, std::move(kind), std::move(detail)});
    }
};

/// Raised when a simulation blows up; carries the trace up to that point.
class DynamicsError : public Error {
public:
    DynamicsError(ErrorCode code, const std::string& what, Trace partial)
        : Error(code, what), partial_(std::move(partial)) {}
    const Trace& partial() const { return partial_; }

private:
    Trace partial_;
};

enum class FieldKind { Constant, SteepestDescent, Table };

/// Risk-update velocities (f1, f2) in d eps_S = f1 * gap, d eps_B = f2 * gap.
///
/// Constant fields come in two sign conventions: raw, used as given, or
/// example, where the seller velocity carries a built-in minus
/// (d eps_S = -f1 * gap). The steepest-descent field is f1 = -dP_S/deps_S,
/// f2 = dP_B/deps_B. Table fields interpolate bilinearly on a rectilinear grid
/// and are clamped at its edges.
struct UpdateFieldSpec {
    FieldKind kind = FieldKind::SteepestDescent;
    double f1 = 0.0;
    double f2 = 0.0;
    bool example_signs = false;
    std::vector<double> grid_S, grid_B;
    std::vector<double> table_f1, table_f2;  // row-major, index i * grid_B.size() + j

    static UpdateFieldSpec constant(double f1, double f2, bool example_signs = false) {
        UpdateFieldSpec s;
        s.kind = FieldKind::Constant;
        s.f1 = f1;
        s.f2 = f2;
        s.example_signs = example_signs;
        return s;
    }
    static UpdateFieldSpec steepest_descent() { return UpdateFieldSpec{}; }
    static UpdateFieldSpec table(std::vector<double> gs, std::vector<double> gb, std::vector<double> v1,
                                 std::vector<double> v2) {
        if (gs.size() < 2 || gb.size() < 2 || v1.size() != gs.size() * gb.size() || v2.size() != v1.size()) {
            throw Error(ErrorCode::InvalidInput, "field table dimensions are inconsistent");
        }
        if (!std::is_sorted(gs.begin(), gs.end()) || !std::is_sorted(gb.begin(), gb.end())) {
            throw Error(ErrorCode::InvalidInput, "field table grids must be increasing");
        }
        UpdateFieldSpec s;
        s.kind = FieldKind::Table;
        s.grid_S = std::move(gs);
        s.grid_B = std::move(gb);
        s.table_f1 = std::move(v1);
        s.table_f2 = std::move(v2);
        return s;
    }

    /// Effective velocities, signs included.
    std::pair<double, double> evaluate(const PriceCurvePair& c, double eS, double eB) const {
        switch (kind) {
            case FieldKind::Constant: return {example_signs ? -f1 : f1, f2};
            case FieldKind::SteepestDescent: return {-c.seller.derivative(eS), c.buyer.derivative(eB)};
            case FieldKind::Table: return {interpolate(table_f1, eS, eB), interpolate(table_f2, eS, eB)};
        }
        return {0.0, 0.0};
    }

private:
    static std::pair<std::size_t, double> locate(const std::vector<double>& g, double x) {
        if (x <= g.front()) return {0, 0.0};
        if (x >= g.back()) return {g.size() - 2, 1.0};
        const auto k = static_cast<std::size_t>(std::upper_bound(g.begin(), g.end(), x) - g.begin()) - 1;
        return {k, (x - g[k]) / (g[k + 1] - g[k])};
    }
    double interpolate(const std::vector<double>& v, double eS, double eB) const {
        const auto [i, a] = locate(grid_S, eS);
        const auto [j, b] = locate(grid_B, eB);
        const std::size_t nb = grid_B.size();
        return (1 - a) * (1 - b) * v[i * nb + j] + a * (1 - b) * v[(i + 1) * nb + j] + (1 - a) * b * v[i * nb + j + 1] +
               a * b * v[(i + 1) * nb + j + 1];
    }
};

namespace detail {

inline TraceRow make_row(const PriceCurvePair& c, double t, double eS, double eB) {
    const double ps = c.seller(eS), pb = c.buyer(eB);
    return {t, eS, eB, ps, pb, ps - pb};
}

inline double clamp_domain(const PriceCurve& c, double e) {
    if (std::isfinite(c.domain_max())) e = std::min(e, c.domain_max() * (1.0 - 1e-12));
    return std::max(0.0, e);
}

inline void check_gap(Trace& tr, double limit = 1e6) {
    const auto& r = tr.rows.back();
    if (!std::isfinite(r.gap) || std::abs(r.gap) > limit) {
        tr.event(r.t, "divergence", "price gap " + std::to_string(r.gap));
        throw DynamicsError(ErrorCode::Divergence, "price gap exceeded " + std::to_string(limit), tr);
    }
}

inline int count_sign_changes(const Trace& tr) {
    int n = 0;
    for (std::size_t k = 1; k < tr.rows.size(); ++k) {
        if ((tr.rows[k].gap > 0.0 && tr.rows[k - 1].gap < 0.0) || (tr.rows[k].gap < 0.0 && tr.rows[k - 1].gap > 0.0)) ++n;
    }
    return n;
}

}  // namespace detail

struct DiscreteOptions {
    int steps = 100;
    double step_scale = 1.0;
    bool clamp = true;
};

/// eps(n+1) = eps(n) + s * f(eps(n)) * (P_S - P_B).
inline Trace simulate_discrete(const PriceCurvePair& c, const UpdateFieldSpec& field, double eS0, double eB0,
                               const DiscreteOptions& opt = {}) {
    Trace tr;
    tr.scheme = "discrete";
    tr.step = opt.step_scale;
    double eS = eS0, eB = eB0;
    tr.rows.push_back(detail::make_row(c, 0.0, eS, eB));
    detail::check_gap(tr);
    for (int n = 1; n <= opt.steps; ++n) {
        const double gap = tr.rows.back().gap;
        const auto [f1, f2] = field.evaluate(c, eS, eB);
        double nS = eS + opt.step_scale * f1 * gap;
        double nB = eB + opt.step_scale * f2 * gap;
        if (opt.clamp) {
            const double cS = detail::clamp_domain(c.seller, nS), cB = detail::clamp_domain(c.buyer, nB);
            if (cS != nS) tr.event(n, "clamp", "eps_S " + std::to_string(nS) + " -> " + std::to_string(cS));
            if (cB != nB) tr.event(n, "clamp", "eps_B " + std::to_string(nB) + " -> " + std::to_string(cB));
            nS = cS;
            nB = cB;
        }
        eS = nS;
        eB = nB;
        tr.rows.push_back(detail::make_row(c, n, eS, eB));
        detail::check_gap(tr);
    }
    tr.stats["sign_changes"] = detail::count_sign_changes(tr);
    return tr;
}

struct OdeOptions {
    double horizon = 10.0;
    double dt = 1e-2;
    bool clamp = true;
    double error_limit = 1e-3;
};

/// Classical RK4 for d eps_S/dt = f1 * gap, d eps_B/dt = f2 * gap. A step
/// doubling comparison on every step serves as the local error proxy.
inline Trace simulate_ode(const PriceCurvePair& c, const UpdateFieldSpec& field, double eS0, double eB0,
                          const OdeOptions& opt = {}) {
    if (!(opt.dt > 0.0) || !(opt.horizon >= 0.0)) throw Error(ErrorCode::InvalidInput, "need dt > 0 and horizon >= 0");
    Trace tr;
    tr.scheme = "ode";
    tr.step = opt.dt;
    auto rhs = [&](double eS, double eB) {
        if (opt.clamp) {
            eS = detail::clamp_domain(c.seller, eS);
            eB = detail::clamp_domain(c.buyer, eB);
        }
        const double gap = c.seller(eS) - c.buyer(eB);
        const auto [f1, f2] = field.evaluate(c, eS, eB);
        return std::pair<double, double>{f1 * gap, f2 * gap};
    };
    auto rk4 = [&](double eS, double eB, double h) {
        const auto k1 = rhs(eS, eB);
        const auto k2 = rhs(eS + 0.5 * h * k1.first, eB + 0.5 * h * k1.second);
        const auto k3 = rhs(eS + 0.5 * h * k2.first, eB + 0.5 * h * k2.second);
        const auto k4 = rhs(eS + h * k3.first, eB + h * k3.second);
        return std::pair<double, double>{eS + h / 6.0 * (k1.first + 2 * k2.first + 2 * k3.first + k4.first),
                                         eB + h / 6.0 * (k1.second + 2 * k2.second + 2 * k3.second + k4.second)};
    };
    const auto n = static_cast<long>(std::llround(opt.horizon / opt.dt));
    double eS = eS0, eB = eB0, max_err = 0.0;
    tr.rows.push_back(detail::make_row(c, 0.0, eS, eB));
    detail::check_gap(tr);
    for (long k = 1; k <= n; ++k) {
        auto full = rk4(eS, eB, opt.dt);
        const auto half = rk4(eS, eB, 0.5 * opt.dt);
        const auto twice = rk4(half.first, half.second, 0.5 * opt.dt);
        const double err = std::max(std::abs(full.first - twice.first), std::abs(full.second - twice.second)) / 15.0;
        max_err = std::max(max_err, err);
        if (!(err <= opt.error_limit)) {
            tr.event(k * opt.dt, "step-too-large", "local error " + std::to_string(err));
            throw DynamicsError(ErrorCode::StepTooLarge, "local error proxy " + std::to_string(err) + " exceeds " +
                                                             std::to_string(opt.error_limit), tr);
        }
        if (opt.clamp) {
            const double cS = detail::clamp_domain(c.seller, full.first), cB = detail::clamp_domain(c.buyer, full.second);
            if (cS != full.first) tr.event(k * opt.dt, "clamp", "eps_S " + std::to_string(full.first));
            if (cB != full.second) tr.event(k * opt.dt, "clamp", "eps_B " + std::to_string(full.second));
            full = {cS, cB};
        }
        eS = full.first;
        eB = full.second;
        tr.rows.push_back(detail::make_row(c, k * opt.dt, eS, eB));
        detail::check_gap(tr);
    }
    tr.stats["max_local_error"] = max_err;
    tr.stats["sign_changes"] = detail::count_sign_changes(tr);
    return tr;
}

/// Coefficient of gap in d(gap)/dt. `chain_rule` is dP_S/deps_S f1 - dP_B/deps_B f2;
/// `displayed` adds the buyer term instead.
struct ContractionCoefficient {
    double chain_rule;
    double displayed;
};

inline ContractionCoefficient contraction_coefficient(const PriceCurvePair& c, const UpdateFieldSpec& field,
                                                      double eS, double eB) {
    const auto [f1, f2] = field.evaluate(c, eS, eB);
    if (f1 == 0.0 && f2 == 0.0) return {0.0, 0.0};
    const double a = f1 == 0.0 ? 0.0 : c.seller.derivative(eS) * f1;
    const double b = f2 == 0.0 ? 0.0 : c.buyer.derivative(eB) * f2;
    return {a - b, a + b};
}

struct BarrierOptions {
    double lambda = 0.5;
    double s = 0.1;
    double horizon = 50.0;
    double dt = 1e-3;
    double gap_floor = 1e-8;
    bool sliding = true;
};

/// Entropic-barrier risk updating
///   d eps_B/dt = s (lambda - dP_B/deps_B / (P_B - P_S))
///   d eps_S/dt = s ((1 - lambda) + dP_S/deps_S / (P_B - P_S)).
/// The singular term points along the gradient of P_B - P_S, so trajectories
/// reach the line P_B = P_S in finite time. Once they cross it the state is
/// moved onto the line and, with `sliding` set, continues with the
/// tangential part of the regular term (Filippov sliding motion).
inline Trace simulate_barrier_gradient(const PriceCurvePair& c, double eS0, double eB0, const BarrierOptions& opt = {}) {
    if (!(opt.s > 0.0) || !(opt.dt > 0.0)) throw Error(ErrorCode::InvalidInput, "need s > 0 and dt > 0");
    if (!(opt.lambda >= 0.0 && opt.lambda <= 1.0)) throw Error(ErrorCode::InvalidInput, "lambda must lie in [0, 1]");
    Trace tr;
    tr.scheme = "barrier";
    tr.step = opt.dt;
    long floor_hits = 0;
    auto G = [&](double eS, double eB) { return c.buyer(eB) - c.seller(eS); };
    auto rhs = [&](double eS, double eB) {
        eS = detail::clamp_domain(c.seller, eS);
        eB = detail::clamp_domain(c.buyer, eB);
        double g = G(eS, eB);
        if (std::abs(g) < opt.gap_floor) {
            ++floor_hits;
            g = g < 0.0 ? -opt.gap_floor : opt.gap_floor;
        }
        return std::pair<double, double>{opt.s * ((1.0 - opt.lambda) + c.seller.derivative(eS) / g),
                                         opt.s * (opt.lambda - c.buyer.derivative(eB) / g)};
    };
    auto tangent_rhs = [&](double eS, double eB) {
        eS = detail::clamp_domain(c.seller, eS);
        eB = detail::clamp_domain(c.buyer, eB);
        const double tS = c.buyer.derivative(eB), tB = c.seller.derivative(eS);
        const double nn = tS * tS + tB * tB;
        const double proj = (opt.s * (1.0 - opt.lambda) * tS + opt.s * opt.lambda * tB) / nn;
        return std::pair<double, double>{proj * tS, proj * tB};
    };
    auto rk4 = [&](const auto& f, double eS, double eB, double h) {
        const auto k1 = f(eS, eB);
        const auto k2 = f(eS + 0.5 * h * k1.first, eB + 0.5 * h * k1.second);
        const auto k3 = f(eS + 0.5 * h * k2.first, eB + 0.5 * h * k2.second);
        const auto k4 = f(eS + h * k3.first, eB + h * k3.second);
        return std::pair<double, double>{eS + h / 6.0 * (k1.first + 2 * k2.first + 2 * k3.first + k4.first),
                                         eB + h / 6.0 * (k1.second + 2 * k2.second + 2 * k3.second + k4.second)};
    };
    // Newton steps along the gradient of P_B - P_S back onto the line
    auto to_line = [&](double& eS, double& eB) {
        for (int it = 0; it < 50; ++it) {
            const double g = G(eS, eB);
            if (std::abs(g) <= 1e-14) break;
            const double nS = -c.seller.derivative(eS), nB = c.buyer.derivative(eB);
            const double tau = -g / (nS * nS + nB * nB);
            eS = detail::clamp_domain(c.seller, eS + tau * nS);
            eB = detail::clamp_domain(c.buyer, eB + tau * nB);
        }
    };
    const auto n = static_cast<long>(std::llround(opt.horizon / opt.dt));
    double eS = eS0, eB = eB0;
    tr.rows.push_back(detail::make_row(c, 0.0, eS, eB));
    bool sliding = false, pinned = false;
    for (long k = 1; k <= n; ++k) {
        const double t = k * opt.dt;
        const double g0 = G(eS, eB);
        std::pair<double, double> next;
        if (!sliding) {
            next = rk4(rhs, eS, eB, opt.dt);
            next = {detail::clamp_domain(c.seller, next.first), detail::clamp_domain(c.buyer, next.second)};
            const double g1 = G(next.first, next.second);
            if ((g0 < 0.0) != (g1 < 0.0) || std::abs(g1) < opt.gap_floor) {
                tr.event(t, "crossing", "gap changed sign");
                if (opt.sliding) {
                    to_line(next.first, next.second);
                    sliding = true;
                    tr.event(t, "sliding", "motion continues along P_B = P_S");
                }
            }
        } else if (!pinned) {
            next = rk4(tangent_rhs, eS, eB, opt.dt);
            if (!(next.first > 0.0) || !(next.second > 0.0)) {
                // the line ends where one risk reaches 0; motion stops there
                if (eB < eS) {
                    next = {c.seller.inverse(c.buyer(0.0)), 0.0};
                } else {
                    next = {0.0, c.buyer.inverse(c.seller(0.0))};
                }
                pinned = true;
                tr.event(t, "boundary", "sliding motion reached the end of P_B = P_S");
            } else {
                next = {detail::clamp_domain(c.seller, next.first), detail::clamp_domain(c.buyer, next.second)};
                to_line(next.first, next.second);
            }
        } else {
            next = {eS, eB};
        }
        eS = next.first;
        eB = next.second;
        tr.rows.push_back(detail::make_row(c, t, eS, eB));
        detail::check_gap(tr);
    }
    tr.stats["floor_hits"] = static_cast<double>(floor_hits);
    tr.stats["sliding"] = sliding ? 1.0 : 0.0;
    if (static_cast<double>(floor_hits) > 0.01 * 4.0 * static_cast<double>(std::max<long>(n, 1))) {
        throw DynamicsError(ErrorCode::SingularityStall, "gap floor hit in more than 1% of steps", tr);
    }
    return tr;
}

/// Projection onto {x1 >= x2}: identity there, averaging otherwise.
inline std::pair<double, double> project_halfplane(std::pair<double, double> x) {
    if (x.first >= x.second) return x;
    const double m = 0.5 * (x.first + x.second);
    return {m, m};
}

/// Euclidean projection onto {lambda x1 + (1-lambda) x2 <= w, x >= 0}.
inline std::pair<double, double> project_budget(std::pair<double, double> x, double lambda, double w) {
    const double a1 = lambda, a2 = 1.0 - lambda;
    auto at = [&](double tau) {
        return std::pair<double, double>{std::max(0.0, x.first - tau * a1), std::max(0.0, x.second - tau * a2)};
    };
    auto load = [&](const std::pair<double, double>& y) { return a1 * y.first + a2 * y.second; };
    const auto y0 = at(0.0);
    if (load(y0) <= w) return y0;
    double lo = 0.0, hi = 1.0;
    while (load(at(hi)) > w) hi *= 2.0;
    for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        (load(at(mid)) > w ? lo : hi) = mid;
    }
    return at(hi);
}

enum class ProjectionSet { HalfPlane, Budget };

struct ProjectedOptions {
    ProjectionSet set = ProjectionSet::HalfPlane;
    double lambda = 0.5;
    double budget = 1.0;
    std::function<double(int)> step = [](int) { return 0.2; };
    int max_steps = 1000;
    double tolerance = 1e-10;
};

/// x(n+1) = P_K[x(n) + s_n (P_S(x(n)) - P_B(x(n)))], x = (eps_S, eps_B).
/// Not converging within max_steps is recorded in the stats, not thrown.
inline Trace simulate_projected_discrete(const PriceCurvePair& c, double eS0, double eB0,
                                         const ProjectedOptions& opt = {}) {
    auto project = [&](std::pair<double, double> x) {
        return opt.set == ProjectionSet::HalfPlane ? project_halfplane(x) : project_budget(x, opt.lambda, opt.budget);
    };
    std::pair<double, double> x{eS0, eB0};
    const auto x0 = project(x);
    if (std::hypot(x0.first - x.first, x0.second - x.second) > 1e-12) {
        throw Error(ErrorCode::InvalidInput, "projected scheme must start inside the constraint set");
    }
    Trace tr;
    tr.scheme = "projected";
    tr.rows.push_back(detail::make_row(c, 0.0, x.first, x.second));
    double residual = 0.0;
    bool converged = false;
    int n = 1;
    for (; n <= opt.max_steps; ++n) {
        const double gap = tr.rows.back().gap;
        const double s = opt.step(n);
        const auto next = project({x.first + s * gap, x.second + s * gap});
        residual = std::hypot(next.first - x.first, next.second - x.second);
        x = next;
        tr.rows.push_back(detail::make_row(c, n, x.first, x.second));
        detail::check_gap(tr);
        if (residual <= opt.tolerance) {
            converged = true;
            break;
        }
    }
    tr.stats["residual"] = residual;
    tr.stats["converged"] = converged ? 1.0 : 0.0;
    if (!converged) tr.event(tr.rows.back().t, "non-convergence", "fixed-point residual " + std::to_string(residual));
    return tr;
}

struct PriceGradientOptions {
    double Lambda = 1.0;
    double alpha = 1.0;
    double horizon = 10.0;
    double dt = 1e-3;
};

/// Projected gradient flow in price space, x = (P1, P2) = (P_S, P_B):
///   P1 < P2:  dP1/dt = -a/2 (P1 - P2) + a/2 (R1' - R2'),  dP2/dt = a/2 (P1 - P2) + a/2 (R1' - R2')
///   P1 >= P2: dP1/dt = -a/2 R1',                          dP2/dt = a/2 R2'
/// scaled by Lambda. Rows store P1, P2 in the price columns and zero risks.
inline Trace simulate_projected_gradient_prices(const std::function<double(double)>& r1_prime,
                                                const std::function<double(double)>& r2_prime, double p1, double p2,
                                                const PriceGradientOptions& opt = {}) {
    if (!(opt.Lambda > 0.0) || !(opt.alpha > 0.0) || !(opt.dt > 0.0)) {
        throw Error(ErrorCode::InvalidInput, "need Lambda, alpha, dt > 0");
    }
    const double h = 0.5 * opt.alpha * opt.Lambda;
    auto rhs = [&](double x1, double x2) {
        if (x1 < x2) {
            const double common = h * (r1_prime(x1) - r2_prime(x2));
            return std::pair<double, double>{-h * (x1 - x2) + common, h * (x1 - x2) + common};
        }
        return std::pair<double, double>{-h * r1_prime(x1), h * r2_prime(x2)};
    };
    Trace tr;
    tr.scheme = "projected-gradient-prices";
    tr.step = opt.dt;
    auto row = [](double t, double x1, double x2) { return TraceRow{t, 0.0, 0.0, x1, x2, x1 - x2}; };
    tr.rows.push_back(row(0.0, p1, p2));
    const auto n = static_cast<long>(std::llround(opt.horizon / opt.dt));
    long flips = 0;
    bool regime = p1 < p2;
    for (long k = 1; k <= n; ++k) {
        const auto k1 = rhs(p1, p2);
        const auto k2 = rhs(p1 + 0.5 * opt.dt * k1.first, p2 + 0.5 * opt.dt * k1.second);
        const auto k3 = rhs(p1 + 0.5 * opt.dt * k2.first, p2 + 0.5 * opt.dt * k2.second);
        const auto k4 = rhs(p1 + opt.dt * k3.first, p2 + opt.dt * k3.second);
        p1 += opt.dt / 6.0 * (k1.first + 2 * k2.first + 2 * k3.first + k4.first);
        p2 += opt.dt / 6.0 * (k1.second + 2 * k2.second + 2 * k3.second + k4.second);
        tr.rows.push_back(row(k * opt.dt, p1, p2));
        const bool now = p1 < p2;
        if (now != regime) {
            ++flips;
            tr.event(k * opt.dt, "regime", now ? "P1 < P2" : "P1 >= P2");
            regime = now;
        }
        if (!std::isfinite(p1) || !std::isfinite(p2) || std::abs(p1 - p2) > 1e6) {
            throw DynamicsError(ErrorCode::Divergence, "price flow diverged", tr);
        }
    }
    tr.stats["regime_flips"] = static_cast<double>(flips);
    if (static_cast<double>(flips) > std::max(1.0, static_cast<double>(n) / 100.0)) {
        tr.event(opt.horizon, "chatter-warning", std::to_string(flips) + " regime switches");
        tr.stats["chatter_warning"] = 1.0;
    }
    return tr;
}

struct SdeSpec {
    UpdateFieldSpec drift = UpdateFieldSpec::constant(1.0, 0.5, true);
    double sigma1 = 0.0;
    double sigma2 = 0.0;
    double horizon = 20.0;
    double dt = 1e-3;
    int paths = 1;
    std::uint64_t seed = 0;
    double eps_S0 = 0.0;
    double eps_B0 = 0.0;
    int record_stride = 1;
    int threads = 0;  // 0: hardware concurrency

    void validate() const {
        if (!(dt > 0.0) || !(horizon > 0.0)) throw Error(ErrorCode::InvalidInput, "need dt > 0 and horizon > 0");
        if (paths < 1) throw Error(ErrorCode::InvalidInput, "need at least one path");
        if (record_stride < 1) throw Error(ErrorCode::InvalidInput, "record stride must be >= 1");
    }
};

struct Ensemble {
    std::vector<Trace> paths;
    std::vector<double> exponents;  // (1/T) ln |gap(T)|; NaN for divergent paths
    std::vector<bool> diverged;
    double mean_exponent = numerics::kNaN;
    double std_exponent = numerics::kNaN;
    int divergent_paths = 0;

    double fraction_below(double level) const {
        int n = 0, m = 0;
        for (double e : exponents) {
            if (std::isnan(e)) continue;
            ++m;
            if (e < level) ++n;
        }
        return m ? static_cast<double>(n) / m : numerics::kNaN;
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t path_seed(std::uint64_t seed, std::uint64_t path) {
    return splitmix64(splitmix64(seed) ^ (path + 0x632be59bd9b4e019ULL));
}

// Once |gap| falls to 1e-9 of the price level, P_S(eps_S) - P_B(eps_B) loses
// its significant digits to cancellation. From then on the gap is carried by
// its Ito-Taylor step g (1 + R1 dt + R3 dW + R2 g dW^2), exact for affine curves.
inline void run_path(const PriceCurvePair& c, const SdeSpec& spec, int p, Trace& tr, double& exponent, bool& diverged) {
    tr.scheme = "sde";
    tr.step = spec.dt;
    tr.seed = spec.seed;
    std::mt19937_64 rng(path_seed(spec.seed, static_cast<std::uint64_t>(p)));
    std::normal_distribution<double> normal(0.0, 1.0);
    const double sq = std::sqrt(spec.dt);
    const auto n = static_cast<long>(std::llround(spec.horizon / spec.dt));
    double eS = spec.eps_S0, eB = spec.eps_B0;
    TraceRow r = make_row(c, 0.0, eS, eB);
    tr.rows.push_back(r);
    double g = r.gap;
    long linearised = 0;
    diverged = false;
    for (long k = 1; k <= n; ++k) {
        const auto [f1, f2] = spec.drift.evaluate(c, eS, eB);
        const double dw = sq * normal(rng);
        const bool resolved = std::abs(g) > 1e-9 * (1.0 + std::abs(r.P_S) + std::abs(r.P_B));
        double factor = 0.0;
        if (!resolved) {
            const double dS = c.seller.derivative(eS), dB = c.buyer.derivative(eB);
            const double r1 = dS * f1 - dB * f2;
            const double r3 = dS * spec.sigma1 - dB * spec.sigma2;
            const double r2 = 0.5 * (c.seller.second_derivative(eS) * spec.sigma1 * spec.sigma1 -
                                     c.buyer.second_derivative(eB) * spec.sigma2 * spec.sigma2);
            factor = 1.0 + r1 * spec.dt + r3 * dw + r2 * g * dw * dw;
            ++linearised;
        }
        eS += f1 * g * spec.dt + spec.sigma1 * g * dw;
        eB += f2 * g * spec.dt + spec.sigma2 * g * dw;
        r = make_row(c, k * spec.dt, eS, eB);
        g = resolved ? r.gap : g * factor;
        if (!std::isfinite(g) || std::abs(g) > 1e6) {
            diverged = true;
            tr.rows.push_back(r);
            tr.event(r.t, "divergence", "price gap " + std::to_string(g));
            break;
        }
        if (k % spec.record_stride == 0 || k == n) tr.rows.push_back(r);
    }
    tr.stats["linearised_steps"] = static_cast<double>(linearised);
    exponent = diverged ? numerics::kNaN : std::log(std::abs(g)) / spec.horizon;
}

}  // namespace detail

/// Euler-Maruyama for
///   d eps_S = f1 gap dt + sigma1 gap dW,  d eps_B = f2 gap dt + sigma2 gap dW
/// with one scalar Brownian increment shared by both equations. Path p draws
/// from its own generator seeded from (seed, p), so results do not depend on
/// the thread count.
inline Ensemble simulate_sde(const PriceCurvePair& c, const SdeSpec& spec) {
    spec.validate();
    Ensemble ens;
    ens.paths.resize(spec.paths);
    ens.exponents.assign(spec.paths, numerics::kNaN);
    std::vector<char> div(spec.paths, 0);
    unsigned nthreads = spec.threads > 0 ? static_cast<unsigned>(spec.threads) : std::thread::hardware_concurrency();
    nthreads = std::max(1u, std::min<unsigned>(nthreads, static_cast<unsigned>(spec.paths)));
    auto worker = [&](unsigned w) {
        for (int p = static_cast<int>(w); p < spec.paths; p += static_cast<int>(nthreads)) {
            bool d = false;
            detail::run_path(c, spec, p, ens.paths[p], ens.exponents[p], d);
            div[p] = d ? 1 : 0;
        }
    };
    if (nthreads == 1) {
        worker(0);
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < nthreads; ++w) pool.emplace_back(worker, w);
        for (auto& t : pool) t.join();
    }
    ens.diverged.assign(div.begin(), div.end());
    double sum = 0.0, sum2 = 0.0;
    int m = 0;
    for (int p = 0; p < spec.paths; ++p) {
        if (div[p]) {
            ++ens.divergent_paths;
            continue;
        }
        sum += ens.exponents[p];
        sum2 += ens.exponents[p] * ens.exponents[p];
        ++m;
    }
    if (m > 0) {
        ens.mean_exponent = sum / m;
        ens.std_exponent = m > 1 ? std::sqrt(std::max(0.0, (sum2 - m * ens.mean_exponent * ens.mean_exponent) / (m - 1))) : 0.0;
    }
    return ens;
}

struct StateGrid {
    double eps_S_min = 0.0, eps_S_max = 1.0;
    double eps_B_min = 0.0, eps_B_max = 1.0;
    int points = 21;
};

struct StabilityReport {
    std::pair<double, double> R1_range;
    std::pair<double, double> R2_range;
    std::pair<double, double> R3sq_range;
    double bound_K = 0.0;
    double sigma_lower = 0.0;
    double sigma_upper = 0.0;
    bool R2_nonpositive = false;
    bool condition_satisfied = false;
    std::optional<double> predicted_rate;
    StateGrid grid;
    std::optional<Ensemble> ensemble;
};

/// Evaluates R1, R2, R3 of the stochastic scheme over a grid of states and
/// checks the almost-sure stability condition sigma_lower > K + sigma_upper/2
/// together with R2 <= 0 (to within 1e-10, the finite-difference noise
/// level). Without an explicit grid, the bounding box of a noise-free
/// trajectory is used. When `simulate` is set the Monte-Carlo ensemble is
/// attached.
inline StabilityReport stability_report(const PriceCurvePair& c, const SdeSpec& spec,
                                        std::optional<StateGrid> grid = std::nullopt, bool simulate = true) {
    spec.validate();
    StabilityReport rep;
    if (!grid) {
        SdeSpec det = spec;
        det.sigma1 = det.sigma2 = 0.0;
        det.paths = 1;
        det.record_stride = 1;
        const auto e = simulate_sde(c, det);
        StateGrid g;
        g.eps_S_min = g.eps_S_max = spec.eps_S0;
        g.eps_B_min = g.eps_B_max = spec.eps_B0;
        for (const auto& r : e.paths[0].rows) {
            g.eps_S_min = std::min(g.eps_S_min, r.eps_S);
            g.eps_S_max = std::max(g.eps_S_max, r.eps_S);
            g.eps_B_min = std::min(g.eps_B_min, r.eps_B);
            g.eps_B_max = std::max(g.eps_B_max, r.eps_B);
        }
        grid = g;
    }
    rep.grid = *grid;
    const int m = std::max(2, grid->points);
    double r1lo = numerics::kInf, r1hi = -numerics::kInf, r2lo = numerics::kInf, r2hi = -numerics::kInf;
    double r3lo = numerics::kInf, r3hi = -numerics::kInf;
    for (int i = 0; i < m; ++i) {
        const double eS = grid->eps_S_min + (grid->eps_S_max - grid->eps_S_min) * i / (m - 1);
        for (int j = 0; j < m; ++j) {
            const double eB = grid->eps_B_min + (grid->eps_B_max - grid->eps_B_min) * j / (m - 1);
            const auto [f1, f2] = spec.drift.evaluate(c, eS, eB);
            const double dS = c.seller.derivative(eS), dB = c.buyer.derivative(eB);
            const double r1 = dS * f1 - dB * f2;
            const double r2 = 0.5 * (c.seller.second_derivative(eS) * spec.sigma1 * spec.sigma1 -
                                     c.buyer.second_derivative(eB) * spec.sigma2 * spec.sigma2);
            const double r3 = dS * spec.sigma1 - dB * spec.sigma2;
            r1lo = std::min(r1lo, r1);
            r1hi = std::max(r1hi, r1);
            r2lo = std::min(r2lo, r2);
            r2hi = std::max(r2hi, r2);
            r3lo = std::min(r3lo, r3 * r3);
            r3hi = std::max(r3hi, r3 * r3);
        }
    }
    rep.R1_range = {r1lo, r1hi};
    rep.R2_range = {r2lo, r2hi};
    rep.R3sq_range = {r3lo, r3hi};
    rep.bound_K = std::max(std::abs(r1lo), std::abs(r1hi));
    rep.sigma_lower = r3lo;
    rep.sigma_upper = r3hi;
    rep.R2_nonpositive = r2hi <= 1e-10;
    rep.condition_satisfied = rep.R2_nonpositive && rep.sigma_lower > rep.bound_K + 0.5 * rep.sigma_upper;
    if (rep.condition_satisfied) rep.predicted_rate = -(rep.sigma_lower - rep.bound_K - 0.5 * rep.sigma_upper);
    if (simulate) rep.ensemble = simulate_sde(c, spec);
    return rep;
}

}  // namespace incmkt
