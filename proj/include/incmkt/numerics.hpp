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
#include <numeric>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "incmkt/error.hpp"

namespace incmkt::numerics {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct RootOptions {
    double xtol = 1e-15;
    int max_iter = 300;
};

/// Brent's root finder on [lo, hi]. f(lo) and f(hi) must differ in sign.
/// Non-finite function values are tolerated: the iteration falls back to
/// bisection whenever interpolation is unusable.
template <class F>
double brent_root(F&& f, double lo, double hi, double f_lo, double f_hi,
                  const RootOptions& opt = {}) {
    if (f_lo == 0.0) return lo;
    if (f_hi == 0.0) return hi;
    if ((f_lo > 0.0) == (f_hi > 0.0)) {
        throw Error(ErrorCode::BracketError,
                    "no sign change on [" + std::to_string(lo) + ", " + std::to_string(hi) +
                        "], f = (" + std::to_string(f_lo) + ", " + std::to_string(f_hi) + ")");
    }
    double a = lo, b = hi, fa = f_lo, fb = f_hi;
    double c = a, fc = fa, d = b - a, e = d;
    for (int iter = 0; iter < opt.max_iter; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * opt.xtol;
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol || fb == 0.0) return b;
        const bool finite = std::isfinite(fa) && std::isfinite(fb) && std::isfinite(fc);
        if (finite && std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q; else p = -p;
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += (std::abs(d) > tol) ? d : (m > 0.0 ? tol : -tol);
        fb = f(b);
        if (std::isnan(fb)) throw Error(ErrorCode::NonConvergence, "root function returned NaN");
    }
    return b;
}

template <class F>
double brent_root(F&& f, double lo, double hi, const RootOptions& opt = {}) {
    const double f_lo = f(lo);
    const double f_hi = f(hi);
    return brent_root(f, lo, hi, f_lo, f_hi, opt);
}

/// Bisection for a monotone predicate-style function; returns the point where
/// f changes sign to within xtol.
template <class F>
double bisect(F&& f, double lo, double hi, double xtol = 1e-15, int max_iter = 200) {
    double f_lo = f(lo);
    for (int i = 0; i < max_iter && hi - lo > xtol * std::max(1.0, std::abs(lo)); ++i) {
        const double mid = 0.5 * (lo + hi);
        const double f_mid = f(mid);
        if ((f_mid > 0.0) == (f_lo > 0.0)) {
            lo = mid;
            f_lo = f_mid;
        } else {
            hi = mid;
        }
    }
    return 0.5 * (lo + hi);
}

struct ScalarMin {
    double x;
    double value;
};

struct MinimizeOptions {
    int scan_points = 65;
    double xtol = 1e-13;
    double tie_tol = 1e-12;  // relative tolerance for "equally optimal"
    bool refine = true;
};

/// Minimizes f on [lo, hi]: uniform scan to isolate the leftmost best cell,
/// golden-section inside it, derivative-root refinement, and a final sweep to
/// the smallest x attaining the optimum (flat minima resolve leftwards).
template <class F>
ScalarMin minimize_scalar(F&& f, double lo, double hi, const MinimizeOptions& opt = {}) {
    if (!(hi >= lo)) throw Error(ErrorCode::InvalidInput, "minimize_scalar: empty interval");
    if (hi == lo) return {lo, f(lo)};
    const int n = std::max(3, opt.scan_points);
    std::vector<double> xs(n), fs(n);
    for (int i = 0; i < n; ++i) {
        xs[i] = (i == n - 1) ? hi : lo + (hi - lo) * static_cast<double>(i) / (n - 1);
        fs[i] = f(xs[i]);
    }
    double best = kInf;
    for (double v : fs) if (v < best) best = v;
    auto close = [&](double v, double ref) {
        return v <= ref + opt.tie_tol * std::max(1.0, std::abs(ref));
    };
    int i_best = 0;
    while (i_best < n && !close(fs[i_best], best)) ++i_best;
    if (i_best == n) i_best = static_cast<int>(std::min_element(fs.begin(), fs.end()) - fs.begin());

    double a = xs[std::max(0, i_best - 1)];
    double b = xs[std::min(n - 1, i_best + 1)];
    const double gr = 0.5 * (std::sqrt(5.0) - 1.0);
    double x1 = b - gr * (b - a), x2 = a + gr * (b - a);
    double f1 = f(x1), f2 = f(x2);
    for (int it = 0; it < 200 && (b - a) > opt.xtol * std::max(1.0, std::abs(a) + std::abs(b)); ++it) {
        if (f1 <= f2) {
            b = x2; x2 = x1; f2 = f1;
            x1 = b - gr * (b - a); f1 = f(x1);
        } else {
            a = x1; x1 = x2; f1 = f2;
            x2 = a + gr * (b - a); f2 = f(x2);
        }
    }
    ScalarMin result{0.5 * (a + b), 0.0};
    result.value = f(result.x);
    // Candidate endpoints of the scan cell may beat the interior estimate.
    for (double cand : {xs[std::max(0, i_best - 1)], xs[i_best], xs[std::min(n - 1, i_best + 1)]}) {
        const double fc = f(cand);
        if (fc < result.value) result = {cand, fc};
    }

    if (opt.refine && result.x > lo && result.x < hi) {
        const double h = 1e-5 * std::max(1.0, std::abs(result.x));
        auto slope = [&](double x) { return (f(x + h) - f(x - h)) / (2.0 * h); };
        const double w = std::max(1e-6 * (hi - lo), 4.0 * h);
        const double ra = std::max(lo + h, result.x - w), rb = std::min(hi - h, result.x + w);
        if (ra < rb) {
            const double sa = slope(ra), sb = slope(rb);
            if (sa < 0.0 && sb > 0.0) {
                const double xr = brent_root(slope, ra, rb, sa, sb, RootOptions{1e-14, 200});
                const double fr = f(xr);
                if (fr <= result.value + opt.tie_tol * std::max(1.0, std::abs(result.value))) result = {xr, fr};
            }
        }
    }

    // Flat optimum spanning scan cells: report the leftmost optimal point.
    if (i_best + 1 < n && close(fs[i_best + 1], best) && close(fs[i_best], result.value)) {
        if (i_best == 0) {
            result = {lo, fs[0]};
        } else {
            const double ref = result.value;
            result.x = bisect([&](double x) { return close(f(x), ref) ? 1.0 : -1.0; }, xs[i_best - 1],
                              xs[i_best], opt.xtol);
            result.value = f(result.x);
        }
    }
    return result;
}

/// Euclidean projection onto the probability simplex {x >= 0, sum x = 1}.
inline Vector project_simplex(const Vector& v) {
    const Eigen::Index n = v.size();
    std::vector<double> u(v.data(), v.data() + n);
    std::sort(u.begin(), u.end(), std::greater<>());
    double cumsum = 0.0, theta = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        cumsum += u[i];
        const double t = (cumsum - 1.0) / static_cast<double>(i + 1);
        if (u[i] - t > 0.0) theta = t;
    }
    Vector out = (v.array() - theta).max(0.0).matrix();
    const double s = out.sum();
    if (s > 0.0) out /= s;
    return out;
}

/// All points of the simplex grid {k/m : sum k = m} in dimension dim.
inline std::vector<Vector> simplex_grid(int dim, int m) {
    std::vector<Vector> out;
    std::vector<int> counts(dim, 0);
    std::function<void(int, int)> rec = [&](int idx, int remaining) {
        if (idx == dim - 1) {
            counts[idx] = remaining;
            Vector v(dim);
            for (int i = 0; i < dim; ++i) v[i] = static_cast<double>(counts[i]) / m;
            out.push_back(std::move(v));
            return;
        }
        for (int k = 0; k <= remaining; ++k) {
            counts[idx] = k;
            rec(idx + 1, remaining - k);
        }
    };
    rec(0, m);
    return out;
}

inline std::size_t simplex_grid_size(int dim, int m) {
    // C(m + dim - 1, dim - 1)
    double c = 1.0;
    for (int i = 1; i < dim; ++i) c = c * (m + i) / i;
    return static_cast<std::size_t>(std::llround(c));
}

}  // namespace incmkt::numerics
