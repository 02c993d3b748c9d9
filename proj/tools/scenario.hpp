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

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "incmkt/incmkt.hpp"
#include "json.hpp"

namespace incmkt::cli {

using json = nlohmann::json;

inline constexpr int kSchemaVersion = 1;

/// Round-trip formatting shared by the JSON and CSV writers.
inline std::string format_number(double x) {
    if (!std::isfinite(x)) return "null";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

namespace detail {

inline void write_value(std::string& out, const json& j, int level) {
    const std::string pad(2 * (level + 1), ' ');
    const std::string close(2 * level, ' ');
    switch (j.type()) {
        case json::value_t::object: {
            if (j.empty()) {
                out += "{}";
                return;
            }
            out += "{\n";
            bool first = true;
            for (auto it = j.begin(); it != j.end(); ++it) {
                if (!first) out += ",\n";
                first = false;
                out += pad + json(it.key()).dump() + ": ";
                write_value(out, it.value(), level + 1);
            }
            out += "\n" + close + "}";
            return;
        }
        case json::value_t::array: {
            if (j.empty()) {
                out += "[]";
                return;
            }
            bool scalar = true;
            for (const auto& v : j) scalar &= !v.is_structured();
            if (scalar) {
                out += "[";
                for (std::size_t k = 0; k < j.size(); ++k) {
                    if (k) out += ", ";
                    write_value(out, j[k], level + 1);
                }
                out += "]";
                return;
            }
            out += "[\n";
            for (std::size_t k = 0; k < j.size(); ++k) {
                if (k) out += ",\n";
                out += pad;
                write_value(out, j[k], level + 1);
            }
            out += "\n" + close + "]";
            return;
        }
        case json::value_t::number_float: out += format_number(j.get<double>()); return;
        default: out += j.dump(); return;
    }
}

}  // namespace detail

/// Pretty JSON with sorted keys and every float printed with 17 significant
/// digits; non-finite values become null.
inline std::string write_json(const json& j) {
    std::string out;
    detail::write_value(out, j, 0);
    out += "\n";
    return out;
}

inline json to_json(const Vector& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
    return a;
}

inline json optional_number(const std::optional<double>& x) { return x ? json(*x) : json(nullptr); }

// Scenario parsing. Missing or mistyped fields raise InvalidInput.

inline const json& require(const json& j, const char* key, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) {
        throw Error(ErrorCode::InvalidInput, where + ": missing field '" + key + "'");
    }
    return j.at(key);
}

inline double number(const json& j, const char* key, const std::string& where) {
    const auto& v = require(j, key, where);
    if (!v.is_number()) throw Error(ErrorCode::InvalidInput, where + "." + key + " must be a number");
    return v.get<double>();
}

inline double number_or(const json& j, const char* key, double fallback, const std::string& where) {
    return j.is_object() && j.contains(key) ? number(j, key, where) : fallback;
}

inline std::string string_or(const json& j, const char* key, const std::string& fallback, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (!j.at(key).is_string()) throw Error(ErrorCode::InvalidInput, where + "." + key + " must be a string");
    return j.at(key).get<std::string>();
}

inline bool bool_or(const json& j, const char* key, bool fallback, const std::string& where) {
    if (!j.is_object() || !j.contains(key)) return fallback;
    if (!j.at(key).is_boolean()) throw Error(ErrorCode::InvalidInput, where + "." + key + " must be a boolean");
    return j.at(key).get<bool>();
}

inline Vector vector_of(const json& j, const std::string& where) {
    if (!j.is_array()) throw Error(ErrorCode::InvalidInput, where + " must be an array of numbers");
    Vector v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t k = 0; k < j.size(); ++k) {
        if (!j[k].is_number()) throw Error(ErrorCode::InvalidInput, where + " must be an array of numbers");
        v[static_cast<Eigen::Index>(k)] = j[k].get<double>();
    }
    return v;
}

/// {"riskless_rate": r, "prices": [p_1..p_N], "payoffs": [[state 1 row], ...]}
inline MarketModel parse_market(const json& j) {
    MarketModel m;
    m.riskless_rate = number_or(j, "riskless_rate", 0.0, "market");
    m.prices = vector_of(require(j, "prices", "market"), "market.prices");
    const auto& rows = require(j, "payoffs", "market");
    if (!rows.is_array() || rows.empty()) throw Error(ErrorCode::InvalidInput, "market.payoffs must be a non-empty array");
    const auto N = vector_of(rows[0], "market.payoffs[0]").size();
    m.payoffs.resize(static_cast<Eigen::Index>(rows.size()), N);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const Vector r = vector_of(rows[i], "market.payoffs[" + std::to_string(i) + "]");
        if (r.size() != N) throw Error(ErrorCode::InvalidInput, "market.payoffs rows differ in length");
        m.payoffs.row(static_cast<Eigen::Index>(i)) = r.transpose();
    }
    return m;
}

/// {"utility": {"family": "exponential", "gamma": 1}, "wealth": w, "beliefs": [..]}
inline AgentSpec parse_agent(const json& j, const std::string& where) {
    const auto& u = require(j, "utility", where);
    const std::string family = string_or(u, "family", "", where + ".utility");
    UtilitySpec spec = [&] {
        if (family == "exponential") return UtilitySpec::exponential(number(u, "gamma", where + ".utility"));
        if (family == "power") return UtilitySpec::power(number(u, "eta", where + ".utility"));
        if (family == "log") return UtilitySpec::log();
        throw Error(ErrorCode::InvalidInput, where + ".utility.family must be exponential, power or log");
    }();
    return AgentSpec{spec, number(j, "wealth", where),
                     BeliefMeasure::interior(vector_of(require(j, "beliefs", where), where + ".beliefs"))};
}

inline ContingentClaim parse_claim(const json& j) {
    return ContingentClaim(vector_of(require(j, "payoff", "claim"), "claim.payoff"));
}

/// {"kind": "affine", "intercept": a, "slope": b} | {"kind": "sqrt", "intercept": a, "scale": b}
/// | {"kind": "table", "points": [[eps, price], ...]}
inline PriceCurve parse_curve(const json& j, const std::string& where) {
    const std::string kind = string_or(j, "kind", "", where);
    if (kind == "affine") {
        return affine_curve(number(j, "intercept", where), number(j, "slope", where),
                            number_or(j, "domain_max", numerics::kInf, where));
    }
    if (kind == "sqrt") return sqrt_curve(number(j, "intercept", where), number(j, "scale", where));
    if (kind == "table") {
        const auto& pts = require(j, "points", where);
        if (!pts.is_array()) throw Error(ErrorCode::InvalidInput, where + ".points must be an array");
        std::vector<std::pair<double, double>> v;
        for (const auto& p : pts) {
            const Vector xy = vector_of(p, where + ".points");
            if (xy.size() != 2) throw Error(ErrorCode::InvalidInput, where + ".points entries must be [eps, price]");
            v.emplace_back(xy[0], xy[1]);
        }
        return table_curve(std::move(v));
    }
    throw Error(ErrorCode::InvalidInput, where + ".kind must be affine, sqrt or table");
}

inline UpdateFieldSpec parse_field(const json& j) {
    const std::string kind = string_or(j, "kind", "steepest-descent", "dyn.field");
    if (kind == "steepest-descent") return UpdateFieldSpec::steepest_descent();
    if (kind == "constant") {
        return UpdateFieldSpec::constant(number(j, "f1", "dyn.field"), number(j, "f2", "dyn.field"),
                                         bool_or(j, "example_signs", false, "dyn.field"));
    }
    if (kind == "table") {
        auto vec = [&](const char* key) {
            const Vector v = vector_of(require(j, key, "dyn.field"), std::string("dyn.field.") + key);
            return std::vector<double>(v.data(), v.data() + v.size());
        };
        return UpdateFieldSpec::table(vec("grid_S"), vec("grid_B"), vec("f1"), vec("f2"));
    }
    throw Error(ErrorCode::InvalidInput, "dyn.field.kind must be constant, steepest-descent or table");
}

inline RegretFunction parse_regret_function(const json& j, const std::string& where) {
    RegretFunction f;
    const std::string shape = string_or(j, "shape", "quadratic", where);
    if (shape == "linear") {
        f.shape = RegretShape::Linear;
    } else if (shape == "quadratic") {
        f.shape = RegretShape::Quadratic;
    } else if (shape == "exponential-concave") {
        f.shape = RegretShape::ExponentialConcave;
    } else {
        throw Error(ErrorCode::InvalidInput, where + ".shape must be linear, quadratic or exponential-concave");
    }
    f.scale = number_or(j, "scale", 1.0, where);
    f.rate = number_or(j, "rate", 1.0, where);
    return f;
}

inline Distance parse_distance(const std::string& s) {
    if (s == "squared-euclidean") return Distance::SquaredEuclidean;
    if (s == "kl") return Distance::KullbackLeibler;
    throw Error(ErrorCode::InvalidInput, "regret.distance must be squared-euclidean or kl");
}

}  // namespace incmkt::cli
