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

#include "runner.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace incmkt::cli {

namespace fs = std::filesystem;

int exit_code(ErrorCode code) {
    switch (code) {
        case ErrorCode::Arbitrage:
        case ErrorCode::UnboundedUtility: return 3;
        case ErrorCode::EmptyFrontier:
        case ErrorCode::Infeasible:
        case ErrorCode::EmptyInterval: return 4;
        case ErrorCode::NonConvergence:
        case ErrorCode::Divergence:
        case ErrorCode::StepTooLarge:
        case ErrorCode::SingularityStall:
        case ErrorCode::BracketError:
        case ErrorCode::Exhaustion: return 5;
        default: return 2;
    }
}

std::string sha256_hex(const std::string& data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("SHA-256 digest failed");
    }
    std::string hex;
    char buf[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(buf, sizeof buf, "%02x", digest[i]);
        hex += buf;
    }
    return hex;
}

json apply_overrides(json scenario, const std::vector<std::string>& overrides) {
    for (const auto& ov : overrides) {
        const auto eq = ov.find('=');
        if (eq == std::string::npos || eq == 0) {
            throw Error(ErrorCode::InvalidInput, "override '" + ov + "' is not of the form key=value");
        }
        std::string pointer = "/" + ov.substr(0, eq);
        for (auto& ch : pointer) {
            if (ch == '.') ch = '/';
        }
        const std::string text = ov.substr(eq + 1);
        json value = json::parse(text, nullptr, false);
        if (value.is_discarded()) value = text;
        try {
            scenario[json::json_pointer(pointer)] = value;
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidInput, "override '" + ov + "': " + e.what());
        }
    }
    return scenario;
}

namespace {

std::string csv_number(double x) {
    if (std::isnan(x)) return "nan";
    return format_number(x) == "null" ? (x > 0 ? "inf" : "-inf") : format_number(x);
}

void append_row(std::string& out, const TraceRow& r) {
    out += csv_number(r.t) + "," + csv_number(r.eps_S) + "," + csv_number(r.eps_B) + "," + csv_number(r.P_S) + "," +
           csv_number(r.P_B) + "," + csv_number(r.gap) + "\n";
}

}  // namespace

std::string trace_csv(const Trace& trace) {
    std::string out = "t,eps_S,eps_B,P_S,P_B,gap\n";
    for (const auto& r : trace.rows) append_row(out, r);
    return out;
}

std::string ensemble_csv(const Ensemble& ensemble) {
    std::string out = "path,t,eps_S,eps_B,P_S,P_B,gap\n";
    for (std::size_t p = 0; p < ensemble.paths.size(); ++p) {
        for (const auto& r : ensemble.paths[p].rows) {
            out += std::to_string(p) + ",";
            append_row(out, r);
        }
    }
    return out;
}

namespace {

struct TaskOutput {
    json result;
    std::string summary;
    std::vector<OutputFile> files;
};

json band_json(const PriceBand& b) { return {{"lower", b.lower}, {"upper", b.upper}, {"width", b.width()}}; }

json row_json(const TraceRow& r) {
    return {{"t", r.t}, {"eps_S", r.eps_S}, {"eps_B", r.eps_B}, {"P_S", r.P_S}, {"P_B", r.P_B}, {"gap", r.gap}};
}

json trace_json(const Trace& tr) {
    json events = json::array();
    constexpr std::size_t kMaxEvents = 100;
    for (std::size_t k = 0; k < tr.events.size() && k < kMaxEvents; ++k) {
        events.push_back({{"t", tr.events[k].t}, {"kind", tr.events[k].kind}, {"detail", tr.events[k].detail}});
    }
    json stats = json::object();
    for (const auto& [k, v] : tr.stats) stats[k] = v;
    json out = {{"scheme", tr.scheme},
                {"step", tr.step},
                {"rows", tr.rows.size()},
                {"initial", row_json(tr.rows.front())},
                {"final", row_json(tr.back())},
                {"events", events},
                {"event_count", tr.events.size()},
                {"stats", stats}};
    if (tr.seed) out["seed"] = *tr.seed;
    return out;
}

json sharing_json(const SharingSolution& s) {
    return {{"eps_seller", s.eps_seller},     {"eps_buyer", s.eps_buyer},     {"price", s.price},
            {"seller_price", s.seller_price}, {"buyer_price", s.buyer_price}, {"objective", s.objective},
            {"multiplier", s.multiplier},     {"kkt_residual", s.kkt_residual}, {"slack", s.slack}};
}

json regret_json(const RegretSolution& s) {
    json out = {{"seller_price", s.seller_price},
                {"buyer_price", s.buyer_price},
                {"price", s.price},
                {"total_regret", s.total_regret},
                {"constraint_residual", s.constraint_residual},
                {"price_gap", s.price_gap},
                {"certified", s.certified},
                {"warnings", s.warnings}};
    if (s.seller_beliefs.size() > 0) out["seller_beliefs"] = to_json(s.seller_beliefs);
    if (s.buyer_beliefs.size() > 0) out["buyer_beliefs"] = to_json(s.buyer_beliefs);
    out["grid_objective"] = optional_number(s.grid_objective);
    return out;
}

json ensemble_json(const Ensemble& e) {
    json ex = json::array();
    for (double x : e.exponents) ex.push_back(x);
    json div = json::array();
    for (std::size_t p = 0; p < e.diverged.size(); ++p) {
        if (e.diverged[p]) div.push_back(p);
    }
    return {{"paths", e.paths.size()},
            {"mean_exponent", e.mean_exponent},
            {"std_exponent", e.std_exponent},
            {"divergent_paths", e.divergent_paths},
            {"divergent", div},
            {"exponents", ex}};
}

class Context {
public:
    Context(json scenario, std::uint64_t seed) : s_(std::move(scenario)), seed_(seed) {}

    const json& block(const char* name) const {
        static const json empty = json::object();
        return s_.contains(name) ? s_.at(name) : empty;
    }
    std::uint64_t seed() const { return seed_; }

    const MarketModel& market() {
        if (!market_) {
            MarketModel m = parse_market(require(s_, "market", "scenario"));
            const auto rep = validate_market(m);
            if (!rep.ok()) {
                std::string msg = "market fails structural checks:";
                for (const auto& f : rep.failures) msg += " " + f + ";";
                throw ExitStatus(3, msg);
            }
            if (!arbitrage_free(m).arbitrage_free) throw ExitStatus(3, "market admits arbitrage");
            market_ = std::move(m);
        }
        return *market_;
    }
    const ContingentClaim& claim() {
        if (!claim_) {
            claim_ = parse_claim(require(s_, "claim", "scenario"));
            if (claim_->payoff.size() != market().n_states()) {
                throw Error(ErrorCode::InvalidInput, "claim.payoff length must equal the number of states");
            }
        }
        return *claim_;
    }
    AgentSpec agent(Role role) {
        const auto& agents = require(s_, "agents", "scenario");
        const char* key = role == Role::Seller ? "seller" : "buyer";
        AgentSpec a = parse_agent(require(agents, key, "agents"), std::string("agents.") + key);
        if (a.beliefs.size() != market().n_states()) {
            throw Error(ErrorCode::InvalidInput, std::string("agents.") + key + ".beliefs length mismatch");
        }
        return a;
    }
    const PriceBand& band() {
        if (!band_) band_ = price_band(market(), claim());
        return *band_;
    }
    PriceCurvePair curves() {
        const auto& c = require(s_, "curves", "scenario");
        if (string_or(c, "kind", "", "curves") == "derived") {
            return derived_curves(market(), agent(Role::Seller), agent(Role::Buyer), claim());
        }
        return make_curve_pair(parse_curve(require(c, "seller", "curves"), "curves.seller"),
                               parse_curve(require(c, "buyer", "curves"), "curves.buyer"));
    }

private:
    json s_;
    std::uint64_t seed_;
    std::optional<MarketModel> market_;
    std::optional<ContingentClaim> claim_;
    std::optional<PriceBand> band_;
};

std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6g", x);
    return buf;
}

TaskOutput task_band(Context& ctx) {
    const auto& b = ctx.band();
    json r = band_json(b);
    r["replicable"] = b.width() <= 1e-8;
    r["witness"] = to_json(arbitrage_free(ctx.market()).witness->weights());
    return {r, "band [" + fmt(b.lower) + ", " + fmt(b.upper) + "]", {}};
}

TaskOutput task_indiff(Context& ctx) {
    const auto& blk = ctx.block("indiff");
    std::vector<Role> roles;
    const std::string which = string_or(blk, "role", "both", "indiff");
    if (which == "seller" || which == "both") roles.push_back(Role::Seller);
    if (which == "buyer" || which == "both") roles.push_back(Role::Buyer);
    if (roles.empty()) throw Error(ErrorCode::InvalidInput, "indiff.role must be seller, buyer or both");
    std::vector<double> eps;
    if (blk.contains("eps")) {
        const Vector v = vector_of(blk.at("eps"), "indiff.eps");
        eps.assign(v.data(), v.data() + v.size());
    }
    json r = {{"band", band_json(ctx.band())}};
    std::string summary = "indiff";
    for (Role role : roles) {
        const ClaimValuation val(ctx.market(), ctx.agent(role), ctx.claim(), role, ctx.band());
        const double p = val.indifference_price();
        json curve = json::array();
        for (double e : eps) curve.push_back({{"eps", e}, {"price", val.price_at_risk(e)}});
        r[std::string(to_string(role))] = {{"indifference_price", p},
                                           {"reference_utility", val.reference_utility()},
                                           {"max_risk", val.max_risk()},
                                           {"price_at_risk", curve}};
        summary += " " + std::string(to_string(role)) + "=" + fmt(p);
    }
    return {r, summary, {}};
}

GameOutcome play(Context& ctx) {
    const auto& g = ctx.block("game");
    GameConfig cfg;
    if (g.contains("support")) {
        const Vector s = vector_of(g.at("support"), "game.support");
        if (s.size() != 2) throw Error(ErrorCode::InvalidInput, "game.support must be [alpha, beta]");
        cfg.support_lower = s[0];
        cfg.support_upper = s[1];
    }
    cfg.validate();
    const double pb = g.contains("buyer_value") ? number(g, "buyer_value", "game")
                                                : ClaimValuation(ctx.market(), ctx.agent(Role::Buyer), ctx.claim(),
                                                                 Role::Buyer, ctx.band())
                                                      .indifference_price();
    const double ps = g.contains("seller_value") ? number(g, "seller_value", "game")
                                                 : ClaimValuation(ctx.market(), ctx.agent(Role::Seller), ctx.claim(),
                                                                  Role::Seller, ctx.band())
                                                       .indifference_price();
    return play_game(pb, ps, cfg);
}

json game_json(const GameOutcome& o) {
    return {{"buyer_value", o.buyer_value},
            {"seller_value", o.seller_value},
            {"bid", o.bid},
            {"ask", o.ask},
            {"traded", o.traded},
            {"price", optional_number(o.price)},
            {"stage", std::string(to_string(o.stage))},
            {"escalation", o.escalation},
            {"buyer_profit", optional_number(o.buyer_profit())},
            {"seller_profit", optional_number(o.seller_profit())}};
}

std::string escalation_note(const GameOutcome& o) {
    return "no trade: buyer value " + fmt(o.buyer_value) + " is below seller value " + fmt(o.seller_value) +
           "; the agents must take on risk or revise beliefs (no fallback configured)";
}

TaskOutput task_game(Context& ctx) {
    const auto o = play(ctx);
    if (o.escalation) throw ExitStatus(4, escalation_note(o));
    return {game_json(o), "game " + std::string(to_string(o.stage)) + " price " + fmt(*o.price), {}};
}

TaskOutput task_share(Context& ctx) {
    const auto& blk = ctx.block("share");
    SharingConfig cfg;
    cfg.lambda = number_or(blk, "lambda", 0.5, "share");
    if (blk.contains("budget")) cfg.budget = number(blk, "budget", "share");
    cfg.tolerance = number_or(blk, "tolerance", 1e-6, "share");
    const std::string method = string_or(blk, "method", "primal", "share");
    if (method != "primal" && method != "dual" && method != "both") {
        throw Error(ErrorCode::InvalidInput, "share.method must be primal, dual or both");
    }
    const auto curves = ctx.curves();
    json r = {{"lambda", cfg.lambda}};
    std::string summary = "share";
    if (method != "dual") {
        const auto s = solve_primal(curves, cfg);
        const auto k = kkt_residuals(curves, s, cfg.lambda);
        r["primal"] = sharing_json(s);
        r["kkt"] = {{"multiplier", k.multiplier},
                    {"stationarity_seller", k.stationarity_seller},
                    {"stationarity_buyer", k.stationarity_buyer},
                    {"complementarity", k.complementarity},
                    {"infeasibility", k.infeasibility},
                    {"max_violation", k.max_violation}};
        summary += " primal price " + fmt(s.price) + " objective " + fmt(s.objective);
    }
    if (method != "primal") {
        const auto s = solve_dual(curves, cfg);
        r["dual"] = sharing_json(s);
        summary += " dual gap " + fmt(s.objective);
    }
    if (blk.contains("sweep")) {
        const Vector lams = vector_of(blk.at("sweep"), "share.sweep");
        const auto rep = lambda_sweep(curves, std::vector<double>(lams.data(), lams.data() + lams.size()));
        json entries = json::array();
        for (std::size_t k = 0; k < rep.entries.size(); ++k) {
            json e = sharing_json(rep.entries[k]);
            e["lambda"] = rep.lambdas[k];
            entries.push_back(e);
        }
        r["sweep"] = {{"entries", entries},
                      {"seller_risk_nonincreasing", rep.seller_risk_nonincreasing},
                      {"buyer_risk_nondecreasing", rep.buyer_risk_nondecreasing}};
    }
    return {r, summary, {}};
}

TaskOutput task_regret(Context& ctx) {
    const auto& blk = ctx.block("regret");
    const std::string space = string_or(blk, "space", "beliefs", "regret");
    RegretSolution s;
    if (space == "prices") {
        const auto& p = require(blk, "prices", "regret");
        PriceRegretConfig cfg;
        cfg.buyer_lower = number(p, "buyer_lower", "regret.prices");
        cfg.buyer_upper = number(p, "buyer_upper", "regret.prices");
        cfg.seller_lower = number(p, "seller_lower", "regret.prices");
        cfg.seller_upper = number(p, "seller_upper", "regret.prices");
        cfg.buyer_regret = parse_regret_function(p.value("buyer_regret", json::object()), "regret.prices.buyer_regret");
        cfg.seller_regret = parse_regret_function(p.value("seller_regret", json::object()), "regret.prices.seller_regret");
        cfg.lambda = number_or(blk, "lambda", 0.5, "regret");
        s = solve_price_regret(cfg);
    } else if (space == "beliefs" || space == "risk-neutral") {
        RegretConfig cfg;
        cfg.lambda = number_or(blk, "lambda", 0.5, "regret");
        cfg.distance = parse_distance(string_or(blk, "distance", "squared-euclidean", "regret"));
        if (blk.contains("budget")) cfg.budget = number(blk, "budget", "regret");
        cfg.seed = ctx.seed();
        cfg.seller_anchor = blk.contains("seller_anchor") ? vector_of(blk.at("seller_anchor"), "regret.seller_anchor")
                                                          : ctx.agent(Role::Seller).beliefs.weights();
        cfg.buyer_anchor = blk.contains("buyer_anchor") ? vector_of(blk.at("buyer_anchor"), "regret.buyer_anchor")
                                                        : ctx.agent(Role::Buyer).beliefs.weights();
        if (space == "risk-neutral") {
            s = risk_neutral_regret(ctx.market(), ctx.claim(), cfg);
        } else {
            const BeliefPricePair prices(ctx.market(), ctx.agent(Role::Seller), ctx.agent(Role::Buyer), ctx.claim());
            const std::string form = string_or(blk, "formulation", "primal", "regret");
            if (form == "primal") {
                s = solve_belief_primal(prices, cfg);
            } else if (form == "dual") {
                s = solve_belief_dual(prices, cfg);
            } else {
                throw Error(ErrorCode::InvalidInput, "regret.formulation must be primal or dual");
            }
        }
    } else {
        throw Error(ErrorCode::InvalidInput, "regret.space must be beliefs, prices or risk-neutral");
    }
    json r = regret_json(s);
    r["space"] = space;
    return {r, "regret (" + space + ") price " + fmt(s.price) + " regret " + fmt(s.total_regret), {}};
}

std::pair<double, double> pair_of(const json& blk, const char* key, std::pair<double, double> fallback) {
    if (!blk.contains(key)) return fallback;
    const Vector v = vector_of(blk.at(key), std::string("dyn.") + key);
    if (v.size() != 2) throw Error(ErrorCode::InvalidInput, std::string("dyn.") + key + " must have two entries");
    return {v[0], v[1]};
}

SdeSpec parse_sde(const json& blk) {
    SdeSpec spec;
    if (blk.contains("field")) spec.drift = parse_field(blk.at("field"));
    spec.sigma1 = number_or(blk, "sigma1", 0.0, "dyn");
    spec.sigma2 = number_or(blk, "sigma2", 0.0, "dyn");
    spec.horizon = number_or(blk, "horizon", 20.0, "dyn");
    spec.dt = number_or(blk, "dt", 1e-3, "dyn");
    spec.paths = static_cast<int>(number_or(blk, "paths", 1, "dyn"));
    spec.record_stride = static_cast<int>(number_or(blk, "record_stride", 100, "dyn"));
    spec.threads = static_cast<int>(number_or(blk, "threads", 0, "dyn"));
    const auto e0 = pair_of(blk, "eps0", {0.0, 0.0});
    spec.eps_S0 = e0.first;
    spec.eps_B0 = e0.second;
    return spec;
}

TaskOutput task_dyn(Context& ctx) {
    const auto& blk = ctx.block("dyn");
    const std::string scheme = string_or(blk, "scheme", "ode", "dyn");
    const auto e0 = pair_of(blk, "eps0", {0.0, 0.0});
    json r = {{"scheme", scheme}};
    std::vector<OutputFile> files;
    std::string summary = "dyn " + scheme;
    auto add_trace = [&](const Trace& tr) {
        r["trace"] = trace_json(tr);
        files.push_back({".trace.csv", trace_csv(tr)});
        summary += " final gap " + fmt(tr.back().gap);
    };
    if (scheme == "discrete") {
        DiscreteOptions opt;
        opt.steps = static_cast<int>(number_or(blk, "steps", 100, "dyn"));
        opt.step_scale = number_or(blk, "step_scale", 1.0, "dyn");
        opt.clamp = bool_or(blk, "clamp", true, "dyn");
        add_trace(simulate_discrete(ctx.curves(), parse_field(blk.value("field", json::object())), e0.first, e0.second, opt));
    } else if (scheme == "ode") {
        OdeOptions opt;
        opt.horizon = number_or(blk, "horizon", 10.0, "dyn");
        opt.dt = number_or(blk, "dt", 1e-2, "dyn");
        opt.clamp = bool_or(blk, "clamp", true, "dyn");
        const auto curves = ctx.curves();
        const auto field = parse_field(blk.value("field", json::object()));
        const auto tr = simulate_ode(curves, field, e0.first, e0.second, opt);
        double worst = -numerics::kInf;
        for (const auto& row : tr.rows) {
            worst = std::max(worst, contraction_coefficient(curves, field, row.eps_S, row.eps_B).chain_rule);
        }
        const auto c0 = contraction_coefficient(curves, field, e0.first, e0.second);
        r["contraction"] = {{"initial_chain_rule", c0.chain_rule},
                            {"initial_displayed", c0.displayed},
                            {"max_chain_rule_along_trajectory", worst}};
        add_trace(tr);
    } else if (scheme == "barrier") {
        BarrierOptions opt;
        opt.lambda = number_or(blk, "lambda", 0.5, "dyn");
        opt.s = number_or(blk, "s", 0.1, "dyn");
        opt.horizon = number_or(blk, "horizon", 50.0, "dyn");
        opt.dt = number_or(blk, "dt", 1e-3, "dyn");
        opt.sliding = bool_or(blk, "sliding", true, "dyn");
        add_trace(simulate_barrier_gradient(ctx.curves(), e0.first, e0.second, opt));
    } else if (scheme == "projected") {
        const std::string set = string_or(blk, "set", "halfplane", "dyn");
        if (set == "prices") {
            const auto& rg = require(blk, "regrets", "dyn");
            auto quadratic = [&](const char* who) {
                const auto& q = require(rg, who, "dyn.regrets");
                const double target = number(q, "target", std::string("dyn.regrets.") + who);
                const double scale = number_or(q, "scale", 1.0, std::string("dyn.regrets.") + who);
                return std::function<double(double)>([=](double p) { return 2.0 * scale * (p - target); });
            };
            PriceGradientOptions opt;
            opt.Lambda = number_or(blk, "Lambda", 1.0, "dyn");
            opt.alpha = number_or(blk, "alpha", 1.0, "dyn");
            opt.horizon = number_or(blk, "horizon", 10.0, "dyn");
            opt.dt = number_or(blk, "dt", 1e-3, "dyn");
            const auto p0 = pair_of(blk, "p0", {0.0, 0.0});
            add_trace(simulate_projected_gradient_prices(quadratic("seller"), quadratic("buyer"), p0.first, p0.second, opt));
        } else {
            ProjectedOptions opt;
            if (set == "budget") {
                opt.set = ProjectionSet::Budget;
            } else if (set != "halfplane") {
                throw Error(ErrorCode::InvalidInput, "dyn.set must be halfplane, budget or prices");
            }
            opt.lambda = number_or(blk, "lambda", 0.5, "dyn");
            opt.budget = number_or(blk, "budget", 1.0, "dyn");
            opt.max_steps = static_cast<int>(number_or(blk, "max_steps", 1000, "dyn"));
            opt.tolerance = number_or(blk, "tolerance", 1e-10, "dyn");
            const auto& rule = blk.value("steps_rule", json::object());
            const std::string kind = string_or(rule, "kind", "constant", "dyn.steps_rule");
            const double value = number_or(rule, "value", kind == "constant" ? 0.2 : 1.0, "dyn.steps_rule");
            if (kind == "constant") {
                opt.step = [value](int) { return value; };
            } else if (kind == "harmonic") {
                opt.step = [value](int n) { return value / n; };
            } else {
                throw Error(ErrorCode::InvalidInput, "dyn.steps_rule.kind must be constant or harmonic");
            }
            add_trace(simulate_projected_discrete(ctx.curves(), e0.first, e0.second, opt));
        }
    } else if (scheme == "sde" || scheme == "report") {
        auto spec = parse_sde(blk);
        spec.seed = ctx.seed();
        const auto curves = ctx.curves();
        std::optional<Ensemble> ens;
        if (scheme == "report") {
            std::optional<StateGrid> grid;
            if (blk.contains("grid")) {
                const auto& g = blk.at("grid");
                StateGrid sg;
                sg.eps_S_min = number(g, "eps_S_min", "dyn.grid");
                sg.eps_S_max = number(g, "eps_S_max", "dyn.grid");
                sg.eps_B_min = number(g, "eps_B_min", "dyn.grid");
                sg.eps_B_max = number(g, "eps_B_max", "dyn.grid");
                sg.points = static_cast<int>(number_or(g, "points", 21, "dyn.grid"));
                grid = sg;
            }
            auto rep = stability_report(curves, spec, grid, bool_or(blk, "simulate", true, "dyn"));
            r["report"] = {{"R1_range", {rep.R1_range.first, rep.R1_range.second}},
                           {"R2_range", {rep.R2_range.first, rep.R2_range.second}},
                           {"R3sq_range", {rep.R3sq_range.first, rep.R3sq_range.second}},
                           {"bound_K", rep.bound_K},
                           {"sigma_lower", rep.sigma_lower},
                           {"sigma_upper", rep.sigma_upper},
                           {"R2_nonpositive", rep.R2_nonpositive},
                           {"condition_satisfied", rep.condition_satisfied},
                           {"predicted_rate", optional_number(rep.predicted_rate)},
                           {"grid",
                            {{"eps_S_min", rep.grid.eps_S_min},
                             {"eps_S_max", rep.grid.eps_S_max},
                             {"eps_B_min", rep.grid.eps_B_min},
                             {"eps_B_max", rep.grid.eps_B_max},
                             {"points", rep.grid.points}}}};
            summary += std::string(" condition ") + (rep.condition_satisfied ? "satisfied" : "not satisfied");
            if (rep.predicted_rate) summary += " predicted rate " + fmt(*rep.predicted_rate);
            ens = std::move(rep.ensemble);
        } else {
            ens = simulate_sde(curves, spec);
        }
        if (ens) {
            r["ensemble"] = ensemble_json(*ens);
            if (r.contains("report") && r["report"]["predicted_rate"].is_number()) {
                const double level = r["report"]["predicted_rate"].get<double>() + 0.2;
                r["ensemble"]["fraction_below_predicted_plus_0.2"] = ens->fraction_below(level);
            }
            r["trace"] = trace_json(ens->paths.front());
            files.push_back({".trace.csv", trace_csv(ens->paths.front())});
            files.push_back({".ensemble.csv", ensemble_csv(*ens)});
            summary += " mean exponent " + fmt(ens->mean_exponent);
        }
    } else {
        throw Error(ErrorCode::InvalidInput, "dyn.scheme must be ode, discrete, barrier, projected, sde or report");
    }
    return {r, summary, files};
}

TaskOutput task_pipeline(Context& ctx) {
    const auto& blk = ctx.block("pipeline");
    const std::string fallback = string_or(blk, "fallback", "", "pipeline");
    if (fallback != "share" && fallback != "regret") {
        throw Error(ErrorCode::InvalidInput, "pipeline.fallback must be share or regret");
    }
    const auto o = play(ctx);
    json r = {{"game", game_json(o)}, {"fallback", fallback}};
    if (!o.escalation) {
        const std::string route = o.stage == GameStage::Stage1 ? "game-stage1" : "game-stage2";
        r["route"] = route;
        r["price"] = *o.price;
        return {r, "pipeline route " + route + " price " + fmt(*o.price), {}};
    }
    TaskOutput next = fallback == "share" ? task_share(ctx) : task_regret(ctx);
    const std::string route = fallback == "share" ? "risk-sharing" : "regret";
    const double price =
        fallback == "share" ? next.result["primal"]["price"].get<double>() : next.result["price"].get<double>();
    r["route"] = route;
    r["price"] = price;
    r[fallback] = next.result;
    return {r, "pipeline route " + route + " price " + fmt(price), {}};
}

}  // namespace

RunResult execute(const json& input, const RunOptions& options) {
    if (!input.is_object()) throw Error(ErrorCode::InvalidInput, "scenario must be a JSON object");
    json scenario = apply_overrides(input, options.overrides);
    if (options.task) scenario["task"] = *options.task;
    if (options.space) scenario["regret"]["space"] = *options.space;
    if (options.scheme) scenario["dyn"]["scheme"] = *options.scheme;
    if (options.seed) scenario["seed"] = *options.seed;
    if (!scenario.contains("seed")) scenario["seed"] = 0;
    if (!scenario["seed"].is_number_unsigned()) {
        throw Error(ErrorCode::InvalidInput, "seed must be a non-negative integer");
    }
    const std::string task = string_or(scenario, "task", "", "scenario");
    const auto seed = scenario["seed"].get<std::uint64_t>();
    Context ctx(scenario, seed);
    TaskOutput out;
    if (task == "band") {
        out = task_band(ctx);
    } else if (task == "indiff") {
        out = task_indiff(ctx);
    } else if (task == "game") {
        out = task_game(ctx);
    } else if (task == "share") {
        out = task_share(ctx);
    } else if (task == "regret") {
        out = task_regret(ctx);
    } else if (task == "dyn") {
        out = task_dyn(ctx);
    } else if (task == "pipeline") {
        out = task_pipeline(ctx);
    } else {
        throw Error(ErrorCode::InvalidInput, "task must be band, indiff, game, share, regret, dyn or pipeline");
    }
    RunResult res;
    res.record = {{"tool", "incmkt"},
                  {"version", kVersion},
                  {"schema_version", kSchemaVersion},
                  {"task", task},
                  {"seed", seed},
                  {"input_digest", sha256_hex(scenario.dump())},
                  {"result", out.result}};
    res.summary = task + ": " + out.summary;
    res.files.push_back({".result.json", write_json(res.record)});
    for (auto& f : out.files) res.files.push_back(std::move(f));
    return res;
}

namespace {

std::string default_prefix(const std::string& path) {
    fs::path p(path);
    p.replace_extension();
    return p.string();
}

// All files go to temporaries first; renames happen only once every write succeeded.
void write_atomically(const std::string& prefix, const std::vector<OutputFile>& files) {
    std::vector<std::pair<fs::path, fs::path>> staged;
    try {
        for (const auto& f : files) {
            const fs::path target = prefix + f.suffix;
            if (target.has_parent_path()) fs::create_directories(target.parent_path());
            fs::path tmp = target;
            tmp += ".tmp";
            std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
            os << f.content;
            os.close();
            if (!os) throw std::runtime_error("cannot write " + tmp.string());
            staged.emplace_back(tmp, target);
        }
        for (const auto& [tmp, target] : staged) fs::rename(tmp, target);
    } catch (...) {
        std::error_code ec;
        for (const auto& st : staged) fs::remove(st.first, ec);
        throw;
    }
}

}  // namespace

int run(const std::string& scenario_path, const RunOptions& options, std::ostream& out, std::ostream& err) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
        std::ifstream is(scenario_path, std::ios::binary);
        if (!is) throw Error(ErrorCode::InvalidInput, "cannot read scenario file " + scenario_path);
        std::stringstream buf;
        buf << is.rdbuf();
        const json scenario = json::parse(buf.str());
        const RunResult res = execute(scenario, options);
        std::string prefix = options.out.value_or("");
        if (prefix.empty()) prefix = string_or(scenario, "output", default_prefix(scenario_path), "scenario");
        write_atomically(prefix, res.files);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        char wall[32];
        std::snprintf(wall, sizeof wall, "%.1f", ms);
        out << res.summary << " -> " << prefix << ".result.json (" << wall << " ms)\n";
        return 0;
    } catch (const ExitStatus& e) {
        err << "incmkt: " << e.what() << "\n";
        return e.code();
    } catch (const Error& e) {
        err << "incmkt: " << e.what() << "\n";
        return exit_code(e.code());
    } catch (const json::exception& e) {
        err << "incmkt: invalid scenario: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "incmkt: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace incmkt::cli
