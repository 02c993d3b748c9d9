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

#include <iostream>

#include "CLI11.hpp"
#include "runner.hpp"

int main(int argc, char** argv) {
    using incmkt::cli::RunOptions;

    CLI::App app{"Pricing and bargaining toolkit for claims in incomplete markets"};
    app.require_subcommand(0, 1);
    bool version = false;
    app.add_flag("--version", version, "Print the tool and input-schema versions");

    std::string scenario;
    RunOptions opts;
    std::uint64_t seed = 0;
    std::string out;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--scenario", scenario, "Scenario JSON file")->required();
        sub->add_option("--seed", seed, "Random seed (overrides the scenario)");
        sub->add_option("--out", out, "Output path prefix");
        sub->add_option("--override", opts.overrides, "Dotted-path JSON override key=value")->take_all();
    };

    auto* run = app.add_subcommand("run", "Run the task named in the scenario");
    common(run);
    std::vector<std::pair<CLI::App*, std::string>> fixed;
    for (const char* task : {"band", "indiff", "game", "share", "pipeline"}) {
        auto* sub = app.add_subcommand(task, std::string("Run the ") + task + " task");
        common(sub);
        fixed.emplace_back(sub, task);
    }
    auto* regret = app.add_subcommand("regret", "Minimum-regret belief or price revision");
    common(regret);
    std::string space;
    regret->add_option("--space", space, "beliefs | prices | risk-neutral")
        ->check(CLI::IsMember({"beliefs", "prices", "risk-neutral"}));
    auto* dyn = app.add_subcommand("dyn", "Risk-updating dynamics");
    common(dyn);
    std::string scheme;
    dyn->add_option("scheme", scheme, "ode | discrete | barrier | projected | sde | report")
        ->required()
        ->check(CLI::IsMember({"ode", "discrete", "barrier", "projected", "sde", "report"}));

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    if (version) {
        std::cout << "incmkt " << incmkt::cli::kVersion << " (input schema " << incmkt::cli::kSchemaVersion << ")\n";
        return 0;
    }
    if (app.get_subcommands().empty()) {
        std::cerr << app.help();
        return 2;
    }
    auto* chosen = app.get_subcommands().front();
    for (const auto& [sub, task] : fixed) {
        if (sub == chosen) opts.task = task;
    }
    if (chosen == regret) {
        opts.task = "regret";
        if (!space.empty()) opts.space = space;
    }
    if (chosen == dyn) {
        opts.task = "dyn";
        opts.scheme = scheme;
    }
    if (chosen->count("--seed")) opts.seed = seed;
    if (!out.empty()) opts.out = out;
    return incmkt::cli::run(scenario, opts, std::cout, std::cerr);
}
