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

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "scenario.hpp"

namespace incmkt::cli {

inline constexpr const char* kVersion = "1.0.0";

struct RunOptions {
    std::optional<std::string> task;
    std::optional<std::string> space;   // regret
    std::optional<std::string> scheme;  // dyn
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::vector<std::string> overrides;  // dotted.path=value
};

struct OutputFile {
    std::string suffix;  // appended to the output prefix
    std::string content;
};

struct RunResult {
    json record;
    std::string summary;
    std::vector<OutputFile> files;
};

/// A run that ends with a specific exit code rather than a library error.
class ExitStatus : public std::runtime_error {
public:
    ExitStatus(int code, const std::string& what) : std::runtime_error(what), code_(code) {}
    int code() const noexcept { return code_; }

private:
    int code_;
};

int exit_code(ErrorCode code);
std::string sha256_hex(const std::string& data);
json apply_overrides(json scenario, const std::vector<std::string>& overrides);
std::string trace_csv(const Trace& trace);
std::string ensemble_csv(const Ensemble& ensemble);

/// Runs the scenario in memory. Throws Error or ExitStatus.
RunResult execute(const json& scenario, const RunOptions& options);

/// Loads, executes and writes `<prefix>.result.json` (plus traces) atomically;
/// prints a one-line summary to `out` and diagnostics to `err`. Returns the
/// process exit code.
int run(const std::string& scenario_path, const RunOptions& options, std::ostream& out, std::ostream& err);

}  // namespace incmkt::cli
