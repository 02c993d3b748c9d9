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

#include <stdexcept>
#include <string>
#include <string_view>

namespace incmkt {

enum class ErrorCode {
    InvalidInput,
    OutOfSupport,
    OutOfRange,
    Arbitrage,
    Exhaustion,
    UnboundedUtility,
    DomainError,
    BracketError,
    RiskTooLarge,
    EmptyFrontier,
    NonMonotoneCurve,
    Infeasible,
    EmptyInterval,
    AnchorNotRiskNeutral,
    NonConvergence,
    Divergence,
    StepTooLarge,
    SingularityStall,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::OutOfSupport: return "OutOfSupport";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::Arbitrage: return "Arbitrage";
        case ErrorCode::Exhaustion: return "Exhaustion";
        case ErrorCode::UnboundedUtility: return "UnboundedUtility";
        case ErrorCode::DomainError: return "DomainError";
        case ErrorCode::BracketError: return "BracketError";
        case ErrorCode::RiskTooLarge: return "RiskTooLarge";
        case ErrorCode::EmptyFrontier: return "EmptyFrontier";
        case ErrorCode::NonMonotoneCurve: return "NonMonotoneCurve";
        case ErrorCode::Infeasible: return "Infeasible";
        case ErrorCode::EmptyInterval: return "EmptyInterval";
        case ErrorCode::AnchorNotRiskNeutral: return "AnchorNotRiskNeutral";
        case ErrorCode::NonConvergence: return "NonConvergence";
        case ErrorCode::Divergence: return "Divergence";
        case ErrorCode::StepTooLarge: return "StepTooLarge";
        case ErrorCode::SingularityStall: return "SingularityStall";
    }
    return "Unknown";
}

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

}  // namespace incmkt
