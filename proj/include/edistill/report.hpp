// SPDX-License-Identifier: Apache-2.0
//
// Per-regime result files and the comparison report built from them.

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "edistill/distillation.hpp"

namespace edistill {

/// Serialisable summary of one regime run (results.json). Contains no
/// wall-clock fields so reruns produce identical bytes.
nlohmann::json regime_result_json(const RegimeResult& result, const Protocol& protocol,
                                  const std::string& version);

nlohmann::json trial_json(const TrialResult& t);

struct ComparisonRow {
    Regime regime;
    std::optional<nlohmann::json> result; // empty -> marked missing
};

struct ComparisonReport {
    std::vector<ComparisonRow> rows; // direct, matching_softmax, encoding
    std::optional<double> relative_time; // distilled / cumbersome inference time
    std::string version;
};

/// Places each results file in its regime's row. Throws ConfigError when two
/// files claim the same regime.
ComparisonReport build_report(const std::vector<nlohmann::json>& results,
                              std::optional<double> relative_time, const std::string& version);

std::string format_tsv(const ComparisonReport& report);
std::string format_text(const ComparisonReport& report);

/// "47.5 ± 0.8"
std::string format_mean_std(double mean, double stddev);

std::string method_label(Regime r);

} // namespace edistill
