// SPDX-License-Identifier: Apache-2.0

#include "edistill/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>

namespace edistill {

namespace {

using nlohmann::json;

constexpr std::array<Regime, 3> kRowOrder{Regime::direct, Regime::matching_softmax, Regime::encoding};

std::string fixed(double v, int digits) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

std::string joined(const json& arr) {
    std::string out;
    for (const auto& v : arr) {
        if (!out.empty())
            out += ",";
        out += v.is_string() ? v.get<std::string>() : v.dump();
    }
    return out;
}

// Display width in code points, so "±" counts once.
std::size_t width(const std::string& s) {
    return static_cast<std::size_t>(
        std::count_if(s.begin(), s.end(), [](char c) { return (static_cast<unsigned char>(c) & 0xc0) != 0x80; }));
}

std::string pad(const std::string& s, std::size_t w) {
    const std::size_t n = width(s);
    return n >= w ? s : s + std::string(w - n, ' ');
}

struct RowCells {
    std::string method, regime, accuracy, mean, stddev, params, rel_time, rel_time_raw;
    bool missing = false;
};

std::vector<RowCells> cells(const ComparisonReport& r) {
    std::vector<RowCells> out;
    for (const auto& row : r.rows) {
        RowCells c;
        c.method = method_label(row.regime);
        c.regime = std::string(regime_name(row.regime));
        if (!row.result) {
            c.missing = true;
            c.accuracy = c.mean = c.stddev = c.params = c.rel_time = c.rel_time_raw = "MISSING";
        } else {
            const json& j = *row.result;
            const double mean = j.at("mean_acc").get<double>();
            const double sd = j.at("std_acc").get<double>();
            c.accuracy = format_mean_std(mean, sd);
            c.mean = fixed(mean, 1);
            c.stddev = fixed(sd, 1);
            c.params = std::to_string(j.at("deployed_parameters").get<std::size_t>());
            const bool timed = row.regime == Regime::encoding && r.relative_time;
            c.rel_time = timed ? fixed(*r.relative_time, 2) + "x" : "-";
            c.rel_time_raw = timed ? fixed(*r.relative_time, 4) : "-";
        }
        out.push_back(std::move(c));
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> provenance(const ComparisonReport& r) {
    std::vector<std::pair<std::string, std::string>> out{{"version", r.version}};
    for (const auto& row : r.rows) {
        if (!row.result)
            continue;
        const json& j = *row.result;
        const std::string p(regime_name(row.regime));
        out.emplace_back(p + ".toolkit", j.value("version", std::string("unknown")));
        out.emplace_back(p + ".seeds", joined(j.at("seeds")));
        out.emplace_back(p + ".learning_rates", joined(j.at("grid").at("learning_rates")));
        out.emplace_back(p + ".decay_schemes", joined(j.at("grid").at("decay_schemes")));
        out.emplace_back(p + ".dropouts", joined(j.at("grid").at("dropouts")));
        const json& b = j.at("best_config");
        out.emplace_back(p + ".selected",
                         "lr=" + b.at("learning_rate").dump() + " decay=" + b.at("decay").get<std::string>() +
                             " dropout=" + b.at("dropout").dump());
    }
    return out;
}

} // namespace

std::string method_label(Regime r) {
    switch (r) {
    case Regime::direct:
        return "Training a small network";
    case Regime::matching_softmax:
        return "Matching softmax";
    case Regime::encoding:
        return "Encoding distillation";
    }
    return "?";
}

std::string format_mean_std(double mean, double stddev) {
    return fixed(mean, 1) + " ± " + fixed(stddev, 1);
}

json trial_json(const TrialResult& t) {
    return json{{"seed", t.config.seed},
                {"learning_rate", t.config.learning_rate},
                {"decay", std::string(decay_name(t.config.decay))},
                {"dropout", t.config.dropout},
                {"best_epoch", t.best_epoch},
                {"best_valid_acc", t.best_valid_acc},
                {"test_acc", t.test_acc},
                {"final_train_acc", t.final_train_acc},
                {"train_loss", t.train_loss},
                {"valid_acc", t.valid_acc},
                {"skipped", t.skipped},
                {"diverged", t.diverged},
                {"diagnostic", t.diagnostic}};
}

json regime_result_json(const RegimeResult& result, const Protocol& protocol, const std::string& version) {
    json schemes = json::array();
    for (auto s : protocol.grid.schemes)
        schemes.push_back(std::string(decay_name(s)));
    json per_seed = json::array();
    for (const auto& t : result.aggregate.per_seed)
        per_seed.push_back(trial_json(t));
    json trials = json::array();
    for (const auto& t : result.grid.trials)
        trials.push_back(trial_json(t));
    const TrainConfig& b = result.grid.best;
    return json{
        {"regime", std::string(regime_name(result.spec.tag))},
        {"temperature", result.spec.tag == Regime::matching_softmax ? json(result.spec.temperature) : json()},
        {"mean_acc", result.aggregate.mean},
        {"std_acc", result.aggregate.stddev},
        {"best_valid_test_acc", result.aggregate.best_valid_test_acc},
        {"best_valid_seed", result.aggregate.per_seed.at(result.aggregate.best_valid_index).config.seed},
        {"deployed_parameters", result.deployed_parameters},
        {"trained_parameters", count_parameters(result.trained)},
        {"best_config",
         {{"learning_rate", b.learning_rate},
          {"decay", std::string(decay_name(b.decay))},
          {"dropout", b.dropout},
          {"batch_size", b.batch_size},
          {"max_epochs", b.max_epochs},
          {"patience", b.patience}}},
        {"grid",
         {{"learning_rates", protocol.grid.learning_rates},
          {"decay_schemes", schemes},
          {"dropouts", protocol.grid.dropouts}}},
        {"seeds", protocol.seeds},
        {"per_seed", per_seed},
        {"grid_trials", trials},
        {"version", version}};
}

ComparisonReport build_report(const std::vector<json>& results, std::optional<double> relative_time,
                              const std::string& version) {
    ComparisonReport r;
    r.version = version;
    r.relative_time = relative_time;
    for (Regime reg : kRowOrder)
        r.rows.push_back({reg, std::nullopt});
    for (const auto& j : results) {
        if (!j.contains("regime"))
            throw ConfigError("results file has no \"regime\" field");
        const Regime reg = parse_regime(j.at("regime").get<std::string>());
        auto& row = *std::find_if(r.rows.begin(), r.rows.end(), [reg](const auto& x) { return x.regime == reg; });
        if (row.result)
            throw ConfigError("two results files for regime " + std::string(regime_name(reg)));
        row.result = j;
    }
    return r;
}

std::string format_tsv(const ComparisonReport& report) {
    std::string out;
    for (const auto& [k, v] : provenance(report))
        out += "# " + k + "\t" + v + "\n";
    out += "method\tregime\tmean_acc\tstd_acc\tdeployed_params\trelative_time\n";
    for (const auto& c : cells(report))
        out += c.method + "\t" + c.regime + "\t" + c.mean + "\t" + c.stddev + "\t" + c.params + "\t" +
               c.rel_time_raw + "\n";
    return out;
}

std::string format_text(const ComparisonReport& report) {
    const auto rows = cells(report);
    const std::array<std::string, 4> header{"Method", "Averaged Acc. (%)", "#Parameters", "Relative time"};
    std::array<std::size_t, 4> w{};
    for (std::size_t i = 0; i < 4; ++i)
        w[i] = width(header[i]);
    for (const auto& c : rows) {
        w[0] = std::max(w[0], width(c.method));
        w[1] = std::max(w[1], width(c.accuracy));
        w[2] = std::max(w[2], width(c.params));
        w[3] = std::max(w[3], width(c.rel_time));
    }
    auto line = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
        std::string s = pad(a, w[0]) + "  " + pad(b, w[1]) + "  " + pad(c, w[2]) + "  " + d;
        while (!s.empty() && s.back() == ' ')
            s.pop_back();
        return s + "\n";
    };
    std::string out = line(header[0], header[1], header[2], header[3]);
    out += std::string(w[0] + w[1] + w[2] + w[3] + 6, '-') + "\n";
    for (const auto& c : rows)
        out += line(c.method, c.accuracy, c.params, c.rel_time);
    out += "\n";
    for (const auto& [k, v] : provenance(report))
        out += k + ": " + v + "\n";
    return out;
}

} // namespace edistill
