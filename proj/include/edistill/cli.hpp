// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: prepare, train, teacher, soft-targets, distill,
// fold, eval, bench, compare.

#pragma once

#include <cstdint>
#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace edistill::cli {

enum ExitCode : int {
    kOk = 0,
    kFailure = 1,
    kConfigError = 2,
    kDataError = 3,
    kDivergence = 4,
};

/// Flat run configuration. A JSON file given with --config fills it using the
/// same key names; command-line flags override file values.
struct RunSpec {
    std::string command;
    // paths
    std::string train, valid, test; // tree files (prepare)
    std::string data;               // prepared directory
    std::string embeddings;         // large table (teacher / encoding) or small table (train / matching)
    std::string small_embeddings;   // optional small table for matching softmax
    std::string teacher;
    std::string soft_targets;
    std::string model;
    std::string small_model, large_model;
    std::vector<std::string> results;
    std::string bench;
    std::string out;
    std::string split = "test";
    // data
    std::string phrases = "all"; // all | sentence
    bool lowercase = false;
    // protocol
    std::uint64_t seed = 1;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::size_t jobs = 1;
    std::vector<double> lrs{3.0, 1.0, 0.3, 0.1, 0.03};
    std::vector<std::string> decay_schemes{"constant", "halve_every_3", "inverse"};
    std::vector<double> dropouts{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
    std::size_t batch_size = 200;
    std::size_t max_epochs = 30;
    std::size_t patience = 5;
    // model
    std::size_t n_classes = 5;
    std::size_t n_hidden = 50;
    std::size_t n_distill = 50;
    std::size_t n_small_embed = 50;
    std::size_t teacher_hidden = 200;
    double temperature = 2.0;
    std::string regime = "encoding"; // distill: encoding | matching
    // bench / compare
    std::size_t reps = 10;
    std::string format = "both"; // tsv | text | both
};

/// Applies a flat JSON object to `spec`. Unknown keys are a ConfigError.
void apply_config_json(const std::string& json_text, RunSpec& spec);

std::string version();

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

} // namespace edistill::cli
