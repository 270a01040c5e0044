// SPDX-License-Identifier: Apache-2.0
//
// Mini-batch SGD, learning-rate decay, grid search and restart averaging.

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "edistill/data.hpp"
#include "edistill/model.hpp"

namespace edistill {

enum class DecayScheme { constant, halve_every_3, inverse };

std::string_view decay_name(DecayScheme s);
DecayScheme parse_decay(std::string_view name);

/// constant: lr0; halve_every_3: lr0 * 0.5^floor(epoch/3); inverse: lr0 / (1 + 0.1 epoch).
double decay(double lr0, DecayScheme scheme, std::size_t epoch);

struct TrainConfig {
    double learning_rate = 0.1;
    DecayScheme decay = DecayScheme::constant;
    std::size_t batch_size = 200;
    std::size_t max_epochs = 30;
    double dropout = 0.0;
    std::uint64_t seed = 1;
    std::size_t patience = 5; // epochs without validation improvement

    void validate() const;
};

/// Loss of one sample given its logits; must also write d loss / d logits.
/// `sample_index` is the position in the original training list.
using SampleLoss = std::function<double(const VectorF& logits, std::size_t sample_index, int label,
                                        VectorF& dlogits)>;

/// Cross-entropy against the one-hot label at temperature 1.
SampleLoss standard_loss();

/// One pass over `samples` in a seeded shuffled order. Each batch applies
/// param -= lr * mean gradient. Returns the mean sample loss. Throws
/// DivergenceError on a non-finite loss.
double sgd_epoch(ClassifierModel<float>& model, std::span<const Sample> samples, double lr,
                 std::size_t batch_size, double dropout, Rng& rng,
                 const SampleLoss& loss = standard_loss());

using ModelFactory = std::function<ClassifierModel<float>(std::uint64_t seed)>;

struct TrialResult {
    TrainConfig config;
    std::vector<double> train_loss; // per epoch
    std::vector<double> valid_acc;  // per epoch, percent
    std::size_t best_epoch = 0;     // index into valid_acc
    double best_valid_acc = 0.0;
    double test_acc = 0.0; // at best_epoch
    double final_train_acc = 0.0;
    double seconds = 0.0;
    bool diverged = false;
    bool skipped = false;
    std::string diagnostic;
};

struct TrialOutcome {
    TrialResult result;
    ClassifierModel<float> best_model; // snapshot at best_epoch
};

/// Trains factory(config.seed) with early stopping on validation accuracy
/// (dropout off, T = 1). Writes one tab-separated line per epoch to `log`:
/// epoch, train_loss, valid_acc, lr, seconds.
TrialOutcome run_trial(const ModelFactory& factory, const DatasetSplits& splits,
                       const TrainConfig& config, const SampleLoss& loss = standard_loss(),
                       std::ostream* log = nullptr);

struct GridSpec {
    std::vector<double> learning_rates{3.0, 1.0, 0.3, 0.1, 0.03};
    std::vector<DecayScheme> schemes{DecayScheme::constant, DecayScheme::halve_every_3,
                                     DecayScheme::inverse};
    std::vector<double> dropouts{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};

    std::size_t size() const { return learning_rates.size() * schemes.size() * dropouts.size(); }
};

struct GridResult {
    TrainConfig best;
    TrialResult best_trial;
    std::vector<TrialResult> trials; // grid order, skipped points included
};

/// One trial per grid point with base.seed. The winner has the highest
/// validation accuracy; ties go to the smaller lr, then the smaller dropout.
/// A trial whose final train accuracy is below chance + 5 points marks every
/// higher-dropout point at the same lr as skipped. Trial logs go to
/// `log_dir` when given. `jobs` caps concurrently running lr chains.
GridResult grid_search(const ModelFactory& factory, const DatasetSplits& splits, const GridSpec& grid,
                       const TrainConfig& base, const SampleLoss& loss = standard_loss(),
                       std::size_t jobs = 1, const std::filesystem::path* log_dir = nullptr);

struct AggregateResult {
    double mean = 0.0;
    double stddev = 0.0; // sample standard deviation
    std::vector<TrialResult> per_seed;
    std::size_t best_valid_index = 0;
    double best_valid_test_acc = 0.0;
};

struct RestartOutcome {
    AggregateResult aggregate;
    ClassifierModel<float> best_model; // from the seed with the best validation accuracy
};

/// Retrains `config` once per seed and aggregates test accuracy at each
/// seed's best validation epoch.
RestartOutcome multi_restart(const ModelFactory& factory, const DatasetSplits& splits,
                             const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                             const SampleLoss& loss = standard_loss(), std::size_t jobs = 1,
                             const std::filesystem::path* log_dir = nullptr);

/// Mean and sample standard deviation.
std::pair<double, double> mean_stddev(std::span<const double> xs);

/// Runs f(i) for i in [0, n) on at most `jobs` threads.
void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& f);

} // namespace edistill
