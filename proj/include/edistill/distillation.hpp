// SPDX-License-Identifier: Apache-2.0
//
// The three compared training regimes: a small network trained directly, a
// small network matching a teacher's softened outputs, and a network whose
// small word vectors are distilled from a large table by an encoding layer.

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "edistill/training.hpp"

namespace edistill {

/// Teacher distributions at a fixed temperature, one column per training
/// sample.
struct SoftTargetSet {
    float temperature = 1.0f;
    MatrixF probs; // n_classes x count

    std::size_t size() const noexcept { return static_cast<std::size_t>(probs.cols()); }
    std::size_t n_classes() const noexcept { return static_cast<std::size_t>(probs.rows()); }
};

/// softmax_t(teacher logits, T) for every sample; the teacher is only read.
SoftTargetSet generate_soft_targets(const ClassifierModel<float>& teacher,
                                    std::span<const Sample> samples, double temperature);

/// "SFT1", u32 count, u32 n_classes, f32 temperature, count x n_classes f32.
void save_soft_targets(const SoftTargetSet& s, const std::filesystem::path& path);
SoftTargetSet load_soft_targets(const std::filesystem::path& path);

/// cross_entropy(student at T=1, one-hot truth) + cross_entropy(student at T, teacher at T).
template <typename Scalar>
double mixed_loss(const Vector<Scalar>& y_student_t1, const Vector<Scalar>& y_student_t,
                  const Vector<Scalar>& t_onehot, const Vector<Scalar>& y_teacher_t) {
    return cross_entropy(y_student_t1, t_onehot) + cross_entropy(y_student_t, y_teacher_t);
}

/// Gradient of mixed_loss with respect to the student logits.
template <typename Scalar>
Vector<Scalar> mixed_loss_backward(const Vector<Scalar>& logits, const Vector<Scalar>& t_onehot,
                                   const Vector<Scalar>& y_teacher_t, double temperature) {
    return softmax_ce_backward(logits, t_onehot, 1.0) +
           softmax_ce_backward(logits, y_teacher_t, temperature);
}

/// SampleLoss for matching softmax; targets are indexed by training position.
SampleLoss matching_softmax_loss(const SoftTargetSet& targets);

struct RegimeSpec {
    Regime tag = Regime::direct;
    double temperature = 2.0; // matching_softmax only

    void validate() const;
};

struct Protocol {
    GridSpec grid;
    TrainConfig base;                           // batch, budget, patience, grid seed
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    std::size_t n_classes = 5;
    std::size_t n_hidden = 50;
    std::size_t n_distill = 50;
    std::size_t n_small_embed = 50; // random small table when none is supplied
    double random_table_scale = 0.1;
    std::size_t jobs = 1;
    std::optional<std::filesystem::path> log_dir;
};

struct RegimeInputs {
    const EmbeddingTable<float>* large = nullptr;       // encoding_distill
    const EmbeddingTable<float>* small = nullptr;       // direct / matching; random if null
    const SoftTargetSet* soft_targets = nullptr;        // matching_softmax
};

struct RegimeResult {
    RegimeSpec spec;
    GridResult grid;
    AggregateResult aggregate;
    ClassifierModel<float> trained;  // best-validation restart, as trained
    ClassifierModel<float> deployed; // folded when an encoder is present
    std::size_t deployed_parameters = 0;
};

/// Factory producing the regime's initial model for a seed. `vocab` sizes the
/// random small table when no small table is supplied.
ModelFactory regime_factory(const RegimeSpec& spec, const Vocabulary& vocab, const RegimeInputs& inputs,
                            const Protocol& protocol);

/// Grid search, then restarts of the winning config over protocol.seeds.
RegimeResult run_regime(const RegimeSpec& spec, const DatasetSplits& splits, const RegimeInputs& inputs,
                        const Protocol& protocol);

struct TeacherOutcome {
    ClassifierModel<float> model;
    GridResult grid;
};

/// Direct classifier over the large table with an `n_hidden` hidden layer,
/// selected by grid search.
TeacherOutcome train_teacher(const DatasetSplits& splits, const EmbeddingTable<float>& large,
                             const Protocol& protocol, std::size_t n_hidden = 200);

} // namespace edistill
