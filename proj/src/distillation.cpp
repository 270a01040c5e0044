// SPDX-License-Identifier: Apache-2.0

#include "edistill/distillation.hpp"

#include <cmath>

#include "edistill/binary_io.hpp"

namespace edistill {

namespace {

constexpr std::string_view kSoftMagic = "SFT1";

} // namespace

SoftTargetSet generate_soft_targets(const ClassifierModel<float>& teacher,
                                    std::span<const Sample> samples, double temperature) {
    SoftTargetSet out;
    out.temperature = static_cast<float>(temperature);
    out.probs.resize(static_cast<Eigen::Index>(teacher.config.n_classes),
                     static_cast<Eigen::Index>(samples.size()));
    for (std::size_t i = 0; i < samples.size(); ++i)
        out.probs.col(static_cast<Eigen::Index>(i)) =
            softmax_t(logits(teacher, std::span<const std::size_t>(samples[i].tokens)), temperature);
    return out;
}

void save_soft_targets(const SoftTargetSet& s, const std::filesystem::path& path) {
    io::ByteWriter w;
    w.magic(kSoftMagic);
    w.u32(io::ByteWriter::checked_u32(s.size()));
    w.u32(io::ByteWriter::checked_u32(s.n_classes()));
    w.f32(s.temperature);
    w.floats(s.probs);
    io::write_file_atomic(path, w.bytes());
}

SoftTargetSet load_soft_targets(const std::filesystem::path& path) {
    io::ByteReader r(io::read_file(path), path.string());
    r.expect_magic(kSoftMagic);
    const std::uint32_t count = r.u32();
    const std::uint32_t classes = r.u32();
    SoftTargetSet s;
    s.temperature = r.f32();
    if (!(s.temperature > 0.0f))
        throw FormatError(path.string() + ": temperature must be positive");
    if (static_cast<std::size_t>(count) * classes * 4 != r.remaining())
        throw FormatError(path.string() + ": payload size does not match the header");
    s.probs.resize(classes, count);
    r.floats(s.probs);
    return s;
}

SampleLoss matching_softmax_loss(const SoftTargetSet& targets) {
    const double temperature = targets.temperature;
    return [&targets, temperature](const VectorF& z, std::size_t index, int label, VectorF& dz) {
        if (index >= targets.size())
            throw IndexError("matching_softmax_loss: no soft target for sample " + std::to_string(index));
        const VectorF t = one_hot<float>(static_cast<std::size_t>(z.size()), static_cast<std::size_t>(label));
        const VectorF teacher = targets.probs.col(static_cast<Eigen::Index>(index));
        dz = mixed_loss_backward(z, t, teacher, temperature);
        return mixed_loss(softmax_t(z, 1.0), softmax_t(z, temperature), t, teacher);
    };
}

void RegimeSpec::validate() const {
    if (tag == Regime::matching_softmax && !(temperature > 1.0))
        throw ConfigError("matching_softmax needs temperature > 1, got " + std::to_string(temperature));
}

ModelFactory regime_factory(const RegimeSpec& spec, const Vocabulary& vocab, const RegimeInputs& inputs,
                            const Protocol& protocol) {
    spec.validate();
    ModelConfig cfg;
    cfg.n_hidden = protocol.n_hidden;
    cfg.n_classes = protocol.n_classes;
    cfg.regime = spec.tag;
    if (spec.tag == Regime::encoding) {
        if (!inputs.large)
            throw ConfigError("encoding_distill needs the large pretrained table");
        cfg.n_embed = inputs.large->dim();
        cfg.n_distill = protocol.n_distill;
        const EmbeddingTable<float>* large = inputs.large;
        return [cfg, large](std::uint64_t seed) {
            Rng rng(seed);
            return ClassifierModel<float>::init(cfg, *large, rng);
        };
    }
    if (spec.tag == Regime::matching_softmax && !inputs.soft_targets)
        throw ConfigError("matching_softmax needs teacher soft targets");
    if (inputs.small) {
        cfg.n_embed = inputs.small->dim();
        const EmbeddingTable<float>* small = inputs.small;
        return [cfg, small](std::uint64_t seed) {
            Rng rng(seed);
            return ClassifierModel<float>::init(cfg, *small, rng);
        };
    }
    cfg.n_embed = protocol.n_small_embed;
    const double scale = protocol.random_table_scale;
    return [cfg, vocab, scale](std::uint64_t seed) {
        Rng rng(seed);
        auto table = init_random_table<float>(vocab, cfg.n_embed, scale, rng);
        return ClassifierModel<float>::init(cfg, std::move(table), rng);
    };
}

RegimeResult run_regime(const RegimeSpec& spec, const DatasetSplits& splits, const RegimeInputs& inputs,
                        const Protocol& protocol) {
    const ModelFactory factory = regime_factory(spec, splits.vocab, inputs, protocol);
    SampleLoss loss = standard_loss();
    if (spec.tag == Regime::matching_softmax) {
        if (inputs.soft_targets->size() != splits.train.size())
            throw ConfigError("soft targets cover " + std::to_string(inputs.soft_targets->size()) +
                              " samples but the training split has " + std::to_string(splits.train.size()));
        if (std::abs(inputs.soft_targets->temperature - spec.temperature) > 1e-6)
            throw ConfigError("soft targets were generated at T=" +
                              std::to_string(inputs.soft_targets->temperature) + ", regime wants T=" +
                              std::to_string(spec.temperature));
        loss = matching_softmax_loss(*inputs.soft_targets);
    }
    const std::filesystem::path* log_dir = protocol.log_dir ? &*protocol.log_dir : nullptr;
    GridResult grid = grid_search(factory, splits, protocol.grid, protocol.base, loss, protocol.jobs, log_dir);
    RestartOutcome restarts = multi_restart(factory, splits, grid.best, protocol.seeds, loss, protocol.jobs, log_dir);
    RegimeResult out{spec, std::move(grid), std::move(restarts.aggregate), std::move(restarts.best_model), {}, 0};
    out.deployed = fold_model(out.trained);
    out.deployed_parameters = count_parameters(out.deployed);
    return out;
}

TeacherOutcome train_teacher(const DatasetSplits& splits, const EmbeddingTable<float>& large,
                             const Protocol& protocol, std::size_t n_hidden) {
    ModelConfig cfg;
    cfg.n_embed = large.dim();
    cfg.n_hidden = n_hidden;
    cfg.n_classes = protocol.n_classes;
    cfg.regime = Regime::direct;
    const ModelFactory factory = [cfg, &large](std::uint64_t seed) {
        Rng rng(seed);
        return ClassifierModel<float>::init(cfg, large, rng);
    };
    const std::filesystem::path* log_dir = protocol.log_dir ? &*protocol.log_dir : nullptr;
    GridResult grid = grid_search(factory, splits, protocol.grid, protocol.base, standard_loss(),
                                  protocol.jobs, log_dir);
    // Retrain the winner to recover its best-epoch snapshot.
    auto trial = run_trial(factory, splits, grid.best);
    return {std::move(trial.best_model), std::move(grid)};
}

} // namespace edistill
