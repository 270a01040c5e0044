// SPDX-License-Identifier: Apache-2.0

#include "edistill/training.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numeric>
#include <thread>

namespace edistill {

namespace {

using Clock = std::chrono::steady_clock;

// Training randomness (shuffle, dropout) is kept apart from the
// initialisation stream the factory draws from.
Rng training_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x5eedu};
    return Rng(seq);
}

std::string fmt_num(const char* spec, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, spec, v);
    return buf;
}

std::string trial_name(const TrainConfig& c) {
    return "trial_lr" + fmt_num("%g", c.learning_rate) + "_" + std::string(decay_name(c.decay)) +
           "_drop" + fmt_num("%g", c.dropout) + "_seed" + std::to_string(c.seed) + ".tsv";
}

} // namespace

std::string_view decay_name(DecayScheme s) {
    switch (s) {
    case DecayScheme::constant:
        return "constant";
    case DecayScheme::halve_every_3:
        return "halve_every_3";
    case DecayScheme::inverse:
        return "inverse";
    }
    return "?";
}

DecayScheme parse_decay(std::string_view name) {
    if (name == "constant")
        return DecayScheme::constant;
    if (name == "halve_every_3" || name == "halve-every-3")
        return DecayScheme::halve_every_3;
    if (name == "inverse")
        return DecayScheme::inverse;
    throw ConfigError("unknown decay scheme \"" + std::string(name) + "\"");
}

double decay(double lr0, DecayScheme scheme, std::size_t epoch) {
    switch (scheme) {
    case DecayScheme::constant:
        return lr0;
    case DecayScheme::halve_every_3:
        return lr0 * std::pow(0.5, static_cast<double>(epoch / 3));
    case DecayScheme::inverse:
        return lr0 / (1.0 + 0.1 * static_cast<double>(epoch));
    }
    throw ConfigError("unknown decay scheme");
}

void TrainConfig::validate() const {
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate))
        throw ConfigError("learning rate must be finite and >= 0, got " + std::to_string(learning_rate));
    if (batch_size == 0)
        throw ConfigError("batch size must be >= 1");
    if (max_epochs == 0)
        throw ConfigError("epoch budget must be >= 1");
    if (!(dropout >= 0.0 && dropout < 1.0))
        throw ConfigError("dropout must be in [0, 1), got " + std::to_string(dropout));
}

SampleLoss standard_loss() {
    return [](const VectorF& z, std::size_t, int label, VectorF& dz) {
        const VectorF t = one_hot<float>(static_cast<std::size_t>(z.size()), static_cast<std::size_t>(label));
        const VectorF y = softmax_t(z, 1.0);
        dz = y - t;
        return cross_entropy(y, t);
    };
}

double sgd_epoch(ClassifierModel<float>& model, std::span<const Sample> samples, double lr,
                 std::size_t batch_size, double dropout, Rng& rng, const SampleLoss& loss) {
    if (batch_size == 0)
        throw ConfigError("sgd_epoch: batch size must be >= 1");
    if (!(lr >= 0.0))
        throw ConfigError("sgd_epoch: learning rate must be >= 0");
    model.config.dropout_rate = static_cast<float>(dropout);
    model.config.validate();

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);

    auto grads = Gradients<float>::zeros_like(model);
    VectorF dz;
    double total = 0.0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < order.size(); start += batch_size, ++batch_index) {
        const std::size_t end = std::min(order.size(), start + batch_size);
        grads.set_zero();
        for (std::size_t k = start; k < end; ++k) {
            const auto& s = samples[order[k]];
            auto fwd = forward(model, std::span<const std::size_t>(s.tokens), 1.0, true, rng);
            const double l = loss(fwd.cache.logits, order[k], s.label, dz);
            if (!std::isfinite(l) || !dz.allFinite())
                throw DivergenceError("non-finite loss at lr=" + fmt_num("%g", lr) + ", batch " +
                                      std::to_string(batch_index));
            total += l;
            backward_logits(model, fwd.cache, dz, grads);
        }
        grads *= 1.0f / static_cast<float>(end - start);
        apply_gradients(model, grads, static_cast<float>(lr));
    }
    return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

TrialOutcome run_trial(const ModelFactory& factory, const DatasetSplits& splits,
                       const TrainConfig& config, const SampleLoss& loss, std::ostream* log) {
    config.validate();
    const auto t0 = Clock::now();
    TrialOutcome out{{}, factory(config.seed)};
    TrialResult& r = out.result;
    r.config = config;
    ClassifierModel<float> model = out.best_model;
    Rng rng = training_rng(config.seed);

    double best = -1.0;
    std::size_t since_best = 0;
    for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
        const double lr = decay(config.learning_rate, config.decay, epoch);
        const double train_loss = sgd_epoch(model, splits.train, lr, config.batch_size, config.dropout, rng, loss);
        const double va = accuracy(model, splits.valid);
        r.train_loss.push_back(train_loss);
        r.valid_acc.push_back(va);
        if (va > best) {
            best = va;
            since_best = 0;
            r.best_epoch = epoch;
            r.best_valid_acc = va;
            r.test_acc = accuracy(model, splits.test);
            out.best_model = model;
        } else {
            ++since_best;
        }
        if (log) {
            const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
            *log << epoch << '\t' << fmt_num("%.6f", train_loss) << '\t' << fmt_num("%.4f", va) << '\t'
                 << fmt_num("%g", lr) << '\t' << fmt_num("%.3f", secs) << '\n';
        }
        if (config.patience > 0 && since_best >= config.patience)
            break;
    }
    r.final_train_acc = accuracy(model, splits.train);
    r.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    return out;
}

void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& f) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> workers;
    for (std::size_t w = 0; w < jobs; ++w) {
        workers.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    f(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error)
                        error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : workers)
        t.join();
    if (error)
        std::rethrow_exception(error);
}

GridResult grid_search(const ModelFactory& factory, const DatasetSplits& splits, const GridSpec& grid,
                       const TrainConfig& base, const SampleLoss& loss, std::size_t jobs,
                       const std::filesystem::path* log_dir) {
    if (grid.size() == 0)
        throw ConfigError("grid_search: empty grid");
    std::vector<double> dropouts = grid.dropouts;
    std::sort(dropouts.begin(), dropouts.end());

    std::size_t n_classes = factory(base.seed).config.n_classes;
    const double underfit_threshold = 100.0 / static_cast<double>(n_classes) + 5.0;

    // One chain per learning rate: dropout ascending, schemes inner.
    std::vector<std::vector<TrialResult>> chains(grid.learning_rates.size());
    parallel_for(chains.size(), jobs, [&](std::size_t li) {
        bool underfit = false;
        for (double d : dropouts) {
            const bool skip_level = underfit;
            for (DecayScheme scheme : grid.schemes) {
                TrainConfig cfg = base;
                cfg.learning_rate = grid.learning_rates[li];
                cfg.decay = scheme;
                cfg.dropout = d;
                TrialResult r;
                if (skip_level) {
                    r.config = cfg;
                    r.skipped = true;
                    r.diagnostic = "skipped: lower dropout already underfits at this lr";
                } else {
                    std::ofstream log_file;
                    if (log_dir)
                        log_file.open(*log_dir / trial_name(cfg));
                    try {
                        r = run_trial(factory, splits, cfg, loss, log_dir ? &log_file : nullptr).result;
                        if (r.final_train_acc < underfit_threshold)
                            underfit = true;
                    } catch (const DivergenceError& e) {
                        r = TrialResult{};
                        r.config = cfg;
                        r.diverged = true;
                        r.diagnostic = e.what();
                    }
                }
                chains[li].push_back(std::move(r));
            }
        }
    });

    GridResult out;
    const TrialResult* best = nullptr;
    auto better = [](const TrialResult& a, const TrialResult& b) {
        if (a.best_valid_acc != b.best_valid_acc)
            return a.best_valid_acc > b.best_valid_acc;
        if (a.config.learning_rate != b.config.learning_rate)
            return a.config.learning_rate < b.config.learning_rate;
        return a.config.dropout < b.config.dropout;
    };
    for (auto& chain : chains)
        for (auto& r : chain)
            out.trials.push_back(std::move(r));
    std::string diagnostics;
    for (const auto& r : out.trials) {
        if (r.skipped)
            continue;
        if (r.diverged) {
            diagnostics += "\n  " + r.diagnostic;
            continue;
        }
        if (!best || better(r, *best))
            best = &r;
    }
    if (!best)
        throw DivergenceError("grid_search: every trial diverged:" + diagnostics);
    out.best = best->config;
    out.best_trial = *best;
    return out;
}

std::pair<double, double> mean_stddev(std::span<const double> xs) {
    if (xs.empty())
        return {0.0, 0.0};
    const double mean = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() < 2)
        return {mean, 0.0};
    double ss = 0.0;
    for (double x : xs)
        ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(xs.size() - 1))};
}

RestartOutcome multi_restart(const ModelFactory& factory, const DatasetSplits& splits,
                             const TrainConfig& config, const std::vector<std::uint64_t>& seeds,
                             const SampleLoss& loss, std::size_t jobs,
                             const std::filesystem::path* log_dir) {
    if (seeds.empty())
        throw ConfigError("multi_restart: no seeds");
    for (std::size_t i = 0; i < seeds.size(); ++i)
        for (std::size_t j = i + 1; j < seeds.size(); ++j)
            if (seeds[i] == seeds[j])
                throw ConfigError("multi_restart: seeds must be distinct (" +
                                  std::to_string(seeds[i]) + " repeats)");

    std::vector<std::optional<TrialOutcome>> runs(seeds.size());
    parallel_for(seeds.size(), jobs, [&](std::size_t i) {
        TrainConfig cfg = config;
        cfg.seed = seeds[i];
        std::ofstream log_file;
        if (log_dir)
            log_file.open(*log_dir / ("restart_" + trial_name(cfg)));
        runs[i] = run_trial(factory, splits, cfg, loss, log_dir ? &log_file : nullptr);
    });

    RestartOutcome out{{}, runs.front()->best_model};
    AggregateResult& agg = out.aggregate;
    std::vector<double> accs;
    for (std::size_t i = 0; i < runs.size(); ++i) {
        accs.push_back(runs[i]->result.test_acc);
        agg.per_seed.push_back(runs[i]->result);
        if (runs[i]->result.best_valid_acc > runs[agg.best_valid_index]->result.best_valid_acc)
            agg.best_valid_index = i;
    }
    std::tie(agg.mean, agg.stddev) = mean_stddev(accs);
    agg.best_valid_test_acc = accs[agg.best_valid_index];
    out.best_model = std::move(runs[agg.best_valid_index]->best_model);
    return out;
}

} // namespace edistill
