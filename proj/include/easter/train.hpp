#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "easter/augment.hpp"
#include "easter/checkpoint.hpp"
#include "easter/ctc.hpp"
#include "easter/data.hpp"
#include "easter/eval.hpp"
#include "easter/model.hpp"
#include "easter/optimizer.hpp"

namespace easter {

struct TrainConfig {
    double lr = 1e-3;
    std::size_t batch_size = 32;
    std::size_t max_epochs = 200;
    std::size_t patience = 20;
    std::size_t eval_every = 1;  // epochs between validation passes
    double clip_norm = 5.0;      // <= 0 disables clipping
    bool cosine_decay = false;
    std::uint64_t seed = 0;
    std::optional<TacoConfig> taco = TacoConfig{};
    std::string weight_policy = "uniform";  // uniform | length_ratio

    /// Throws ConfigError.
    void validate() const;
    /// Learning rate used during `epoch` (0-based).
    double lr_at(std::size_t epoch) const;
};

nlohmann::json to_json(const TrainConfig& cfg);
/// Unknown keys are rejected; errors carry the field path.
TrainConfig train_config_from_json(const nlohmann::json& doc, const std::string& path = "train");
nlohmann::json to_json(const TacoConfig& cfg);
TacoConfig taco_config_from_json(const nlohmann::json& doc, const std::string& path = "taco");

CtcWeightPolicy make_weight_policy(const std::string& name);

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    std::optional<double> val_cer;
    double seconds = 0.0;
    std::size_t skipped_samples = 0;
};

nlohmann::json to_json(const EpochRecord& record);

struct TrainReport {
    std::vector<EpochRecord> epochs;
    std::optional<double> best_cer;
    std::size_t best_epoch = 0;
    bool early_stopped = false;
};

struct FitOptions {
    /// checkpoint.best, checkpoint.last and metrics.jsonl go here; empty
    /// means nothing is written.
    std::filesystem::path out_dir;
    std::function<void(const EpochRecord&)> on_epoch;
};

/// Runs epochs until max_epochs or early stopping. `adam` and `state` carry
/// optimizer moments and progress; pass the ones restored from a checkpoint
/// to resume. Every random draw is keyed by (seed, epoch, batch), so a
/// resumed run continues exactly as an uninterrupted one would.
TrainReport fit(Model& model, const Vocabulary& vocab, const std::vector<Sample>& train_set,
                const std::vector<Sample>& val_set, const TrainConfig& cfg, const FitOptions& options,
                AdamState& adam, TrainState& state);

/// Same, starting from fresh optimizer state.
TrainReport fit(Model& model, const Vocabulary& vocab, const std::vector<Sample>& train_set,
                const std::vector<Sample>& val_set, const TrainConfig& cfg, const FitOptions& options = {});

/// Greedy transcriptions in sample order, infer mode.
std::vector<std::string> transcribe(Model& model, const Vocabulary& vocab, const std::vector<Sample>& samples,
                                    std::size_t batch_size = 32);

/// Reference/hypothesis pairs over `samples`.
std::vector<TextPair> recognize_pairs(Model& model, const Vocabulary& vocab, const std::vector<Sample>& samples,
                                      std::size_t batch_size = 32);

}  // namespace easter
