#include "easter/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <numbers>

#include "easter/error.hpp"

namespace easter {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, std::initializer_list<const char*> allowed, const std::string& path) {
    if (!obj.is_object()) throw ConfigError(path + ": expected an object");
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        bool ok = false;
        for (const char* k : allowed) ok = ok || it.key() == k;
        if (!ok) throw ConfigError(path + "." + it.key() + ": unknown key");
    }
}

template <class T>
T get_or(const json& obj, const char* key, const std::string& path, T fallback) {
    if (!obj.contains(key)) return fallback;
    try {
        if constexpr (std::is_same_v<T, bool>) {
            if (!obj.at(key).is_boolean()) throw ConfigError("");
        } else if constexpr (std::is_integral_v<T>) {
            if (!obj.at(key).is_number_integer() || (std::is_unsigned_v<T> && obj.at(key).get<long long>() < 0)) {
                throw ConfigError("");
            }
        } else if constexpr (std::is_floating_point_v<T>) {
            if (!obj.at(key).is_number()) throw ConfigError("");
        } else {
            if (!obj.at(key).is_string()) throw ConfigError("");
        }
        return obj.at(key).get<T>();
    } catch (const std::exception&) {
        throw ConfigError(path + "." + key + ": wrong type");
    }
}

// Stream tags for Rng::derive.
enum : std::uint64_t { kShuffleStream = 1, kAugmentStream = 2, kDropoutStream = 3 };

double cer_of(Model& model, const Vocabulary& vocab, const std::vector<Sample>& samples, std::size_t batch_size) {
    const auto pairs = recognize_pairs(model, vocab, samples, batch_size);
    CerReport report;
    for (const auto& [ref, hyp] : pairs) report.add(levenshtein(ref, hyp), ref.size());
    return report.cer().value_or(0.0);
}

}  // namespace

void TrainConfig::validate() const {
    if (!(lr > 0.0)) throw ConfigError("train.lr: must be positive");
    if (batch_size < 1) throw ConfigError("train.batch_size: must be at least 1");
    if (max_epochs < 1) throw ConfigError("train.max_epochs: must be at least 1");
    if (patience < 1) throw ConfigError("train.patience: must be at least 1");
    if (eval_every < 1) throw ConfigError("train.eval_every: must be at least 1");
    make_weight_policy(weight_policy);
    if (taco && !(taco->corruption_prob >= 0.0 && taco->corruption_prob <= 1.0)) {
        throw ConfigError("train.taco.corruption_prob: must lie in [0, 1]");
    }
}

double TrainConfig::lr_at(std::size_t epoch) const {
    if (!cosine_decay) return lr;
    const double progress = static_cast<double>(epoch) / static_cast<double>(max_epochs);
    return 0.5 * lr * (1.0 + std::cos(std::numbers::pi * progress));
}

json to_json(const TacoConfig& cfg) {
    std::string orientation = cfg.vertical && cfg.horizontal ? "both" : (cfg.vertical ? "vertical" : "horizontal");
    return {{"corruption_prob", cfg.corruption_prob},
            {"max_tile_width", cfg.max_tile_width},
            {"orientation", orientation},
            {"kind", to_string(cfg.kind)},
            {"seed", cfg.seed}};
}

TacoConfig taco_config_from_json(const json& doc, const std::string& path) {
    reject_unknown(doc, {"corruption_prob", "max_tile_width", "orientation", "kind", "seed"}, path);
    TacoConfig c;
    c.corruption_prob = get_or<double>(doc, "corruption_prob", path, c.corruption_prob);
    c.max_tile_width = get_or<std::size_t>(doc, "max_tile_width", path, c.max_tile_width);
    const auto orientation = get_or<std::string>(doc, "orientation", path, "both");
    if (orientation == "both") {
        c.vertical = c.horizontal = true;
    } else if (orientation == "vertical") {
        c.vertical = true;
        c.horizontal = false;
    } else if (orientation == "horizontal") {
        c.vertical = false;
        c.horizontal = true;
    } else {
        throw ConfigError(path + ".orientation: expected vertical|horizontal|both");
    }
    try {
        c.kind = parse_corruption(get_or<std::string>(doc, "kind", path, "random"));
    } catch (const ConfigError& e) {
        throw ConfigError(path + ".kind: " + e.what());
    }
    c.seed = get_or<std::uint64_t>(doc, "seed", path, 0);
    if (!(c.corruption_prob >= 0.0 && c.corruption_prob <= 1.0)) {
        throw ConfigError(path + ".corruption_prob: must lie in [0, 1]");
    }
    return c;
}

json to_json(const TrainConfig& cfg) {
    return {{"lr", cfg.lr},
            {"batch_size", cfg.batch_size},
            {"max_epochs", cfg.max_epochs},
            {"patience", cfg.patience},
            {"eval_every", cfg.eval_every},
            {"clip_norm", cfg.clip_norm},
            {"cosine_decay", cfg.cosine_decay},
            {"seed", cfg.seed},
            {"taco", cfg.taco ? to_json(*cfg.taco) : json(nullptr)},
            {"weight_policy", cfg.weight_policy}};
}

TrainConfig train_config_from_json(const json& doc, const std::string& path) {
    reject_unknown(doc,
                   {"lr", "batch_size", "max_epochs", "patience", "eval_every", "clip_norm", "cosine_decay", "seed",
                    "taco", "weight_policy"},
                   path);
    TrainConfig c;
    c.lr = get_or<double>(doc, "lr", path, c.lr);
    c.batch_size = get_or<std::size_t>(doc, "batch_size", path, c.batch_size);
    c.max_epochs = get_or<std::size_t>(doc, "max_epochs", path, c.max_epochs);
    c.patience = get_or<std::size_t>(doc, "patience", path, c.patience);
    c.eval_every = get_or<std::size_t>(doc, "eval_every", path, c.eval_every);
    c.clip_norm = get_or<double>(doc, "clip_norm", path, c.clip_norm);
    c.cosine_decay = get_or<bool>(doc, "cosine_decay", path, c.cosine_decay);
    c.seed = get_or<std::uint64_t>(doc, "seed", path, c.seed);
    c.weight_policy = get_or<std::string>(doc, "weight_policy", path, c.weight_policy);
    if (doc.contains("taco")) {
        if (doc.at("taco").is_null() || doc.at("taco") == false) {
            c.taco.reset();
        } else {
            c.taco = taco_config_from_json(doc.at("taco"), path + ".taco");
        }
    }
    try {
        c.validate();
    } catch (const ConfigError& e) {
        throw ConfigError(std::string(e.what()));
    }
    return c;
}

CtcWeightPolicy make_weight_policy(const std::string& name) {
    if (name == "uniform") return uniform_ctc_weight;
    if (name == "length_ratio") return length_ratio_ctc_weight;
    throw ConfigError("train.weight_policy: unknown policy '" + name + "' (expected uniform|length_ratio)");
}

json to_json(const EpochRecord& r) {
    return {{"epoch", r.epoch},
            {"train_loss", r.train_loss},
            {"val_cer", r.val_cer ? json(*r.val_cer) : json(nullptr)},
            {"seconds", r.seconds},
            {"skipped_samples", r.skipped_samples}};
}

std::vector<std::string> transcribe(Model& model, const Vocabulary& vocab, const std::vector<Sample>& samples,
                                    std::size_t batch_size) {
    const auto height = static_cast<std::size_t>(model.config().input_height);
    const int blank = model.config().blank_index();
    std::vector<std::string> out;
    out.reserve(samples.size());
    Rng unused(0);
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        const std::size_t end = std::min(samples.size(), start + batch_size);
        std::vector<Tensor> frames;
        Lengths widths;
        for (std::size_t i = start; i < end; ++i) {
            frames.push_back(preprocess(load_sample_image(samples[i]), height));
            widths.push_back(frames.back().dim(0));
        }
        const std::size_t w_max = *std::max_element(widths.begin(), widths.end());
        Tensor images({frames.size(), w_max, height});
        for (std::size_t i = 0; i < frames.size(); ++i) {
            std::copy(frames[i].storage().begin(), frames[i].storage().end(), images.raw() + i * w_max * height);
        }
        const ForwardResult res = forward(model, images, widths, Mode::infer, unused);
        for (std::size_t i = 0; i < frames.size(); ++i) {
            const Label ids = greedy_decode(res.logits, i, res.out_lengths[i], blank);
            Label kept;
            for (int id : ids) {
                if (static_cast<std::size_t>(id) < vocab.size()) kept.push_back(id);
            }
            out.push_back(vocab.decode_utf8(kept));
        }
    }
    return out;
}

std::vector<TextPair> recognize_pairs(Model& model, const Vocabulary& vocab, const std::vector<Sample>& samples,
                                      std::size_t batch_size) {
    const auto hyps = transcribe(model, vocab, samples, batch_size);
    std::vector<TextPair> pairs;
    pairs.reserve(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
        pairs.emplace_back(utf8_decode(samples[i].transcription), utf8_decode(hyps[i]));
    }
    return pairs;
}

TrainReport fit(Model& model, const Vocabulary& vocab, const std::vector<Sample>& train_set,
                const std::vector<Sample>& val_set, const TrainConfig& cfg, const FitOptions& options) {
    AdamState adam = AdamState::for_model(model);
    TrainState state;
    state.lr = cfg.lr;
    return fit(model, vocab, train_set, val_set, cfg, options, adam, state);
}

TrainReport fit(Model& model, const Vocabulary& vocab, const std::vector<Sample>& train_set,
                const std::vector<Sample>& val_set, const TrainConfig& cfg, const FitOptions& options,
                AdamState& adam, TrainState& state) {
    cfg.validate();
    if (train_set.empty()) throw ConfigError("fit: empty training set");
    if (val_set.empty()) throw ConfigError("fit: empty validation set");
    if (static_cast<std::size_t>(model.config().vocab_size) != vocab.size() + 1) {
        throw ConfigError("fit: model vocab_size " + std::to_string(model.config().vocab_size) +
                          " does not match vocabulary of " + std::to_string(vocab.size()) + " symbols plus blank");
    }
    const auto height = static_cast<std::size_t>(model.config().input_height);
    const int blank = model.config().blank_index();
    const CtcWeightPolicy weight_of = make_weight_policy(cfg.weight_policy);
    const bool write_files = !options.out_dir.empty();
    if (write_files) std::filesystem::create_directories(options.out_dir);

    TrainReport report;
    report.best_cer = state.best_cer;
    const std::size_t n = train_set.size();
    const std::size_t batches = (n + cfg.batch_size - 1) / cfg.batch_size;

    for (std::size_t epoch = state.epoch; epoch < cfg.max_epochs; ++epoch) {
        const auto started = std::chrono::steady_clock::now();
        Rng shuffle = Rng::derive(cfg.seed, kShuffleStream, epoch);
        const auto order = permutation(n, shuffle);
        const double lr = cfg.lr_at(epoch);
        state.lr = lr;

        double loss_sum = 0.0;
        std::size_t loss_count = 0;
        std::size_t skipped = 0;
        for (std::size_t k = 0; k < batches; ++k) {
            std::vector<const Sample*> members;
            for (std::size_t i = k * cfg.batch_size; i < std::min(n, (k + 1) * cfg.batch_size); ++i) {
                members.push_back(&train_set[order[i]]);
            }
            Rng augment_rng = Rng::derive(cfg.seed, kAugmentStream, epoch, k);
            const Batch batch = make_batch(members, vocab, height, cfg.taco ? &*cfg.taco : nullptr, augment_rng);
            Rng dropout_rng = Rng::derive(cfg.seed, kDropoutStream, epoch, k);
            ForwardContext ctx;
            const ForwardResult out = forward(model, batch.images, batch.true_widths, Mode::train, dropout_rng, &ctx);

            std::vector<double> weights;
            for (const auto& label : batch.labels) weights.push_back(weight_of(label));
            const BatchCtcResult ctc = batch_ctc(out.logits, out.out_lengths, batch.labels, blank, weights);
            skipped += ctc.skipped.size();
            if (ctc.used == 0) {
                throw InfeasibleAlignment("fit: every sample in batch " + std::to_string(k) + " of epoch " +
                                          std::to_string(epoch + 1) +
                                          " is too long for its image width; check image widths and label lengths");
            }
            Gradients grads = backward(model, ctx, ctc.grad_logits);
            if (!grads.all_finite()) {
                throw Error("fit: non-finite gradient in batch " + std::to_string(k) + " of epoch " +
                            std::to_string(epoch + 1));
            }
            clip_global_norm(grads, cfg.clip_norm);
            adam_step(model.parameters(), grads, adam, lr);
            loss_sum += ctc.mean_loss * static_cast<double>(ctc.used);
            loss_count += ctc.used;
        }

        EpochRecord rec;
        rec.epoch = epoch + 1;
        rec.train_loss = loss_sum / static_cast<double>(loss_count);
        rec.skipped_samples = skipped;
        bool improved = false;
        const bool evaluate = (epoch + 1) % cfg.eval_every == 0 || epoch + 1 == cfg.max_epochs;
        if (evaluate) {
            rec.val_cer = cer_of(model, vocab, val_set, cfg.batch_size);
            if (!state.best_cer || *rec.val_cer < *state.best_cer) {
                state.best_cer = rec.val_cer;
                state.stale_epochs = 0;
                report.best_epoch = rec.epoch;
                improved = true;
            } else {
                ++state.stale_epochs;
            }
        }
        state.epoch = epoch + 1;
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        report.epochs.push_back(rec);
        report.best_cer = state.best_cer;

        if (write_files) {
            if (improved) save_checkpoint(options.out_dir / "checkpoint.best", model, vocab, &adam, state);
            save_checkpoint(options.out_dir / "checkpoint.last", model, vocab, &adam, state);
            std::ofstream metrics(options.out_dir / "metrics.jsonl", std::ios::app);
            if (!metrics) throw IoError("cannot append to " + (options.out_dir / "metrics.jsonl").string());
            metrics << to_json(rec).dump() << '\n';
        }
        if (options.on_epoch) options.on_epoch(rec);
        if (state.stale_epochs >= cfg.patience) {
            report.early_stopped = true;
            break;
        }
    }
    return report;
}

}  // namespace easter
