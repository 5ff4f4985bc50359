#include "easter/cli.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "easter/augment.hpp"
#include "easter/checkpoint.hpp"
#include "easter/data.hpp"
#include "easter/error.hpp"
#include "easter/eval.hpp"
#include "easter/model.hpp"
#include "easter/train.hpp"
#include "easter/version.hpp"

namespace easter {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct DataConfig {
    std::string vocabulary = "iam";  // "iam" or a vocabulary file path
    std::size_t long_line_gap = kDefaultLongLineGap;
    std::size_t long_lines = 0;
    double fraction = 1.0;
};

struct RunConfig {
    ModelConfig model;
    TrainConfig train;
    DataConfig data;
    fs::path base_dir;
};

json to_json(const DataConfig& d) {
    return {{"vocabulary", d.vocabulary},
            {"long_line_gap", d.long_line_gap},
            {"long_lines", d.long_lines},
            {"fraction", d.fraction}};
}

json to_json(const RunConfig& c) {
    return {{"model", easter::to_json(c.model)}, {"train", easter::to_json(c.train)}, {"data", to_json(c.data)}};
}

DataConfig data_config_from_json(const json& doc) {
    if (!doc.is_object()) throw ConfigError("data: expected an object");
    DataConfig d;
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        const std::string& key = it.key();
        const json& v = it.value();
        if (key == "vocabulary") {
            if (!v.is_string()) throw ConfigError("data.vocabulary: expected a string");
            d.vocabulary = v.get<std::string>();
        } else if (key == "long_line_gap" || key == "long_lines") {
            if (!v.is_number_unsigned()) throw ConfigError("data." + key + ": expected a non-negative integer");
            (key == "long_lines" ? d.long_lines : d.long_line_gap) = v.get<std::size_t>();
        } else if (key == "fraction") {
            if (!v.is_number()) throw ConfigError("data.fraction: expected a number");
            d.fraction = v.get<double>();
        } else {
            throw ConfigError("data." + key + ": unknown key");
        }
    }
    return d;
}

void check_fraction(double f) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("data.fraction: must be in (0, 1]");
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    if (!doc.is_object()) throw ConfigError(path.string() + ": top level must be an object");
    for (auto it = doc.begin(); it != doc.end(); ++it) {
        if (it.key() != "model" && it.key() != "train" && it.key() != "data") {
            throw ConfigError(path.string() + ": " + it.key() + ": unknown key (expected model, train, data)");
        }
    }
    if (!doc.contains("model")) throw ConfigError(path.string() + ": model: required");
    RunConfig c;
    c.base_dir = path.parent_path();
    try {
        c.model = model_config_from_json(doc.at("model"), "model");
        if (doc.contains("train")) c.train = train_config_from_json(doc.at("train"), "train");
        if (doc.contains("data")) c.data = data_config_from_json(doc.at("data"));
        check_fraction(c.data.fraction);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    return c;
}

Vocabulary resolve_vocabulary(const RunConfig& c) {
    Vocabulary vocab;
    if (c.data.vocabulary == "iam") {
        vocab = Vocabulary::iam();
    } else {
        fs::path p = c.data.vocabulary;
        if (p.is_relative()) p = c.base_dir / p;
        vocab = Vocabulary::load(p);
    }
    if (static_cast<std::size_t>(c.model.vocab_size) != vocab.size() + 1) {
        throw ConfigError("model.vocab_size is " + std::to_string(c.model.vocab_size) + " but the vocabulary has " +
                          std::to_string(vocab.size()) + " symbols (expected vocab_size = symbols + 1 for the blank)");
    }
    return vocab;
}

json run_manifest(const std::string& command, const std::vector<std::string>& argv, json config, json seeds,
                  json inputs, json outputs) {
    return {{"command", command},   {"engine_version", kEngineVersion}, {"argv", argv},
            {"config", config},     {"seeds", seeds},                   {"inputs", inputs},
            {"outputs", outputs}};
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out << text;
}

void write_json(const fs::path& path, const json& doc) { write_text(path, doc.dump(2) + "\n"); }

std::string fmt_double(double v, int digits) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(digits);
    s << v;
    return s.str();
}

// -- train ------------------------------------------------------------------

struct TrainArgs {
    std::string config, train_manifest, val_manifest, out, resume;
    std::optional<double> fraction;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> long_lines, max_epochs, batch_size;
    bool no_taco = false;
};

int cmd_train(const TrainArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
    RunConfig cfg = load_run_config(a.config);
    if (a.seed) {
        cfg.train.seed = *a.seed;
        cfg.model.seed = *a.seed;
    }
    if (a.fraction) cfg.data.fraction = *a.fraction;
    check_fraction(cfg.data.fraction);
    if (a.long_lines) cfg.data.long_lines = *a.long_lines;
    if (a.max_epochs) cfg.train.max_epochs = *a.max_epochs;
    if (a.batch_size) cfg.train.batch_size = *a.batch_size;
    if (a.no_taco) cfg.train.taco.reset();
    cfg.train.validate();
    const Vocabulary vocab = resolve_vocabulary(cfg);

    std::vector<Sample> train_set = load_manifest(a.train_manifest, &vocab, "train");
    std::vector<Sample> val_set = load_manifest(a.val_manifest, &vocab, "val");
    const std::size_t full_size = train_set.size();
    if (cfg.data.fraction < 1.0) train_set = few_shot_subset(train_set, cfg.data.fraction, cfg.train.seed);
    const std::size_t subset_size = train_set.size();
    preload_images(train_set);
    preload_images(val_set);
    if (cfg.data.long_lines > 0) {
        if (!vocab.contains(U' ')) throw ConfigError("data.long_lines: the vocabulary has no space symbol");
        Rng rng = Rng::derive(cfg.train.seed, 4);
        auto extra = synth_long_lines(train_set, cfg.data.long_lines, cfg.data.long_line_gap, rng);
        train_set.insert(train_set.end(), std::make_move_iterator(extra.begin()),
                         std::make_move_iterator(extra.end()));
    }

    const fs::path out_dir = a.out;
    fs::create_directories(out_dir);
    Model model;
    AdamState adam;
    TrainState state;
    if (!a.resume.empty()) {
        Checkpoint ck = load_checkpoint(a.resume);
        if (!(ck.model.config() == cfg.model)) {
            throw ConfigError("--resume: checkpoint model config differs from the resolved config");
        }
        if (!(ck.vocab == vocab)) throw ConfigError("--resume: checkpoint vocabulary differs from the configured one");
        if (!ck.adam) throw ConfigError("--resume: checkpoint carries no optimizer state");
        model = std::move(ck.model);
        adam = std::move(*ck.adam);
        state = ck.state;
    } else {
        model = Model::build(cfg.model);
        adam = AdamState::for_model(model);
        state.lr = cfg.train.lr;
        std::error_code ec;
        fs::remove(out_dir / "metrics.jsonl", ec);
    }

    const json inputs = {{"config", a.config},
                         {"train_manifest", a.train_manifest},
                         {"val_manifest", a.val_manifest},
                         {"resume", a.resume.empty() ? json(nullptr) : json(a.resume)},
                         {"train_samples_total", full_size},
                         {"train_samples_subset", subset_size},
                         {"train_samples_used", train_set.size()},
                         {"val_samples", val_set.size()}};
    const json outputs = {{"checkpoint_best", (out_dir / "checkpoint.best").string()},
                          {"checkpoint_last", (out_dir / "checkpoint.last").string()},
                          {"metrics", (out_dir / "metrics.jsonl").string()}};
    write_json(out_dir / "run.json", run_manifest("train", argv, to_json(cfg),
                                                  {{"train", cfg.train.seed}, {"model", cfg.model.seed}}, inputs,
                                                  outputs));

    out << "training on " << train_set.size() << " samples (" << subset_size << " of " << full_size
        << " from the manifest), validating on " << val_set.size() << ", " << model.count_params()
        << " parameters\n";
    FitOptions options;
    options.out_dir = out_dir;
    options.on_epoch = [&](const EpochRecord& r) {
        out << "epoch " << r.epoch << " loss " << fmt_double(r.train_loss, 4) << " val_cer "
            << (r.val_cer ? fmt_double(*r.val_cer, 2) : std::string("-")) << " skipped " << r.skipped_samples
            << " (" << fmt_double(r.seconds, 1) << "s)\n";
        out.flush();
    };
    const TrainReport report = fit(model, vocab, train_set, val_set, cfg.train, options, adam, state);
    out << (report.early_stopped ? "early stop" : "done") << ": best val CER "
        << (report.best_cer ? fmt_double(*report.best_cer, 2) : std::string("-")) << "\n";
    return kExitOk;
}

// -- eval -------------------------------------------------------------------

int cmd_eval(const std::string& ckpt, const std::string& manifest, bool buckets, bool as_json,
             const std::string& out_dir, std::size_t batch_size, const std::vector<std::string>& argv,
             std::ostream& out) {
    Checkpoint ck = load_checkpoint(ckpt);
    const auto samples = load_manifest(manifest, &ck.vocab, "eval");
    if (samples.empty()) throw DataError("manifest " + manifest + " has no samples");
    const auto pairs = recognize_pairs(ck.model, ck.vocab, samples, batch_size);
    const CerReport total = corpus_cer(pairs);
    std::vector<LengthBucket> by_length;
    if (buckets) by_length = bucketed_cer(pairs);

    json report = {{"total", to_json(total)}};
    if (buckets) report["buckets"] = to_json(by_length);
    const std::string table = format_table(total, buckets ? &by_length : nullptr);
    if (as_json) {
        out << report.dump(2) << "\n";
    } else {
        out << table;
    }
    if (!out_dir.empty()) {
        const fs::path dir = out_dir;
        fs::create_directories(dir);
        write_json(dir / "report.json", report);
        write_text(dir / "report.txt", table);
        json outputs = {{"report_json", (dir / "report.json").string()}, {"report_txt", (dir / "report.txt").string()}};
        if (buckets) {
            write_text(dir / "buckets.svg", bucket_chart_svg(by_length));
            outputs["buckets_svg"] = (dir / "buckets.svg").string();
        }
        write_json(dir / "run.json", run_manifest("eval", argv, {{"model", to_json(ck.model.config())}}, json::object(),
                                                  {{"checkpoint", ckpt}, {"manifest", manifest}}, outputs));
    }
    return kExitOk;
}

// -- infer ------------------------------------------------------------------

int cmd_infer(const std::string& ckpt, const std::string& image, const std::string& out_dir,
              const std::vector<std::string>& argv, std::ostream& out) {
    const fs::path target = image;
    std::vector<Sample> samples;
    const bool directory = fs::is_directory(target);
    if (directory) {
        std::vector<fs::path> files;
        for (const auto& entry : fs::directory_iterator(target)) {
            if (entry.is_regular_file() && entry.path().extension() == ".pgm") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end());
        for (const auto& f : files) samples.push_back({f, std::nullopt, "", ""});
    } else {
        samples.push_back({target, std::nullopt, "", ""});
    }
    for (auto& s : samples) s.image = read_pgm(s.image_path);
    Checkpoint ck = load_checkpoint(ckpt);
    const auto texts = transcribe(ck.model, ck.vocab, samples);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (directory) out << samples[i].image_path.string() << '\t';
        out << texts[i] << '\n';
    }
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json(fs::path(out_dir) / "run.json",
                   run_manifest("infer", argv, {{"model", to_json(ck.model.config())}}, json::object(),
                                {{"checkpoint", ckpt}, {"image", image}}, json::object()));
    }
    return kExitOk;
}

// -- augment ----------------------------------------------------------------

struct AugmentArgs {
    std::string image, out, preview, kind = "random", orient = "both";
    double cp = 0.25;
    std::size_t tmax = 0;
    std::uint64_t seed = 0;
};

int cmd_augment(const AugmentArgs& a, const std::vector<std::string>& argv, std::ostream& out) {
    TacoConfig cfg = taco_config_from_json({{"corruption_prob", a.cp},
                                            {"max_tile_width", a.tmax},
                                            {"orientation", a.orient},
                                            {"kind", a.kind},
                                            {"seed", a.seed}},
                                           "augment");
    const GrayImage before = read_pgm(a.image);
    cfg.validate(before.height);
    Rng rng(cfg.seed);
    TacoTrace trace;
    const GrayImage after = taco(before, cfg, rng, &trace);
    write_pgm(after, a.out);
    fs::path preview_path = a.preview;
    if (preview_path.empty()) {
        preview_path = a.out;
        preview_path.replace_extension(".preview.pgm");
    }
    write_pgm(preview_image(before, after), preview_path);
    fs::path manifest_path = a.out;
    manifest_path += ".run.json";
    write_json(manifest_path, run_manifest("augment", argv, {{"taco", to_json(cfg)}}, {{"taco", cfg.seed}},
                                           {{"image", a.image}},
                                           {{"image", a.out}, {"preview", preview_path.string()}}));
    out << "corrupted " << trace.corrupted.size() << " of " << trace.tiles << " tiles\n";
    return kExitOk;
}

// -- count-params -----------------------------------------------------------

int cmd_count_params(const std::string& config, const std::string& out_dir, const std::vector<std::string>& argv,
                     std::ostream& out) {
    const RunConfig cfg = load_run_config(config);
    const Model model = Model::build(cfg.model);
    const std::size_t count = model.count_params();
    out << count << '\n';
    if (!out_dir.empty()) {
        fs::create_directories(out_dir);
        write_json(fs::path(out_dir) / "run.json", run_manifest("count-params", argv, to_json(cfg),
                                                                {{"model", cfg.model.seed}}, {{"config", config}},
                                                                {{"count", count}}));
    }
    return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    std::vector<std::string> args(argv, argv + argc);
    CLI::App app{"Line-level handwritten text recognition engine", "easter"};
    app.require_subcommand(1);

    TrainArgs train;
    auto* train_cmd = app.add_subcommand("train", "Train a model");
    train_cmd->add_option("--config", train.config, "Config JSON")->required();
    train_cmd->add_option("--train-manifest", train.train_manifest, "Training manifest")->required();
    train_cmd->add_option("--val-manifest", train.val_manifest, "Validation manifest")->required();
    train_cmd->add_option("--out", train.out, "Output directory")->required();
    train_cmd->add_option("--fraction", train.fraction, "Train on floor(F*N) samples");
    train_cmd->add_option("--seed", train.seed, "Seed for model init, shuffling and augmentation");
    train_cmd->add_option("--resume", train.resume, "Resume from a checkpoint");
    train_cmd->add_option("--long-lines", train.long_lines, "Append N synthesized long lines");
    train_cmd->add_option("--max-epochs", train.max_epochs, "Override train.max_epochs");
    train_cmd->add_option("--batch-size", train.batch_size, "Override train.batch_size");
    train_cmd->add_flag("--no-taco", train.no_taco, "Disable augmentation");

    std::string ckpt, manifest, out_dir;
    bool buckets = false, as_json = false;
    std::size_t batch_size = 32;
    auto* eval_cmd = app.add_subcommand("eval", "Greedy-decode a manifest and report CER");
    eval_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
    eval_cmd->add_option("--manifest", manifest, "Manifest")->required();
    eval_cmd->add_flag("--buckets", buckets, "Add the reference-length bucket table");
    eval_cmd->add_flag("--json", as_json, "Print the report as JSON");
    eval_cmd->add_option("--batch-size", batch_size, "Inference batch size");
    eval_cmd->add_option("--out", out_dir, "Write report files and run.json here");

    std::string image;
    auto* infer_cmd = app.add_subcommand("infer", "Transcribe an image or a directory of images");
    infer_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
    infer_cmd->add_option("--image", image, "PGM image or directory")->required();
    infer_cmd->add_option("--out", out_dir, "Write run.json here");

    AugmentArgs aug;
    auto* aug_cmd = app.add_subcommand("augment", "Apply TACo to one image and write a preview");
    aug_cmd->add_option("--image", aug.image, "Input PGM")->required();
    aug_cmd->add_option("--out", aug.out, "Output PGM")->required();
    aug_cmd->add_option("--cp", aug.cp, "Corruption probability");
    aug_cmd->add_option("--tmax", aug.tmax, "Maximum tile width in pixels (0: image height)");
    aug_cmd->add_option("--kind", aug.kind, "black|white|mean|random|miscellaneous");
    aug_cmd->add_option("--orient", aug.orient, "vertical|horizontal|both");
    aug_cmd->add_option("--seed", aug.seed, "Seed");
    aug_cmd->add_option("--preview", aug.preview, "Preview path (default: <out>.preview.pgm)");

    std::string config;
    auto* count_cmd = app.add_subcommand("count-params", "Print the trainable parameter count");
    count_cmd->add_option("--config", config, "Config JSON")->required();
    count_cmd->add_option("--out", out_dir, "Write run.json here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitUsage;
    }

    try {
        if (train_cmd->parsed()) return cmd_train(train, args, out);
        if (eval_cmd->parsed()) return cmd_eval(ckpt, manifest, buckets, as_json, out_dir, batch_size, args, out);
        if (infer_cmd->parsed()) return cmd_infer(ckpt, image, out_dir, args, out);
        if (aug_cmd->parsed()) return cmd_augment(aug, args, out);
        if (count_cmd->parsed()) return cmd_count_params(config, out_dir, args, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const DataError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const IoError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitFailure;
    }
    return kExitUsage;
}

}  // namespace easter
