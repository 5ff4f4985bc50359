#include <gtest/gtest.h>

#include <cmath>
#include <fstream>

#include "easter/checkpoint.hpp"
#include "easter/error.hpp"
#include "easter/optimizer.hpp"
#include "easter/train.hpp"
#include "support.hpp"
#include "synthetic.hpp"

using namespace easter;
using easter::testing::scratch_dir;
using easter::testing::synth_model_config;
using easter::testing::synth_vocabulary;
using easter::testing::synthetic_corpus;
using easter::testing::tiny_config;

namespace {

AdamState scalar_state() {
    AdamState s;
    s.names = {"p"};
    s.m = {Tensor({1})};
    s.v = {Tensor({1})};
    return s;
}

Gradients scalar_grad(float g) {
    Gradients grads;
    grads.names = {"p"};
    grads.tensors = {Tensor({1})};
    grads.tensors[0][0] = g;
    return grads;
}

// Bitwise CRC-32 (reflected, polynomial 0xEDB88320).
std::uint32_t crc32_reference(const std::uint8_t* data, std::size_t n) {
    std::uint32_t crc = 0xFFFFFFFFu;
    for (std::size_t i = 0; i < n; ++i) {
        crc ^= data[i];
        for (int k = 0; k < 8; ++k) crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
    return ~crc;
}

void reseal(std::vector<std::uint8_t>& bytes) {
    const std::uint32_t crc = crc32_reference(bytes.data(), bytes.size() - 4);
    for (int i = 0; i < 4; ++i) bytes[bytes.size() - 4 + i] = static_cast<std::uint8_t>(crc >> (8 * i));
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

TrainConfig quick_config(std::size_t epochs) {
    TrainConfig cfg;
    cfg.batch_size = 8;
    cfg.max_epochs = epochs;
    cfg.patience = 1000;
    cfg.seed = 21;
    return cfg;
}

std::vector<double> losses(const TrainReport& r) {
    std::vector<double> out;
    for (const auto& e : r.epochs) out.push_back(e.train_loss);
    return out;
}

}  // namespace

TEST(Adam, ThreeScalarStepsMatchHandValues) {
    AdamState state = scalar_state();
    Tensor p({1});
    p[0] = 1.0f;
    std::vector<NamedTensor> params{{"p", &p}};
    const double expected[] = {0.9900000002, 0.9865439418116511, 0.9827500240835696};
    const float grads[] = {0.5f, -0.2f, 0.1f};
    for (int t = 0; t < 3; ++t) {
        adam_step(params, scalar_grad(grads[t]), state, 0.01);
        EXPECT_NEAR(p[0], expected[t], 1e-7) << "step " << t + 1;
    }
    EXPECT_EQ(state.step, 3u);
}

TEST(Adam, ZeroGradientLeavesParametersAndCountsStep) {
    Model m = Model::build(tiny_config());
    AdamState state = AdamState::for_model(m);
    Gradients g;
    for (const auto& p : m.parameters()) {
        g.names.push_back(p.name);
        g.tensors.emplace_back(p.tensor->shape());
    }
    std::vector<Tensor> before;
    for (const auto& p : m.parameters()) before.push_back(*p.tensor);
    adam_step(m.parameters(), g, state, 1e-3);
    EXPECT_EQ(state.step, 1u);
    for (std::size_t i = 0; i < before.size(); ++i) EXPECT_EQ(*m.parameters()[i].tensor, before[i]);
}

TEST(Adam, FirstStepIsLrTimesSign) {
    for (float g : {1e-3f, 0.7f, -250.0f}) {
        AdamState state = scalar_state();
        Tensor p({1});
        adam_step({{"p", &p}}, scalar_grad(g), state, 0.01);
        EXPECT_NEAR(p[0], g > 0 ? -0.01 : 0.01, 1e-6) << g;
    }
}

TEST(Adam, RejectsMismatchedGradients) {
    AdamState state = scalar_state();
    Tensor p({1});
    Gradients wrong_name = scalar_grad(1.0f);
    wrong_name.names[0] = "q";
    EXPECT_THROW(adam_step({{"p", &p}}, wrong_name, state, 0.01), ContractViolation);
    Gradients wrong_shape = scalar_grad(1.0f);
    wrong_shape.tensors[0] = Tensor({2});
    EXPECT_THROW(adam_step({{"p", &p}}, wrong_shape, state, 0.01), ContractViolation);
}

TEST(ClipGlobalNorm, ScalesOnlyAboveThreshold) {
    Gradients g;
    g.names = {"a", "b"};
    g.tensors = {Tensor({1}), Tensor({1})};
    g.tensors[0][0] = 3.0f;
    g.tensors[1][0] = 4.0f;
    EXPECT_DOUBLE_EQ(clip_global_norm(g, 10.0), 5.0);
    EXPECT_EQ(g.tensors[0][0], 3.0f);
    EXPECT_DOUBLE_EQ(clip_global_norm(g, 1.0), 5.0);
    EXPECT_NEAR(g.global_norm(), 1.0, 1e-6);
    EXPECT_NEAR(g.tensors[0][0], 0.6f, 1e-6);
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    const auto dir = scratch_dir("ckpt_roundtrip");
    Model m = Model::build(tiny_config());
    AdamState adam = AdamState::for_model(m);
    Rng rng(3);
    for (auto& t : adam.m) for (auto& v : t.data()) v = static_cast<float>(rng.normal());
    adam.step = 17;
    TrainState st;
    st.epoch = 4;
    st.best_cer = 12.5;
    st.stale_epochs = 2;
    st.lr = 5e-4;
    const Vocabulary vocab(U"abcd");
    save_checkpoint(dir / "a.ckpt", m, vocab, &adam, st);
    const Checkpoint loaded = load_checkpoint(dir / "a.ckpt");
    save_checkpoint(dir / "b.ckpt", loaded.model, loaded.vocab, loaded.adam ? &*loaded.adam : nullptr, loaded.state);
    EXPECT_EQ(read_bytes(dir / "a.ckpt"), read_bytes(dir / "b.ckpt"));

    EXPECT_EQ(loaded.state, st);
    EXPECT_EQ(loaded.vocab, vocab);
    EXPECT_EQ(to_json(loaded.model.config()), to_json(m.config()));
    ASSERT_TRUE(loaded.adam.has_value());
    EXPECT_EQ(loaded.adam->step, 17u);
    for (std::size_t i = 0; i < adam.m.size(); ++i) EXPECT_EQ(loaded.adam->m[i], adam.m[i]);
    const auto a = m.parameters();
    const auto b = loaded.model.parameters();
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_EQ(*a[i].tensor, *b[i].tensor) << a[i].name;
    const auto ab = m.buffers();
    const auto bb = loaded.model.buffers();
    ASSERT_EQ(ab.size(), bb.size());
    for (std::size_t i = 0; i < ab.size(); ++i) EXPECT_EQ(*ab[i].tensor, *bb[i].tensor) << ab[i].name;
}

TEST(Checkpoint, TrailerIsStandardCrc32) {
    Model m = Model::build(tiny_config());
    const auto bytes = encode_checkpoint(m, Vocabulary(U"abcd"), nullptr, TrainState{});
    const std::uint32_t expected = crc32_reference(bytes.data(), bytes.size() - 4);
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t(bytes[bytes.size() - 4 + i]) << (8 * i);
    EXPECT_EQ(stored, expected);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 6), std::string("ESTR2\0", 6));
}

TEST(Checkpoint, CorruptionIsDetected) {
    Model m = Model::build(tiny_config());
    const auto good = encode_checkpoint(m, Vocabulary(U"abcd"), nullptr, TrainState{});
    EXPECT_NO_THROW(decode_checkpoint(good));

    auto flipped = good;
    flipped[flipped.size() - 10] ^= 0x40;
    EXPECT_THROW(decode_checkpoint(flipped), ChecksumError);

    auto truncated = good;
    truncated.resize(good.size() / 2);
    EXPECT_THROW(decode_checkpoint(truncated), FormatError);

    auto magic = good;
    magic[0] = 'X';
    reseal(magic);
    EXPECT_THROW(decode_checkpoint(magic), FormatError);

    auto version = good;
    version[6] = 99;
    reseal(version);
    EXPECT_THROW(decode_checkpoint(version), FormatError);
}

TEST(Checkpoint, VocabularySizeMismatchIsConfigError) {
    // Model built for 4 symbols plus blank, stored with a 3-symbol vocabulary.
    Model m = Model::build(tiny_config(8, 5));
    const auto bytes = encode_checkpoint(m, Vocabulary(U"abc"), nullptr, TrainState{});
    EXPECT_THROW(decode_checkpoint(bytes), ConfigError);
}

TEST(Checkpoint, MissingFileIsIoError) {
    EXPECT_THROW(load_checkpoint(scratch_dir("ckpt_missing") / "none.ckpt"), IoError);
}

TEST(TrainConfig, JsonRoundTripAndValidation) {
    TrainConfig c;
    c.lr = 2e-3;
    c.batch_size = 4;
    c.cosine_decay = true;
    c.taco->corruption_prob = 0.4;
    c.taco->vertical = false;
    const TrainConfig back = train_config_from_json(to_json(c));
    EXPECT_EQ(to_json(back), to_json(c));
    EXPECT_FALSE(train_config_from_json({{"taco", nullptr}}).taco.has_value());
    EXPECT_FALSE(train_config_from_json({{"taco", false}}).taco.has_value());
    EXPECT_THROW(train_config_from_json({{"learning_rate", 1.0}}), ConfigError);
    EXPECT_THROW(train_config_from_json({{"patience", 0}}), ConfigError);
    EXPECT_THROW(train_config_from_json({{"weight_policy", "mystery"}}), ConfigError);
    EXPECT_THROW(train_config_from_json({{"taco", {{"orientation", "diagonal"}}}}), ConfigError);
}

TEST(TrainConfig, CosineDecaySchedule) {
    TrainConfig c;
    c.max_epochs = 10;
    EXPECT_EQ(c.lr_at(7), c.lr);
    c.cosine_decay = true;
    EXPECT_DOUBLE_EQ(c.lr_at(0), c.lr);
    EXPECT_NEAR(c.lr_at(5), c.lr / 2, 1e-15);
}

TEST(Fit, PatienceOneStopsAfterSecondEpochWithoutImprovement) {
    // A vanishing learning rate keeps the validation CER from improving.
    const auto corpus = synthetic_corpus(8, 1);
    Model m = Model::build(synth_model_config());
    TrainConfig cfg = quick_config(50);
    cfg.lr = 1e-30;
    cfg.patience = 1;
    cfg.taco.reset();
    const TrainReport r = fit(m, synth_vocabulary(), corpus, corpus, cfg);
    EXPECT_TRUE(r.early_stopped);
    ASSERT_EQ(r.epochs.size(), 2u);
    EXPECT_EQ(r.best_epoch, 1u);
    EXPECT_GE(*r.epochs[1].val_cer, *r.epochs[0].val_cer);
}

TEST(Fit, TwoRunsProduceIdenticalLossSequences) {
    const auto corpus = synthetic_corpus(12, 2);
    Model a = Model::build(synth_model_config(4));
    Model b = Model::build(synth_model_config(4));
    const auto ra = fit(a, synth_vocabulary(), corpus, corpus, quick_config(5));
    const auto rb = fit(b, synth_vocabulary(), corpus, corpus, quick_config(5));
    EXPECT_EQ(losses(ra), losses(rb));
    for (std::size_t i = 0; i < a.parameters().size(); ++i) {
        EXPECT_EQ(*a.parameters()[i].tensor, *b.parameters()[i].tensor);
    }
}

TEST(Fit, ResumeReproducesUninterruptedRun) {
    const auto corpus = synthetic_corpus(12, 3);
    const auto vocab = synth_vocabulary();
    const auto full_dir = scratch_dir("fit_full");
    const auto part_dir = scratch_dir("fit_part");

    Model full = Model::build(synth_model_config(6));
    const auto full_report = fit(full, vocab, corpus, corpus, quick_config(6), {full_dir, {}});

    Model part = Model::build(synth_model_config(6));
    fit(part, vocab, corpus, corpus, quick_config(3), {part_dir, {}});
    Checkpoint ck = load_checkpoint(part_dir / "checkpoint.last");
    ASSERT_EQ(ck.state.epoch, 3u);
    ASSERT_TRUE(ck.adam.has_value());
    const auto resumed = fit(ck.model, vocab, corpus, corpus, quick_config(6), {part_dir, {}}, *ck.adam, ck.state);

    ASSERT_EQ(resumed.epochs.size(), 3u);
    for (std::size_t i = 0; i < 3; ++i) {
        EXPECT_EQ(resumed.epochs[i].epoch, full_report.epochs[3 + i].epoch);
        EXPECT_EQ(resumed.epochs[i].train_loss, full_report.epochs[3 + i].train_loss);
        EXPECT_EQ(resumed.epochs[i].val_cer, full_report.epochs[3 + i].val_cer);
    }
    for (std::size_t i = 0; i < full.parameters().size(); ++i) {
        EXPECT_EQ(*full.parameters()[i].tensor, *ck.model.parameters()[i].tensor);
    }
    EXPECT_EQ(read_bytes(full_dir / "checkpoint.last"), read_bytes(part_dir / "checkpoint.last"));
}

TEST(Fit, WritesMetricsAndCheckpoints) {
    const auto dir = scratch_dir("fit_files");
    const auto corpus = synthetic_corpus(6, 4);
    Model m = Model::build(synth_model_config());
    fit(m, synth_vocabulary(), corpus, corpus, quick_config(3), {dir, {}});
    EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint.best"));
    EXPECT_TRUE(std::filesystem::exists(dir / "checkpoint.last"));
    std::ifstream in(dir / "metrics.jsonl");
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        const auto j = nlohmann::json::parse(line);
        ++n;
        EXPECT_EQ(j.at("epoch").get<std::size_t>(), n);
        for (const char* key : {"train_loss", "val_cer", "seconds", "skipped_samples"}) EXPECT_TRUE(j.contains(key));
    }
    EXPECT_EQ(n, 3u);
}

TEST(Fit, AllInfeasibleBatchAborts) {
    Sample s;
    s.image = GrayImage(16, 8);
    s.transcription = "abcdabcd";  // 8 symbols, 2 output frames
    Model m = Model::build(synth_model_config());
    TrainConfig cfg = quick_config(1);
    EXPECT_THROW(fit(m, synth_vocabulary(), {s}, {s}, cfg), InfeasibleAlignment);
}

TEST(Fit, RejectsVocabularyMismatchAndEmptySets) {
    const auto corpus = synthetic_corpus(2, 5);
    Model m = Model::build(synth_model_config());
    EXPECT_THROW(fit(m, Vocabulary(U"abc"), corpus, corpus, quick_config(1)), ConfigError);
    EXPECT_THROW(fit(m, synth_vocabulary(), {}, corpus, quick_config(1)), ConfigError);
}

TEST(FitProperty, FullBatchLossIsSmoothlyDecreasing) {
    // Any 20-epoch window after epoch 10 ends no more than 5% above where it started.
    const auto corpus = synthetic_corpus(16, 42);
    Model m = Model::build(synth_model_config(1));
    TrainConfig cfg = quick_config(200);
    cfg.batch_size = 16;
    cfg.eval_every = 50;
    cfg.taco.reset();
    const auto l = losses(fit(m, synth_vocabulary(), corpus, corpus, cfg));
    ASSERT_EQ(l.size(), 200u);
    for (std::size_t e = 10; e + 20 < l.size(); ++e) EXPECT_LE(l[e + 20], 1.05 * l[e]) << "epoch " << e + 1;
}
