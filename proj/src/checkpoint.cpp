#include "easter/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>

#include <zlib.h>

#include "easter/error.hpp"

namespace easter {

namespace {

using nlohmann::json;

constexpr char kMagic[6] = {'E', 'S', 'T', 'R', '2', '\0'};

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

class Writer {
public:
    template <class T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        bytes.insert(bytes.end(), p, p + sizeof(T));
    }
    void put_bytes(const void* data, std::size_t n) {
        const auto* p = static_cast<const std::uint8_t*>(data);
        bytes.insert(bytes.end(), p, p + n);
    }
    std::vector<std::uint8_t> bytes;
};

class Reader {
public:
    Reader(const std::vector<std::uint8_t>& bytes, std::size_t end) : bytes_(bytes), end_(end) {}

    template <class T>
    T get(const char* what) {
        T value;
        std::memcpy(&value, take(sizeof(T), what), sizeof(T));
        return value;
    }
    const std::uint8_t* take(std::size_t n, const char* what) {
        if (n > end_ - pos_) throw FormatError(std::string("checkpoint truncated while reading ") + what);
        const std::uint8_t* p = bytes_.data() + pos_;
        pos_ += n;
        return p;
    }
    std::size_t remaining() const { return end_ - pos_; }

private:
    const std::vector<std::uint8_t>& bytes_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
    uLong crc = crc32(0L, Z_NULL, 0);
    // zlib takes uInt lengths; feed in chunks.
    while (n > 0) {
        const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
        crc = crc32(crc, data, chunk);
        data += chunk;
        n -= chunk;
    }
    return static_cast<std::uint32_t>(crc);
}

void put_tensor(Writer& w, const std::string& name, const Tensor& t) {
    w.put(static_cast<std::uint32_t>(name.size()));
    w.put_bytes(name.data(), name.size());
    w.put(static_cast<std::uint32_t>(t.rank()));
    for (auto d : t.shape()) w.put(static_cast<std::uint64_t>(d));
    w.put_bytes(t.raw(), t.size() * sizeof(float));
}

json header_json(const Model& model, const Vocabulary& vocab, const AdamState* adam, const TrainState& state) {
    json train = {{"epoch", state.epoch}, {"stale_epochs", state.stale_epochs}, {"lr", state.lr}};
    train["best_cer"] = state.best_cer ? json(*state.best_cer) : json(nullptr);
    json header = {{"config", to_json(model.config())}, {"vocabulary", vocab.to_strings()}, {"train_state", train}};
    if (adam) {
        header["adam"] = {{"step", adam->step},
                          {"beta1", adam->config.beta1},
                          {"beta2", adam->config.beta2},
                          {"epsilon", adam->config.epsilon}};
    } else {
        header["adam"] = nullptr;
    }
    return header;
}

}  // namespace

std::vector<std::uint8_t> encode_checkpoint(const Model& model, const Vocabulary& vocab, const AdamState* adam,
                                            const TrainState& state) {
    Writer w;
    w.put_bytes(kMagic, sizeof(kMagic));
    w.put(kCheckpointVersion);
    const std::string header = header_json(model, vocab, adam, state).dump();
    w.put(static_cast<std::uint64_t>(header.size()));
    w.put_bytes(header.data(), header.size());

    const auto params = model.parameters();
    const auto buffers = model.buffers();
    std::uint64_t count = params.size() + buffers.size();
    if (adam) count += adam->m.size() + adam->v.size();
    w.put(count);
    for (const auto& p : params) put_tensor(w, p.name, *p.tensor);
    for (const auto& b : buffers) put_tensor(w, b.name, *b.tensor);
    if (adam) {
        for (std::size_t i = 0; i < adam->m.size(); ++i) put_tensor(w, "adam.m." + adam->names[i], adam->m[i]);
        for (std::size_t i = 0; i < adam->v.size(); ++i) put_tensor(w, "adam.v." + adam->names[i], adam->v[i]);
    }
    w.put(crc32_of(w.bytes.data(), w.bytes.size()));
    return std::move(w.bytes);
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
    if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
        throw FormatError("not a checkpoint (bad magic)");
    }
    if (bytes.size() < sizeof(kMagic) + 4 + 4) throw FormatError("checkpoint truncated");
    Reader r(bytes, bytes.size() - 4);
    r.take(sizeof(kMagic), "magic");
    const auto version = r.get<std::uint32_t>("version");
    if (version != kCheckpointVersion) {
        throw FormatError("unsupported checkpoint version " + std::to_string(version));
    }
    std::uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    if (crc32_of(bytes.data(), bytes.size() - 4) != stored_crc) throw ChecksumError("checkpoint checksum mismatch");

    const auto header_len = r.get<std::uint64_t>("header length");
    if (header_len > r.remaining()) throw FormatError("checkpoint truncated while reading header");
    const auto* header_bytes = r.take(static_cast<std::size_t>(header_len), "header");
    json header;
    try {
        header = json::parse(header_bytes, header_bytes + header_len);
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
    }

    Checkpoint ck;
    try {
        ck.vocab = Vocabulary::from_strings(header.at("vocabulary").get<std::vector<std::string>>());
        const json& ts = header.at("train_state");
        ck.state.epoch = ts.at("epoch").get<std::uint64_t>();
        ck.state.stale_epochs = ts.at("stale_epochs").get<std::uint64_t>();
        ck.state.lr = ts.at("lr").get<double>();
        if (!ts.at("best_cer").is_null()) ck.state.best_cer = ts.at("best_cer").get<double>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint header: ") + e.what());
    }
    const ModelConfig config = model_config_from_json(header.at("config"), "checkpoint.config");
    if (static_cast<std::size_t>(config.vocab_size) != ck.vocab.size() + 1) {
        throw ConfigError("checkpoint: config vocab_size " + std::to_string(config.vocab_size) +
                          " does not match the stored vocabulary of " + std::to_string(ck.vocab.size()) +
                          " symbols plus blank");
    }
    ck.model = Model::build(config);

    std::map<std::string, Tensor> tensors;
    const auto count = r.get<std::uint64_t>("tensor count");
    for (std::uint64_t i = 0; i < count; ++i) {
        const auto name_len = r.get<std::uint32_t>("tensor name length");
        const auto* name_ptr = r.take(name_len, "tensor name");
        std::string name(reinterpret_cast<const char*>(name_ptr), name_len);
        const auto rank = r.get<std::uint32_t>("tensor rank");
        Shape shape;
        std::size_t elements = 1;
        for (std::uint32_t k = 0; k < rank; ++k) {
            const auto d = r.get<std::uint64_t>("tensor extent");
            if (d > r.remaining()) throw FormatError("checkpoint truncated in tensor " + name);
            shape.push_back(static_cast<std::size_t>(d));
            elements *= static_cast<std::size_t>(d);
        }
        if (elements > r.remaining() / sizeof(float)) throw FormatError("checkpoint truncated in tensor " + name);
        std::vector<float> data(elements);
        std::memcpy(data.data(), r.take(elements * sizeof(float), "tensor data"), elements * sizeof(float));
        if (!tensors.emplace(name, Tensor(std::move(shape), std::move(data))).second) {
            throw FormatError("checkpoint: duplicate tensor " + name);
        }
    }
    if (r.remaining() != 0) throw FormatError("checkpoint: trailing bytes after tensor table");

    auto restore = [&](const std::string& name, Tensor& dst) {
        auto it = tensors.find(name);
        if (it == tensors.end()) throw FormatError("checkpoint: missing tensor " + name);
        if (it->second.shape() != dst.shape()) {
            throw ConfigError("checkpoint: tensor " + name + " has shape " + shape_string(it->second.shape()) +
                              " but the stored config implies " + shape_string(dst.shape()));
        }
        dst = std::move(it->second);
        tensors.erase(it);
    };
    for (auto& p : ck.model.parameters()) restore(p.name, *p.tensor);
    for (auto& b : ck.model.buffers()) restore(b.name, *b.tensor);
    if (!header.at("adam").is_null()) {
        const json& a = header.at("adam");
        AdamConfig cfg;
        cfg.beta1 = a.at("beta1").get<double>();
        cfg.beta2 = a.at("beta2").get<double>();
        cfg.epsilon = a.at("epsilon").get<double>();
        AdamState state = AdamState::for_model(ck.model, cfg);
        state.step = a.at("step").get<std::uint64_t>();
        for (std::size_t i = 0; i < state.names.size(); ++i) {
            restore("adam.m." + state.names[i], state.m[i]);
            restore("adam.v." + state.names[i], state.v[i]);
        }
        ck.adam = std::move(state);
    }
    if (!tensors.empty()) throw FormatError("checkpoint: unexpected tensor " + tensors.begin()->first);
    return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Model& model, const Vocabulary& vocab,
                     const AdamState* adam, const TrainState& state) {
    const auto bytes = encode_checkpoint(model, vocab, adam, state);
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write checkpoint " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw IoError("short write to " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return decode_checkpoint(bytes);
}

}  // namespace easter
