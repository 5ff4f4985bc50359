#include "easter/model.hpp"

#include <atomic>
#include <cmath>

#include "easter/error.hpp"

namespace easter {

namespace {

std::atomic<std::uint64_t> next_model_id{1};

void init_normal(Tensor& t, double stddev, Rng& rng) {
    for (auto& v : t.data()) v = static_cast<float>(rng.normal() * stddev);
}

// He-style scaling for layers feeding a ReLU; plain fan-in scaling otherwise.
void init_conv(ConvParams& p, Rng& rng, bool relu_follows) {
    const double fan_in = static_cast<double>(p.kernel() * p.in_channels());
    init_normal(p.weight, std::sqrt((relu_follows ? 2.0 : 1.0) / fan_in), rng);
}

BlockAParams make_block_a(std::size_t in_ch, const BlockSpec& spec, NormKind norm, Rng& rng) {
    BlockAParams p;
    p.conv = ConvParams::zeros(static_cast<std::size_t>(spec.kernel), in_ch, static_cast<std::size_t>(spec.out_channels),
                               spec.stride, spec.dilation);
    init_conv(p.conv, rng, true);
    p.norm = NormParams::make(norm, static_cast<std::size_t>(spec.out_channels));
    p.dropout = spec.dropout;
    return p;
}

template <class Fn>
void visit_block(BlockParams& params, const std::string& prefix, Fn&& fn) {
    std::visit([&](auto& p) { visit_trainable(p, prefix, fn); }, params);
}

std::string block_prefix(std::size_t i) { return "b" + std::to_string(i + 1); }

void accumulate(Tensor& dst, const Tensor& src) {
    if (dst.empty() && dst.shape() != src.shape()) {
        dst = src;
    } else {
        dst.add_(src);
    }
}

}  // namespace

Model Model::build(const ModelConfig& config) {
    config.validate();
    Model m;
    m.config_ = config;
    m.id_ = next_model_id.fetch_add(1);
    Rng rng(config.seed);

    std::vector<std::size_t> channels{static_cast<std::size_t>(config.input_height)};
    std::vector<std::size_t> type_b_inputs;
    for (std::size_t i = 0; i < config.blocks.size(); ++i) {
        const BlockSpec& spec = config.blocks[i];
        const std::size_t in_ch = channels.back();
        const auto out_ch = static_cast<std::size_t>(spec.out_channels);
        Block block;
        block.spec = spec;
        switch (spec.type) {
            case BlockType::A:
                block.params = make_block_a(in_ch, spec, config.normalization, rng);
                break;
            case BlockType::B: {
                BlockBParams p;
                for (int r = 0; r < spec.conv_layers; ++r) {
                    p.sub.push_back(make_block_a(r == 0 ? in_ch : out_ch, spec, config.normalization, rng));
                }
                if (spec.se) {
                    p.se = SeParams::zeros(out_ch);
                    init_normal(p.se->w1, std::sqrt(2.0 / static_cast<double>(out_ch)), rng);
                    init_normal(p.se->w2, std::sqrt(1.0 / static_cast<double>(SeParams::bottleneck(out_ch))), rng);
                }
                type_b_inputs.push_back(i);
                switch (spec.residual) {
                    case ResidualMode::none: break;
                    case ResidualMode::normal: block.residual_sources = {i}; break;
                    case ResidualMode::dense: block.residual_sources = type_b_inputs; break;
                }
                for (auto src : block.residual_sources) {
                    ResidualProjection proj;
                    proj.conv = ConvParams::zeros(1, channels[src], out_ch);
                    init_conv(proj.conv, rng, true);
                    proj.norm = NormParams::make(config.normalization, out_ch);
                    p.residuals.push_back(std::move(proj));
                }
                block.params = std::move(p);
                break;
            }
            case BlockType::C: {
                BlockCParams p;
                p.conv = ConvParams::zeros(static_cast<std::size_t>(spec.kernel), in_ch, out_ch, spec.stride,
                                           spec.dilation);
                init_conv(p.conv, rng, false);
                block.params = std::move(p);
                break;
            }
        }
        channels.push_back(out_ch);
        m.blocks_.push_back(std::move(block));
    }
    return m;
}

std::vector<NamedTensor> Model::parameters() {
    std::vector<NamedTensor> out;
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        visit_block(blocks_[i].params, block_prefix(i),
                    [&](const std::string& name, Tensor& t) { out.push_back({name, &t}); });
    }
    return out;
}

std::vector<NamedConstTensor> Model::parameters() const {
    std::vector<NamedConstTensor> out;
    for (auto& p : const_cast<Model*>(this)->parameters()) out.push_back({p.name, p.tensor});
    return out;
}

std::vector<NamedTensor> Model::buffers() {
    std::vector<NamedTensor> out;
    auto add_norm = [&](NormParams& n, const std::string& prefix) {
        if (n.kind != NormKind::batch) return;
        out.push_back({prefix + ".running_mean", &n.state.running_mean});
        out.push_back({prefix + ".running_var", &n.state.running_var});
    };
    for (std::size_t i = 0; i < blocks_.size(); ++i) {
        const std::string prefix = block_prefix(i);
        if (auto* a = std::get_if<BlockAParams>(&blocks_[i].params)) {
            add_norm(a->norm, prefix + ".norm");
        } else if (auto* b = std::get_if<BlockBParams>(&blocks_[i].params)) {
            for (std::size_t r = 0; r < b->sub.size(); ++r) add_norm(b->sub[r].norm, prefix + ".sub" + std::to_string(r) + ".norm");
            for (std::size_t j = 0; j < b->residuals.size(); ++j) {
                add_norm(b->residuals[j].norm, prefix + ".res" + std::to_string(j) + ".norm");
            }
        }
    }
    return out;
}

std::vector<NamedConstTensor> Model::buffers() const {
    std::vector<NamedConstTensor> out;
    for (auto& p : const_cast<Model*>(this)->buffers()) out.push_back({p.name, p.tensor});
    return out;
}

std::size_t Model::count_params() const {
    std::size_t n = 0;
    for (const auto& p : parameters()) n += p.tensor->size();
    return n;
}

double Gradients::global_norm() const {
    double acc = 0.0;
    for (const auto& t : tensors) {
        for (auto v : t.data()) acc += static_cast<double>(v) * v;
    }
    return std::sqrt(acc);
}

bool Gradients::all_finite() const {
    for (const auto& t : tensors) {
        if (!t.all_finite()) return false;
    }
    return true;
}

namespace {

void append_signs(const ActivationContext& a, std::vector<bool>& out) {
    for (float v : a.saved.data()) out.push_back(v > 0.0f);
}

}  // namespace

std::vector<bool> relu_pattern(const ForwardContext& ctx) {
    std::vector<bool> out;
    for (const auto& block : ctx.blocks) {
        if (const auto* a = std::get_if<BlockAContext>(&block)) {
            append_signs(a->relu, out);
        } else if (const auto* b = std::get_if<BlockBContext>(&block)) {
            for (const auto& h : b->head) append_signs(h.relu, out);
            if (b->se) append_signs(b->se->relu, out);
            append_signs(b->relu, out);
        }
    }
    return out;
}

std::size_t output_length(const ModelConfig& config, std::size_t width) {
    std::size_t len = width;
    for (const auto& b : config.blocks) len = conv1d_output_length(len, b.stride);
    return len;
}

ForwardResult forward(Model& model, const Tensor& images, const Lengths& true_widths, Mode mode, Rng& rng,
                      ForwardContext* ctx) {
    const ModelConfig& config = model.config();
    if (images.rank() != 3) contract_fail("forward: images must be [B,W,H], got " + shape_string(images.shape()));
    const std::size_t batch = images.dim(0);
    const std::size_t width = images.dim(1);
    const std::size_t height = images.dim(2);
    if (height != static_cast<std::size_t>(config.input_height)) {
        contract_fail("forward: image height " + std::to_string(height) + " does not match config input_height " +
                      std::to_string(config.input_height));
    }
    if (true_widths.size() != batch) contract_fail("forward: one width per sample required");
    for (auto w : true_widths) {
        if (w == 0 || w > width) contract_fail("forward: true width " + std::to_string(w) + " outside [1, W]");
    }

    const std::size_t factor = config.downsample_factor();
    const std::size_t padded = (width + factor - 1) / factor * factor;
    Tensor input({batch, padded, height});
    for (std::size_t b = 0; b < batch; ++b) {
        std::copy_n(images.raw() + b * width * height, width * height, input.raw() + b * padded * height);
    }

    auto& blocks = model.blocks();
    std::vector<Tensor> acts;
    acts.reserve(blocks.size() + 1);
    acts.push_back(std::move(input));
    Lengths lengths = true_widths;
    if (ctx) {
        ctx->model_id = model.id();
        ctx->blocks.clear();
        ctx->consumed = false;
    }

    Tensor logits;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        Block& block = blocks[i];
        if (auto* a = std::get_if<BlockAParams>(&block.params)) {
            BlockAContext bctx;
            BlockOutput out = block_a_forward(acts[i], lengths, *a, mode, rng, ctx ? &bctx : nullptr);
            lengths = std::move(out.lengths);
            acts.push_back(std::move(out.y));
            if (ctx) ctx->blocks.emplace_back(std::move(bctx));
        } else if (auto* b = std::get_if<BlockBParams>(&block.params)) {
            std::vector<const Tensor*> sources;
            for (auto s : block.residual_sources) sources.push_back(&acts[s]);
            BlockBContext bctx;
            BlockBOutput out = block_b_forward(acts[i], lengths, sources, *b, mode, rng, ctx ? &bctx : nullptr);
            acts.push_back(std::move(out.y));
            if (ctx) ctx->blocks.emplace_back(std::move(bctx));
        } else {
            auto& c = std::get<BlockCParams>(block.params);
            Conv1dContext cctx;
            Tensor y = block_c_forward(acts[i], c, ctx ? &cctx : nullptr);
            lengths.assign(lengths.size(), 0);
            for (std::size_t s = 0; s < batch; ++s) {
                lengths[s] = output_length(config, true_widths[s]);
            }
            acts.push_back(std::move(y));
            if (ctx) ctx->blocks.emplace_back(std::move(cctx));
        }
    }
    logits = std::move(acts.back());
    if (ctx) ctx->logits_shape = logits.shape();
    EASTER_CHECK_FINITE(logits, "model forward");
    return {std::move(logits), std::move(lengths)};
}

Gradients backward(const Model& model, ForwardContext& ctx, const Tensor& grad_logits) {
    if (ctx.model_id != model.id()) throw ContractViolation("backward: context was recorded on a different model");
    if (ctx.consumed) throw ContractViolation("backward: stale context (already consumed)");
    if (ctx.blocks.size() != model.blocks().size()) throw ContractViolation("backward: incomplete forward context");
    if (grad_logits.shape() != ctx.logits_shape) {
        contract_fail("backward: grad_logits " + shape_string(grad_logits.shape()) + " does not match logits " +
                      shape_string(ctx.logits_shape));
    }
    ctx.consumed = true;

    const auto& blocks = model.blocks();
    std::vector<BlockParams> grads;
    grads.reserve(blocks.size());
    for (const auto& b : blocks) {
        grads.push_back(std::visit([](const auto& p) -> BlockParams { return zero_grads_like(p); }, b.params));
    }

    std::vector<Tensor> dacts(blocks.size() + 1);
    dacts.back() = grad_logits;
    for (std::size_t i = blocks.size(); i-- > 0;) {
        const Tensor& dy = dacts[i + 1];
        const Block& block = blocks[i];
        if (const auto* a = std::get_if<BlockAParams>(&block.params)) {
            accumulate(dacts[i], block_a_backward(*a, std::get<BlockAContext>(ctx.blocks[i]), dy,
                                                  std::get<BlockAParams>(grads[i])));
        } else if (const auto* b = std::get_if<BlockBParams>(&block.params)) {
            BlockBGrads g = block_b_backward(*b, std::get<BlockBContext>(ctx.blocks[i]), dy,
                                             std::get<BlockBParams>(grads[i]));
            accumulate(dacts[i], g.input);
            for (std::size_t j = 0; j < block.residual_sources.size(); ++j) {
                accumulate(dacts[block.residual_sources[j]], g.sources[j]);
            }
        } else {
            accumulate(dacts[i], block_c_backward(std::get<BlockCParams>(block.params),
                                                  std::get<Conv1dContext>(ctx.blocks[i]), dy,
                                                  std::get<BlockCParams>(grads[i])));
        }
        dacts[i + 1] = Tensor();
    }

    Gradients out;
    for (std::size_t i = 0; i < grads.size(); ++i) {
        visit_block(grads[i], block_prefix(i), [&](const std::string& name, Tensor& t) {
            out.names.push_back(name);
            out.tensors.push_back(std::move(t));
        });
    }
    return out;
}

}  // namespace easter
