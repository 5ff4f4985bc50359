#include "easter/ctc.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "easter/error.hpp"

namespace easter {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

double log_add(double a, double b) {
    if (a == kNegInf) return b;
    if (b == kNegInf) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void check_logits(const Tensor& logits, const char* what) {
    if (logits.rank() != 2 || logits.dim(1) < 1) {
        contract_fail(std::string(what) + ": expected logits [T,V], got " + shape_string(logits.shape()));
    }
}

void check_label(const Label& label, std::size_t vocab, int blank) {
    if (blank < 0 || static_cast<std::size_t>(blank) >= vocab) contract_fail("ctc: blank index outside [0,V)");
    for (auto id : label) {
        if (id < 0 || static_cast<std::size_t>(id) >= vocab) {
            contract_fail("ctc: label id " + std::to_string(id) + " outside [0," + std::to_string(vocab) + ")");
        }
        if (id == blank) contract_fail("ctc: label contains the blank index");
    }
}

// Row-wise log-softmax in double precision.
std::vector<double> log_softmax_rows(const Tensor& logits) {
    const std::size_t frames = logits.dim(0);
    const std::size_t vocab = logits.dim(1);
    std::vector<double> out(frames * vocab);
    for (std::size_t t = 0; t < frames; ++t) {
        const float* x = logits.raw() + t * vocab;
        const double mx = *std::max_element(x, x + vocab);
        double sum = 0.0;
        for (std::size_t v = 0; v < vocab; ++v) sum += std::exp(x[v] - mx);
        const double lse = mx + std::log(sum);
        for (std::size_t v = 0; v < vocab; ++v) out[t * vocab + v] = x[v] - lse;
    }
    return out;
}

CtcTable build_lattice(const std::vector<double>& lp, std::size_t frames, std::size_t vocab, const Label& label,
                       int blank) {
    CtcTable table;
    table.frames = frames;
    table.extended_label.reserve(2 * label.size() + 1);
    table.extended_label.push_back(blank);
    for (auto id : label) {
        table.extended_label.push_back(id);
        table.extended_label.push_back(blank);
    }
    const std::size_t states = table.extended_label.size();
    const auto& ext = table.extended_label;
    auto emit = [&](std::size_t t, std::size_t s) { return lp[t * vocab + static_cast<std::size_t>(ext[s])]; };
    auto can_skip = [&](std::size_t s) { return s >= 2 && ext[s] != blank && ext[s] != ext[s - 2]; };

    table.alpha.assign(frames * states, kNegInf);
    table.beta.assign(frames * states, kNegInf);
    if (frames == 0) return table;

    table.alpha[0] = emit(0, 0);
    if (states > 1) table.alpha[1] = emit(0, 1);
    for (std::size_t t = 1; t < frames; ++t) {
        const double* prev = &table.alpha[(t - 1) * states];
        double* cur = &table.alpha[t * states];
        for (std::size_t s = 0; s < states; ++s) {
            double acc = prev[s];
            if (s >= 1) acc = log_add(acc, prev[s - 1]);
            if (can_skip(s)) acc = log_add(acc, prev[s - 2]);
            cur[s] = acc == kNegInf ? kNegInf : acc + emit(t, s);
        }
    }

    // beta[t][s]: log-probability of the remaining frames t+1.. given state s at t.
    double* last = &table.beta[(frames - 1) * states];
    last[states - 1] = 0.0;
    if (states > 1) last[states - 2] = 0.0;
    for (std::size_t t = frames - 1; t-- > 0;) {
        const double* next = &table.beta[(t + 1) * states];
        double* cur = &table.beta[t * states];
        for (std::size_t s = 0; s < states; ++s) {
            double acc = next[s] == kNegInf ? kNegInf : next[s] + emit(t + 1, s);
            if (s + 1 < states && next[s + 1] != kNegInf) acc = log_add(acc, next[s + 1] + emit(t + 1, s + 1));
            if (s + 2 < states && can_skip(s + 2) && next[s + 2] != kNegInf) {
                acc = log_add(acc, next[s + 2] + emit(t + 1, s + 2));
            }
            cur[s] = acc;
        }
    }

    const double* fin = &table.alpha[(frames - 1) * states];
    table.log_likelihood = states > 1 ? log_add(fin[states - 1], fin[states - 2]) : fin[0];
    return table;
}

}  // namespace

std::size_t ctc_min_frames(const Label& label) {
    std::size_t n = label.size();
    for (std::size_t i = 1; i < label.size(); ++i) {
        if (label[i] == label[i - 1]) ++n;
    }
    return n;
}

CtcTable ctc_lattice(const Tensor& log_probs, const Label& label, int blank) {
    check_logits(log_probs, "ctc_lattice");
    check_label(label, log_probs.dim(1), blank);
    std::vector<double> lp(log_probs.data().begin(), log_probs.data().end());
    return build_lattice(lp, log_probs.dim(0), log_probs.dim(1), label, blank);
}

CtcResult ctc_loss(const Tensor& logits, const Label& label, int blank, double sample_weight) {
    check_logits(logits, "ctc_loss");
    const std::size_t frames = logits.dim(0);
    const std::size_t vocab = logits.dim(1);
    check_label(label, vocab, blank);
    if (!(sample_weight > 0.0)) contract_fail("ctc_loss: sample weight must be positive");
    if (frames < ctc_min_frames(label) || frames == 0) {
        throw InfeasibleAlignment("ctc_loss: " + std::to_string(frames) + " frames cannot emit a label needing " +
                                  std::to_string(ctc_min_frames(label)));
    }

    const std::vector<double> lp = log_softmax_rows(logits);
    const CtcTable table = build_lattice(lp, frames, vocab, label, blank);
    const double log_p = table.log_likelihood;
    if (!std::isfinite(log_p)) throw InfeasibleAlignment("ctc_loss: label has zero probability");

    CtcResult result;
    result.loss = -sample_weight * log_p;
    result.grad_logits = Tensor({frames, vocab});
    const std::size_t states = table.states();
    std::vector<double> occupancy(vocab);
    for (std::size_t t = 0; t < frames; ++t) {
        std::fill(occupancy.begin(), occupancy.end(), kNegInf);
        for (std::size_t s = 0; s < states; ++s) {
            const double a = table.alpha_at(t, s);
            const double b = table.beta_at(t, s);
            if (a == kNegInf || b == kNegInf) continue;
            auto& slot = occupancy[static_cast<std::size_t>(table.extended_label[s])];
            slot = log_add(slot, a + b);
        }
        for (std::size_t v = 0; v < vocab; ++v) {
            const double prob = std::exp(lp[t * vocab + v]);
            const double posterior = occupancy[v] == kNegInf ? 0.0 : std::exp(occupancy[v] - log_p);
            result.grad_logits[t * vocab + v] = static_cast<float>(sample_weight * (prob - posterior));
        }
    }
    return result;
}

double ctc_brute_force(const Tensor& logits, const Label& label, int blank) {
    check_logits(logits, "ctc_brute_force");
    const std::size_t frames = logits.dim(0);
    const std::size_t vocab = logits.dim(1);
    check_label(label, vocab, blank);
    double paths = 1.0;
    for (std::size_t t = 0; t < frames; ++t) paths *= static_cast<double>(vocab);
    if (paths > 1e6) throw ContractViolation("ctc_brute_force: instance too large (V^T > 1e6)");

    const std::vector<double> lp = log_softmax_rows(logits);
    std::vector<std::size_t> path(frames, 0);
    Label collapsed;
    double total = 0.0;
    const auto count = static_cast<std::size_t>(paths);
    for (std::size_t n = 0; n < count; ++n) {
        std::size_t code = n;
        for (std::size_t t = 0; t < frames; ++t) {
            path[t] = code % vocab;
            code /= vocab;
        }
        collapsed.clear();
        int prev = -1;
        double log_prob = 0.0;
        for (std::size_t t = 0; t < frames; ++t) {
            const int sym = static_cast<int>(path[t]);
            log_prob += lp[t * vocab + path[t]];
            if (sym != blank && sym != prev) collapsed.push_back(sym);
            prev = sym;
        }
        if (collapsed == label) total += std::exp(log_prob);
    }
    if (total <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log(total);
}

Label greedy_decode(const Tensor& logits, int blank) {
    check_logits(logits, "greedy_decode");
    return greedy_decode(logits.reshaped({1, logits.dim(0), logits.dim(1)}), 0, logits.dim(0), blank);
}

Label greedy_decode(const Tensor& batch_logits, std::size_t b, std::size_t length, int blank) {
    if (batch_logits.rank() != 3) contract_fail("greedy_decode: expected [B,T,V] logits");
    const std::size_t frames = batch_logits.dim(1);
    const std::size_t vocab = batch_logits.dim(2);
    if (b >= batch_logits.dim(0) || length > frames) contract_fail("greedy_decode: sample or length out of range");
    Label out;
    int prev = -1;
    for (std::size_t t = 0; t < length; ++t) {
        const float* row = batch_logits.raw() + (b * frames + t) * vocab;
        // std::max_element returns the first maximum, so ties go to the lowest index.
        const int best = static_cast<int>(std::max_element(row, row + vocab) - row);
        if (best != blank && best != prev) out.push_back(best);
        prev = best;
    }
    return out;
}

double uniform_ctc_weight(const Label&) { return 1.0; }

double length_ratio_ctc_weight(const Label& label) {
    const auto n = static_cast<double>(label.size());
    return n / std::max(1.0, n);
}

BatchCtcResult batch_ctc(const Tensor& logits, const std::vector<std::size_t>& out_lengths,
                         const std::vector<Label>& labels, int blank, const std::vector<double>& weights) {
    if (logits.rank() != 3) contract_fail("batch_ctc: expected [B,T,V] logits");
    const std::size_t batch = logits.dim(0);
    const std::size_t frames = logits.dim(1);
    const std::size_t vocab = logits.dim(2);
    if (out_lengths.size() != batch || labels.size() != batch) {
        contract_fail("batch_ctc: lengths and labels must have one entry per sample");
    }
    if (!weights.empty() && weights.size() != batch) contract_fail("batch_ctc: one weight per sample required");

    BatchCtcResult result;
    result.grad_logits = Tensor(logits.shape());
    std::vector<CtcResult> per_sample(batch);
    std::vector<bool> ok(batch, false);
    for (std::size_t b = 0; b < batch; ++b) {
        const std::size_t len = out_lengths[b];
        if (len > frames) contract_fail("batch_ctc: out_length exceeds frame count");
        Tensor slice({len, vocab});
        std::copy_n(logits.raw() + b * frames * vocab, len * vocab, slice.raw());
        try {
            per_sample[b] = ctc_loss(slice, labels[b], blank, weights.empty() ? 1.0 : weights[b]);
            ok[b] = true;
        } catch (const InfeasibleAlignment&) {
            result.skipped.push_back(b);
        }
    }

    // Fixed-order reduction.
    double total = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
        if (ok[b]) {
            total += per_sample[b].loss;
            ++result.used;
        }
    }
    if (result.used == 0) return result;
    result.mean_loss = total / static_cast<double>(result.used);
    const float scale = 1.0f / static_cast<float>(result.used);
    for (std::size_t b = 0; b < batch; ++b) {
        if (!ok[b]) continue;
        const Tensor& g = per_sample[b].grad_logits;
        float* dst = result.grad_logits.raw() + b * frames * vocab;
        for (std::size_t i = 0; i < g.size(); ++i) dst[i] = g[i] * scale;
    }
    return result;
}

}  // namespace easter
