#pragma once

#include <cstddef>
#include <functional>
#include <limits>
#include <vector>

#include "easter/tensor.hpp"

namespace easter {

using Label = std::vector<int>;

/// Forward/backward lattice over the blank-interleaved label, log domain.
struct CtcTable {
    std::vector<int> extended_label;  // length 2L+1, blanks at even positions
    std::vector<double> alpha;        // [T, 2L+1] row-major
    std::vector<double> beta;         // [T, 2L+1]
    std::size_t frames = 0;
    double log_likelihood = -std::numeric_limits<double>::infinity();

    std::size_t states() const { return extended_label.size(); }
    double alpha_at(std::size_t t, std::size_t s) const { return alpha[t * states() + s]; }
    double beta_at(std::size_t t, std::size_t s) const { return beta[t * states() + s]; }
};

/// Minimum frames needed to emit `label`: L plus one per adjacent repeat.
std::size_t ctc_min_frames(const Label& label);

/// Builds the lattice for log-probabilities [T,V] (already log-softmaxed).
CtcTable ctc_lattice(const Tensor& log_probs, const Label& label, int blank);

struct CtcResult {
    double loss = 0.0;
    Tensor grad_logits;  // [T,V]
};

/// loss = -weight * log p(label | softmax(logits)), gradient with respect to
/// the raw logits. Throws InfeasibleAlignment when T < ctc_min_frames(label)
/// and ContractViolation for ids outside [0,V) or equal to the blank.
CtcResult ctc_loss(const Tensor& logits, const Label& label, int blank, double sample_weight = 1.0);

/// Exhaustive-enumeration reference: sums the probability of every frame
/// path that collapses to `label`. Returns +infinity when no path does.
/// Limited to V^T <= 1e6.
double ctc_brute_force(const Tensor& logits, const Label& label, int blank);

/// Per-frame argmax (lowest index on ties), merge repeats, drop blanks.
Label greedy_decode(const Tensor& logits, int blank);

/// Greedy decode of sample b in a [B,T,V] batch, limited to its first
/// `length` frames.
Label greedy_decode(const Tensor& batch_logits, std::size_t b, std::size_t length, int blank);

/// Per-sample w-CTC weight; receives the label. Default policy is 1.0.
using CtcWeightPolicy = std::function<double(const Label&)>;
double uniform_ctc_weight(const Label& label);
/// Placeholder length-normalized policy, L / max(1, L). Off by default.
double length_ratio_ctc_weight(const Label& label);

struct BatchCtcResult {
    double mean_loss = 0.0;          // over feasible samples
    Tensor grad_logits;              // [B,T,V], zero on padded frames and skipped samples
    std::vector<std::size_t> skipped;  // indices of infeasible samples
    std::size_t used = 0;
};

/// Per-sample CTC over each sample's first out_lengths[b] frames, averaged
/// over the feasible samples. Infeasible samples are skipped and reported.
BatchCtcResult batch_ctc(const Tensor& logits, const std::vector<std::size_t>& out_lengths,
                         const std::vector<Label>& labels, int blank, const std::vector<double>& weights = {});

}  // namespace easter
