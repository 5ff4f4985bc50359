#pragma once

#include <cstdint>
#include <functional>

#include "easter/tensor.hpp"

namespace easter {

struct GradCheckResult {
    double max_relative_error = 0.0;
    std::size_t worst_index = 0;
    double analytic = 0.0;
    double numeric = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;  // elements where the function is not smooth within +-step

    double skipped_fraction() const {
        const std::size_t n = checked + skipped;
        return n ? static_cast<double>(skipped) / static_cast<double>(n) : 0.0;
    }
};

/// Gradients smaller than this are compared on an absolute scale; float32
/// round-off in the probe loss dominates central differences below it.
inline constexpr double kGradCheckFloor = 1e-1;

/// An element is treated as sitting on a kink (ReLU, max) when its forward
/// and backward one-sided slopes differ by more than this fraction of their
/// scale. Such elements are counted in `skipped` rather than compared; the
/// decision uses the forward function only.
inline constexpr double kKinkTolerance = 2e-2;

/// Central-difference check of a VJP.
///
/// The probe loss is L(x) = sum(forward(x) * u) for a fixed random upstream u
/// drawn from `seed`; `vjp(x, u)` must return dL/dx. Every element of `point`
/// is perturbed by +-step. The relative error per element is
/// |a - n| / max(|a|, |n|, kGradCheckFloor), taken over smooth elements.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& forward,
                           const std::function<Tensor(const Tensor&, const Tensor&)>& vjp, const Tensor& point,
                           double step, std::uint64_t seed = 7);

/// True when the function is not smooth on the segment between two points.
using KinkPredicate = std::function<bool(const Tensor& lo, const Tensor& hi)>;

/// As above, but elements are skipped when `crosses_kink(x - step, x + step)`
/// holds instead of by comparing one-sided slopes.
GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& forward,
                           const std::function<Tensor(const Tensor&, const Tensor&)>& vjp, const Tensor& point,
                           double step, std::uint64_t seed, const KinkPredicate& crosses_kink);

/// Probe loss sum(output * upstream) accumulated in double.
double probe_loss(const Tensor& output, const Tensor& upstream);

}  // namespace easter
