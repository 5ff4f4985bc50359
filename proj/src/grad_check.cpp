#include "easter/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "easter/error.hpp"
#include "easter/rng.hpp"

namespace easter {

double probe_loss(const Tensor& output, const Tensor& upstream) {
    require_same_shape(output, upstream, "probe_loss");
    double acc = 0.0;
    for (std::size_t i = 0; i < output.size(); ++i) acc += static_cast<double>(output[i]) * upstream[i];
    return acc;
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& forward,
                           const std::function<Tensor(const Tensor&, const Tensor&)>& vjp, const Tensor& point,
                           double step, std::uint64_t seed) {
    return grad_check(forward, vjp, point, step, seed, nullptr);
}

GradCheckResult grad_check(const std::function<Tensor(const Tensor&)>& forward,
                           const std::function<Tensor(const Tensor&, const Tensor&)>& vjp, const Tensor& point,
                           double step, std::uint64_t seed, const KinkPredicate& crosses_kink) {
    if (!(step > 0.0)) throw ContractViolation("grad_check: step must be positive");
    const Tensor base = forward(point);
    Tensor upstream(base.shape());
    Rng rng(seed);
    for (auto& v : upstream.data()) v = static_cast<float>(rng.normal());

    const Tensor analytic = vjp(point, upstream);
    require_same_shape(analytic, point, "grad_check analytic gradient");

    const double f0 = probe_loss(base, upstream);
    GradCheckResult result;
    Tensor probe = point;
    bool have_worst = false;
    for (std::size_t i = 0; i < point.size(); ++i) {
        const float original = probe[i];
        const auto hi = static_cast<float>(original + step);
        const auto lo = static_cast<float>(original - step);
        probe[i] = hi;
        const double up = probe_loss(forward(probe), upstream);
        Tensor probe_hi;
        if (crosses_kink) probe_hi = probe;
        probe[i] = lo;
        const double down = probe_loss(forward(probe), upstream);
        if (crosses_kink && crosses_kink(probe, probe_hi)) {
            probe[i] = original;
            ++result.skipped;
            continue;
        }
        probe[i] = original;
        // Steps actually representable in float.
        const double h_up = static_cast<double>(hi) - original;
        const double h_down = original - static_cast<double>(lo);
        const double slope_up = (up - f0) / h_up;
        const double slope_down = (f0 - down) / h_down;
        const double slope_scale = std::max({std::abs(slope_up), std::abs(slope_down), kGradCheckFloor});
        if (!crosses_kink && std::abs(slope_up - slope_down) > kKinkTolerance * slope_scale) {
            ++result.skipped;
            continue;
        }
        ++result.checked;
        const double numeric = (up - down) / (h_up + h_down);
        const double a = analytic[i];
        const double denom = std::max({std::abs(a), std::abs(numeric), kGradCheckFloor});
        const double rel = std::abs(a - numeric) / denom;
        if (!have_worst || rel > result.max_relative_error) {
            have_worst = true;
            result.max_relative_error = rel;
            result.worst_index = i;
            result.analytic = a;
            result.numeric = numeric;
        }
    }
    return result;
}

}  // namespace easter
