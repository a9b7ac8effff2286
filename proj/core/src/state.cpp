#include "chiral/state.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "chiral/params.hpp"

namespace chiral {

bool EnsembleState::all_finite() const { return first_non_finite() < 0; }

int EnsembleState::first_non_finite() const {
    for (int j = 0; j < size(); ++j) {
        if (!std::isfinite(z[j]) || !std::isfinite(p[j]) || !std::isfinite(sigma[j].real()) ||
            !std::isfinite(sigma[j].imag()))
            return j;
    }
    return -1;
}

double EnsembleState::max_coherence() const {
    double m = 0.0;
    for (const auto& s : sigma) m = std::max(m, std::abs(s));
    return m;
}

double fractional_position(double z) {
    double f = std::fmod(z / kTwoPi, 1.0);
    if (f <= 0.0) f += 1.0;
    // fmod of values a hair below an integer can round to exactly 1 after the shift;
    // that is already the canonical image of 0.
    return f;
}

std::vector<double> fractional_positions(std::span<const double> z) {
    std::vector<double> f(z.size());
    std::transform(z.begin(), z.end(), f.begin(), fractional_position);
    return f;
}

std::vector<int> position_order(std::span<const double> z) {
    std::vector<int> idx(z.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) { return z[a] < z[b]; });
    return idx;
}

std::vector<double> anchored_fractions(std::span<const double> z) {
    const auto order = position_order(z);
    std::vector<double> f;
    f.reserve(z.size());
    if (order.empty()) return f;
    const double z0 = z[order.front()];
    for (int i : order) f.push_back(fractional_position(z[i] - z0));
    return f;
}

double circular_difference(double a, double b) {
    double d = std::fmod(a - b, 1.0);
    if (d > 0.5) d -= 1.0;
    if (d <= -0.5) d += 1.0;
    return d;
}

}  // namespace chiral
