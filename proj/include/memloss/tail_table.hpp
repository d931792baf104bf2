#pragma once

// Tabulated functions of an integer argument n = 0..n_max (tails of return
// times, tails of the random sum S, TV curves, Theta profiles) and the
// log-log least-squares fit used to read off their exponents.

#include "memloss/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace memloss {

enum class TailLabel { HK, Lebesgue, R, STail, Theta, ThetaStar, TV, Mass };

inline std::string_view label_name(TailLabel l) {
    switch (l) {
    case TailLabel::HK: return "h_k";
    case TailLabel::Lebesgue: return "lebesgue";
    case TailLabel::R: return "r";
    case TailLabel::STail: return "S_tail";
    case TailLabel::Theta: return "theta";
    case TailLabel::ThetaStar: return "theta_star";
    case TailLabel::TV: return "tv";
    case TailLabel::Mass: return "mass";
    }
    return "?";
}

struct TailTable {
    std::size_t k = 1;
    TailLabel label = TailLabel::HK;
    std::vector<double> values;    // values[n], n = 0..n_max
    std::vector<double> std_error; // empty for exact tables
    double truncated_mass = 0.0;   // mass dropped below resolvable length, if any

    TailTable() = default;
    TailTable(std::size_t k_, TailLabel label_, std::vector<double> v)
        : k(k_), label(label_), values(std::move(v)) {}

    [[nodiscard]] std::size_t n_max() const noexcept { return values.empty() ? 0 : values.size() - 1; }
    [[nodiscard]] bool has_std_error() const noexcept { return !std_error.empty(); }

    [[nodiscard]] double at(std::size_t n) const {
        if (n >= values.size())
            throw DepthError("n = " + std::to_string(n) + " beyond tabulated depth " +
                             std::to_string(n_max()));
        return values[n];
    }
    [[nodiscard]] double operator()(std::size_t n) const { return at(n); }

    [[nodiscard]] bool is_nonincreasing(double slack = 0.0) const {
        for (std::size_t n = 1; n < values.size(); ++n)
            if (values[n] > values[n - 1] + slack) return false;
        return true;
    }
};

struct PowerFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t n_min = 0;
    std::size_t n_max = 0;
};

// Ordinary least squares of log values[n] against log n for n in [n_min, n_max].
inline PowerFit fit_power_law(const std::vector<double>& values, std::size_t n_min, std::size_t n_max) {
    if (n_min < 1 || n_min >= n_max)
        throw ParamError("fit window needs 1 <= n_min < n_max, got [" + std::to_string(n_min) + ", " +
                         std::to_string(n_max) + "]");
    if (n_max >= values.size())
        throw DepthError("fit window end " + std::to_string(n_max) + " beyond table length");
    const double count = static_cast<double>(n_max - n_min + 1);
    double mx = 0.0, my = 0.0;
    for (std::size_t n = n_min; n <= n_max; ++n) {
        if (!(values[n] > 0.0))
            throw NonPositiveValue("value at n = " + std::to_string(n) + " is " + std::to_string(values[n]));
        mx += std::log(static_cast<double>(n));
        my += std::log(values[n]);
    }
    mx /= count;
    my /= count;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t n = n_min; n <= n_max; ++n) {
        const double dx = std::log(static_cast<double>(n)) - mx;
        const double dy = std::log(values[n]) - my;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    PowerFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
    fit.n_min = n_min;
    fit.n_max = n_max;
    return fit;
}

inline PowerFit fit_power_law(const TailTable& table, std::size_t n_min, std::size_t n_max) {
    return fit_power_law(table.values, n_min, n_max);
}

// Default fit window: the middle two decades (in log scale) of [10, n_max].
// Shorter ranges use all of [10, n_max].
inline std::pair<std::size_t, std::size_t> default_fit_window(std::size_t n_max) {
    constexpr std::size_t first = 10;
    if (n_max <= first + 1) return {1, n_max};
    const double lo = std::log10(static_cast<double>(first));
    const double hi = std::log10(static_cast<double>(n_max));
    if (hi - lo <= 2.0) return {first, n_max};
    const double mid = 0.5 * (lo + hi);
    const auto a = static_cast<std::size_t>(std::ceil(std::pow(10.0, mid - 1.0)));
    const auto b = static_cast<std::size_t>(std::floor(std::pow(10.0, mid + 1.0)));
    return {std::max(first, a), std::min(n_max, b)};
}

} // namespace memloss
