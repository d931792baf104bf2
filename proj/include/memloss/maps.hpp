#pragma once

// Intermittent interval maps: Liverani-Saussol-Vaienti (LSV), Cui's variant
// with a critical right branch, Pikovsky maps, and one concrete
// Grossmann-Horner map. Every map has two full branches; all operations are
// pure functions of (params, argument).

#include "memloss/detail/roots.hpp"
#include "memloss/errors.hpp"

#include <cmath>
#include <compare>
#include <sstream>
#include <string>
#include <string_view>

namespace memloss {

enum class Family { LSV, Cui, Pikovsky, GrossmannHorner };

enum class Branch { Left, Right };

struct Interval {
    double lo = 0.0;
    double hi = 1.0;

    [[nodiscard]] constexpr double length() const noexcept { return hi - lo; }
    [[nodiscard]] constexpr bool contains(double x) const noexcept { return x >= lo && x <= hi; }
    friend constexpr bool operator==(const Interval&, const Interval&) = default;
};

struct MapParams {
    Family family = Family::LSV;
    double gamma = 0.5;
    double beta = 1.0; // Cui only
    double eta = 0.5;  // Grossmann-Horner only

    static constexpr MapParams lsv(double gamma) { return {Family::LSV, gamma, 1.0, 0.5}; }
    static constexpr MapParams cui(double gamma, double beta) { return {Family::Cui, gamma, beta, 0.5}; }
    static constexpr MapParams pikovsky(double gamma) { return {Family::Pikovsky, gamma, 1.0, 0.5}; }
    // T(x) = 1 - 2 sqrt|x|: b = 2, eta = 1/2 at the origin, a = 1/4 and gamma = 2
    // at the neutral fixed point -1 (and its preimage 1).
    static constexpr MapParams grossmann_horner() { return {Family::GrossmannHorner, 2.0, 1.0, 0.5}; }

    friend auto operator<=>(const MapParams&, const MapParams&) = default;
};

inline std::string_view family_name(Family f) {
    switch (f) {
    case Family::LSV: return "lsv";
    case Family::Cui: return "cui";
    case Family::Pikovsky: return "pikovsky";
    case Family::GrossmannHorner: return "gh";
    }
    return "?";
}

inline Family parse_family(std::string_view name) {
    if (name == "lsv") return Family::LSV;
    if (name == "cui") return Family::Cui;
    if (name == "pikovsky") return Family::Pikovsky;
    if (name == "gh" || name == "grossmann-horner" || name == "grossmann_horner")
        return Family::GrossmannHorner;
    throw ParamError("unknown map family '" + std::string(name) + "'");
}

constexpr Interval state_interval(Family f) noexcept {
    return (f == Family::LSV || f == Family::Cui) ? Interval{0.0, 1.0} : Interval{-1.0, 1.0};
}

// Point in the interior of the state interval where the two branches meet.
constexpr double branch_split(Family f) noexcept {
    return (f == Family::LSV || f == Family::Cui) ? 0.5 : 0.0;
}

// The split point itself belongs to the right branch.
constexpr Branch branch_of(Family f, double x) noexcept {
    return x < branch_split(f) ? Branch::Left : Branch::Right;
}

// Image of each branch (both branches are onto).
constexpr Interval branch_image(Family f) noexcept { return state_interval(f); }

// Reference set Y_k on which the first return map is induced, for the map T_k.
inline Interval return_set(const MapParams& p) {
    switch (p.family) {
    case Family::LSV:
    case Family::Cui: return {0.5, 1.0};
    case Family::Pikovsky: return {-0.5 / p.gamma, 0.5 / p.gamma};
    case Family::GrossmannHorner: return {-0.25, 0.0};
    }
    return {};
}

struct ValidationReport {
    bool ok = true;
    bool has_acip = true; // Cui: an absolutely continuous invariant probability exists iff gamma*beta < 1
};

inline ValidationReport validate_params(const MapParams& p) {
    auto fail = [](const std::string& msg) { throw ParamError(msg); };
    if (!std::isfinite(p.gamma) || !std::isfinite(p.beta) || !std::isfinite(p.eta))
        fail("parameters must be finite");
    ValidationReport report;
    switch (p.family) {
    case Family::LSV:
        if (!(p.gamma > 0.0 && p.gamma < 1.0)) fail("gamma must lie in (0,1)");
        break;
    case Family::Cui:
        if (!(p.gamma > 0.0 && p.gamma < 1.0)) fail("gamma must lie in (0,1)");
        if (!(p.beta >= 1.0)) fail("beta must be >= 1");
        report.has_acip = p.gamma * p.beta < 1.0;
        break;
    case Family::Pikovsky:
        if (!(p.gamma > 1.0 && p.gamma < 3.0)) fail("gamma must lie in (1,3)");
        break;
    case Family::GrossmannHorner:
        if (p.gamma != 2.0 || p.eta != 0.5)
            fail("only the concrete instance gamma = 2, eta = 1/2 is implemented");
        break;
    }
    return report;
}

namespace detail {

inline void require_in(const Interval& iv, double x, const char* what) {
    if (!(x >= iv.lo && x <= iv.hi)) {
        std::ostringstream os;
        os << what << " = " << x << " outside [" << iv.lo << ", " << iv.hi << "]";
        throw DomainError(os.str());
    }
}

// Left LSV/Cui branch: x (1 + (2x)^gamma) on [0, 1/2].
inline double lsv_left(double gamma, double x) { return x * (1.0 + std::pow(2.0 * x, gamma)); }
inline double lsv_left_slope(double gamma, double x) {
    return 1.0 + (gamma + 1.0) * std::pow(2.0 * x, gamma);
}

inline double lsv_left_inverse(double gamma, double y) {
    if (y <= 0.0) return 0.0;
    if (y >= 1.0) return 0.5;
    const double guess = y / (1.0 + std::pow(2.0 * y, gamma));
    return solve_monotone([&](double x) { return lsv_left(gamma, x) - y; },
                          [&](double x) { return lsv_left_slope(gamma, x); }, 0.0, 0.5, guess);
}

// Pikovsky right branch near the fixed point 1, in distances to 1:
// if x = 1 - u with u <= 1 - 1/(2 gamma), then T(x) = 1 - v where
// u = v - v^gamma / (2 gamma).
inline double pikovsky_shift_map(double gamma, double v) {
    return v - std::pow(v, gamma) / (2.0 * gamma);
}

inline double pikovsky_forward_distance(double gamma, double u) {
    if (u <= 0.0) return 0.0;
    return solve_monotone([&](double v) { return pikovsky_shift_map(gamma, v) - u; },
                          [&](double v) { return 1.0 - 0.5 * std::pow(v, gamma - 1.0); }, 0.0, 1.0,
                          u);
}

// T on (0, 1] for the Pikovsky map.
inline double pikovsky_positive(double gamma, double x) {
    const double xb = 0.5 / gamma;
    if (x < xb) return std::pow(2.0 * gamma * x, 1.0 / gamma) - 1.0;
    return 1.0 - pikovsky_forward_distance(gamma, 1.0 - x);
}

inline double pikovsky_g_plus(double gamma, double y) {
    if (y <= 0.0) return std::pow(1.0 + y, gamma) / (2.0 * gamma);
    return y + std::pow(1.0 - y, gamma) / (2.0 * gamma);
}

inline double pikovsky_g_plus_slope(double gamma, double y) {
    if (y <= 0.0) return 0.5 * std::pow(1.0 + y, gamma - 1.0);
    return 1.0 - 0.5 * std::pow(1.0 - y, gamma - 1.0);
}

} // namespace detail

// T(x).
inline double eval_map(const MapParams& p, double x) {
    detail::require_in(state_interval(p.family), x, "x");
    switch (p.family) {
    case Family::LSV:
        return x < 0.5 ? detail::lsv_left(p.gamma, x) : 2.0 * x - 1.0;
    case Family::Cui:
        return x < 0.5 ? detail::lsv_left(p.gamma, x) : std::pow(2.0 * x - 1.0, p.beta);
    case Family::Pikovsky:
        if (x == 0.0) throw SingularPoint("Pikovsky map is discontinuous at 0");
        return x > 0.0 ? detail::pikovsky_positive(p.gamma, x) : -detail::pikovsky_positive(p.gamma, -x);
    case Family::GrossmannHorner:
        if (x == 0.0) throw SingularPoint("Grossmann-Horner map has infinite slope at 0");
        return 1.0 - 2.0 * std::sqrt(std::abs(x));
    }
    return x;
}

// Residual of the implicit Pikovsky relation at (x, T(x)); zero up to rounding.
inline double pikovsky_residual(double gamma, double x, double t) {
    const double ax = std::abs(x);
    const double at = x > 0.0 ? t : -t;
    const double rhs = ax <= 0.5 / gamma ? std::pow(1.0 + at, gamma) / (2.0 * gamma)
                                         : at + std::pow(1.0 - at, gamma) / (2.0 * gamma);
    return ax - rhs;
}

// T'(x) (signed).
inline double derivative(const MapParams& p, double x) {
    detail::require_in(state_interval(p.family), x, "x");
    switch (p.family) {
    case Family::LSV:
    case Family::Cui:
        if (x == 0.5) throw SingularPoint("one-sided derivatives differ at x = 1/2");
        if (x < 0.5) return detail::lsv_left_slope(p.gamma, x);
        if (p.family == Family::LSV) return 2.0;
        return 2.0 * p.beta * std::pow(2.0 * x - 1.0, p.beta - 1.0);
    case Family::Pikovsky: {
        if (x == 0.0) throw SingularPoint("Pikovsky derivative is infinite at 0");
        const double ax = std::abs(x);
        if (ax < 0.5 / p.gamma) {
            const double t = std::pow(2.0 * p.gamma * ax, 1.0 / p.gamma) - 1.0;
            return 2.0 / std::pow(1.0 + t, p.gamma - 1.0);
        }
        const double v = detail::pikovsky_forward_distance(p.gamma, 1.0 - ax);
        return 1.0 / (1.0 - 0.5 * std::pow(v, p.gamma - 1.0));
    }
    case Family::GrossmannHorner:
        if (x == 0.0) throw SingularPoint("Grossmann-Horner derivative is infinite at 0");
        return x > 0.0 ? -1.0 / std::sqrt(x) : 1.0 / std::sqrt(-x);
    }
    return 0.0;
}

// Inverse of the given branch, defined on the whole state interval.
inline double inverse_branch(const MapParams& p, Branch b, double y) {
    detail::require_in(branch_image(p.family), y, "y");
    switch (p.family) {
    case Family::LSV:
        return b == Branch::Left ? detail::lsv_left_inverse(p.gamma, y) : 0.5 * (y + 1.0);
    case Family::Cui:
        return b == Branch::Left ? detail::lsv_left_inverse(p.gamma, y)
                                 : 0.5 * (1.0 + std::pow(y, 1.0 / p.beta));
    case Family::Pikovsky:
        return b == Branch::Right ? detail::pikovsky_g_plus(p.gamma, y)
                                  : -detail::pikovsky_g_plus(p.gamma, -y);
    case Family::GrossmannHorner: {
        const double g = 0.25 * (1.0 - y) * (1.0 - y);
        return b == Branch::Right ? g : -g;
    }
    }
    return y;
}

// |d/dy inverse_branch(p, b, y)| = 1 / |T'(inverse_branch(p, b, y))|.
inline double inverse_branch_derivative(const MapParams& p, Branch b, double y) {
    detail::require_in(branch_image(p.family), y, "y");
    double w = 0.0;
    switch (p.family) {
    case Family::LSV:
    case Family::Cui:
        if (b == Branch::Left) {
            w = 1.0 / detail::lsv_left_slope(p.gamma, detail::lsv_left_inverse(p.gamma, y));
        } else if (p.family == Family::LSV) {
            w = 0.5;
        } else {
            if (y == 0.0 && p.beta > 1.0) throw SingularPoint("Cui right branch has zero slope at 1/2");
            w = std::pow(y, 1.0 / p.beta - 1.0) / (2.0 * p.beta);
        }
        break;
    case Family::Pikovsky:
        w = detail::pikovsky_g_plus_slope(p.gamma, b == Branch::Right ? y : -y);
        break;
    case Family::GrossmannHorner:
        w = 0.5 * (1.0 - y);
        break;
    }
    if (!(w > 0.0) || !std::isfinite(w))
        throw SingularPoint("inverse branch slope degenerates at y = " + std::to_string(y));
    return w;
}

} // namespace memloss
