#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace memloss::detail {

// Solves f(x) = 0 for a strictly monotone f on [lo, hi] with f(lo), f(hi) of
// opposite sign (or zero). Newton steps are taken from `guess` while they stay
// inside the current bracket and shrink it fast enough; otherwise the step
// falls back to bisection. Converges to a relative accuracy of a few ulps,
// which matters near neutral fixed points where roots are ~1e-8.
template <class F, class DF>
double solve_monotone(F&& f, DF&& df, double lo, double hi, double guess) {
    constexpr double eps = std::numeric_limits<double>::epsilon();
    double flo = f(lo);
    if (flo == 0.0) return lo;
    double fhi = f(hi);
    if (fhi == 0.0) return hi;
    const bool increasing = fhi > flo;

    double x = (guess > lo && guess < hi) ? guess : 0.5 * (lo + hi);
    double last_step = hi - lo;
    for (int it = 0; it < 400; ++it) {
        const double fx = f(x);
        if (fx == 0.0) return x;
        if ((fx > 0.0) == increasing) hi = x; else lo = x;

        const double d = df(x);
        double next = (d != 0.0 && std::isfinite(d)) ? x - fx / d : lo - 1.0;
        const bool newton_ok = next > lo && next < hi &&
                               std::abs(next - x) < 0.5 * last_step;
        if (!newton_ok) next = 0.5 * (lo + hi);

        last_step = std::abs(next - x);
        x = next;
        const double scale = std::max(std::abs(x), std::numeric_limits<double>::min());
        if (last_step <= 2.0 * eps * scale || hi - lo <= 2.0 * eps * scale) break;
    }
    return x;
}

} // namespace memloss::detail
