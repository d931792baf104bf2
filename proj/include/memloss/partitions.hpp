#pragma once

// Return-time partitions of nonstationary compositions, exact return-time
// tails read off from partition endpoints, and a Monte Carlo orbit oracle.
//
// Recursions near a neutral fixed point run in distance coordinates: LSV/Cui
// endpoints are already distances to 0, Pikovsky endpoints are stored as
// w = 1 - x, Grossmann-Horner ones as u = 1 + x.

#include "memloss/detail/parallel.hpp"
#include "memloss/errors.hpp"
#include "memloss/maps.hpp"
#include "memloss/rng.hpp"
#include "memloss/sequences.hpp"
#include "memloss/tail_table.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace memloss {

enum class TailBase { MK, Lebesgue };

inline TailBase parse_base(std::string_view s) {
    if (s == "m_k" || s == "mk" || s == "m") return TailBase::MK;
    if (s == "lebesgue") return TailBase::Lebesgue;
    throw ParamError("unknown tail base '" + std::string(s) + "' (expected m_k or lebesgue)");
}

struct PartitionEndpoints {
    Family family = Family::LSV;
    std::size_t k = 1;
    std::size_t n_max = 0;
    Interval Y;

    // LSV/Cui, n = 0..n_max: x[n] = x_n(k); y[n] = y_n(k); y_gap[n] = y_n(k) - 1/2.
    std::vector<double> x, y, y_gap;

    // Pikovsky, n = 0..n_max: x_plus[n] = x_n^+(k), w[n] = 1 - x_n^+(k); the left
    // endpoints are -x_plus. delta_plus[n] (n >= 1) is the right end of
    // delta_n^+(k) = (delta_plus[n+1], delta_plus[n]) inside (0, 1/(2 gamma_k)),
    // the points sent into Delta_{n-1}^-(k+1).
    std::vector<double> x_plus, w, delta_plus;

    // Grossmann-Horner, n = 0..n_max: u[n] = 1 + x_n^-, with
    // Delta_n^- = (x_{n+1}^-, x_n^-) and Delta_n^+ = (p_n, p_{n+1}), p_n = 1 - u[n];
    // delta^{+-}_n = g_{+-}(Delta_{n-1}^+) and delta_{1,n}^{+-} = g_{+-}(delta_n^+),
    // stored as endpoint pairs.
    std::vector<double> u, x_minus, p;
    std::vector<std::array<double, 2>> delta_minus_cells, delta_plus_cells, delta1_minus_cells, delta1_plus_cells;
};

namespace detail {

// f_m(j) = step(T_j, f_{m-1}(j+1)), f_0 = init. Returns f_m(k) for m = 0..n_max
// and f_m(k+1) for m = 0..n_max-1. Periodic sequences keep one value per
// residue class (O(p n_max) steps); otherwise the full triangle is computed.
template <class Step>
std::pair<std::vector<double>, std::vector<double>>
backward_recursion(const ParamSequence& seq, std::size_t k, std::size_t n_max, double init, Step&& step) {
    std::vector<double> at_k(n_max + 1), at_k1(n_max + 1);
    at_k[0] = at_k1[0] = init;
    if (const auto period = seq.period(); period && *period <= n_max + 1) {
        const std::size_t p = *period;
        const auto params = seq.window(k, p);
        std::vector<double> v(p, init), next(p);
        for (std::size_t m = 1; m <= n_max; ++m) {
            for (std::size_t r = 0; r < p; ++r) next[r] = step(params[r], v[(r + 1) % p]);
            v.swap(next);
            at_k[m] = v[0];
            at_k1[m] = v[1 % p];
        }
        return {at_k, at_k1};
    }
    const auto params = seq.window(k, n_max + 1);
    std::vector<double> v(n_max + 1, init);
    for (std::size_t m = 1; m <= n_max; ++m) {
        for (std::size_t r = 0; r + m <= n_max; ++r) v[r] = step(params[r], v[r + 1]);
        at_k[m] = v[0];
        at_k1[m] = v[1];
    }
    return {at_k, at_k1};
}

inline void require_family(const ParamSequence& seq, std::initializer_list<Family> allowed, const char* op) {
    for (Family f : allowed)
        if (seq.family() == f) return;
    throw ParamError(std::string(op) + " does not apply to family " + std::string(family_name(seq.family())));
}

} // namespace detail

inline PartitionEndpoints lsv_preimage_points(const ParamSequence& seq, std::size_t k, std::size_t n_max) {
    detail::require_family(seq, {Family::LSV, Family::Cui}, "lsv_preimage_points");
    if (k < 1 || n_max < 1) throw ParamError("need k >= 1 and n_max >= 1");
    PartitionEndpoints e;
    e.family = seq.family();
    e.k = k;
    e.n_max = n_max;
    e.Y = return_set(seq.at(k));
    auto [xk, xk1] = detail::backward_recursion(
        seq, k, n_max, 1.0, [](const MapParams& p, double v) { return detail::lsv_left_inverse(p.gamma, v); });
    e.x = std::move(xk);
    const MapParams tk = seq.at(k);
    e.y.assign(n_max + 1, 1.0);
    e.y_gap.assign(n_max + 1, 0.5);
    for (std::size_t n = 1; n <= n_max; ++n) {
        // y_n(k) = h_k(x_{n-1}(k+1)); the gap to 1/2 is formed without cancellation.
        const double xs = xk1[n - 1];
        e.y_gap[n] = tk.family == Family::LSV ? 0.5 * xs : 0.5 * std::pow(xs, 1.0 / tk.beta);
        e.y[n] = 0.5 + e.y_gap[n];
    }
    return e;
}

inline PartitionEndpoints pikovsky_endpoints(const ParamSequence& seq, std::size_t k, std::size_t n_max) {
    detail::require_family(seq, {Family::Pikovsky}, "pikovsky_endpoints");
    if (k < 1 || n_max < 1) throw ParamError("need k >= 1 and n_max >= 1");
    PartitionEndpoints e;
    e.family = Family::Pikovsky;
    e.k = k;
    e.n_max = n_max;
    const MapParams tk = seq.at(k);
    e.Y = return_set(tk);
    auto [wk, wk1] = detail::backward_recursion(seq, k, n_max, 1.0, [](const MapParams& p, double v) {
        return detail::pikovsky_shift_map(p.gamma, v);
    });
    e.w = std::move(wk);
    e.x_plus.resize(n_max + 1);
    for (std::size_t n = 0; n <= n_max; ++n) e.x_plus[n] = 1.0 - e.w[n];
    e.delta_plus.assign(n_max + 1, 0.0);
    for (std::size_t n = 1; n <= n_max; ++n)
        e.delta_plus[n] = std::pow(wk1[n - 1], tk.gamma) / (2.0 * tk.gamma);
    return e;
}

inline PartitionEndpoints gh_endpoints(const ParamSequence& seq, std::size_t k, std::size_t n_max) {
    detail::require_family(seq, {Family::GrossmannHorner}, "gh_endpoints");
    if (k < 1 || n_max < 1) throw ParamError("need k >= 1 and n_max >= 1");
    const MapParams tk = seq.at(k);
    PartitionEndpoints e;
    e.family = Family::GrossmannHorner;
    e.k = k;
    e.n_max = n_max;
    e.Y = return_set(tk);
    e.u.assign(n_max + 2, 1.0);
    for (std::size_t n = 1; n <= n_max + 1; ++n) e.u[n] = e.u[n - 1] - 0.25 * e.u[n - 1] * e.u[n - 1];
    e.x_minus.resize(n_max + 2);
    e.p.resize(n_max + 2);
    for (std::size_t n = 0; n <= n_max + 1; ++n) {
        e.x_minus[n] = -1.0 + e.u[n];
        e.p[n] = 1.0 - e.u[n];
    }
    auto pull = [&](Branch b, std::array<double, 2> cell) {
        std::array<double, 2> out{inverse_branch(tk, b, cell[0]), inverse_branch(tk, b, cell[1])};
        if (out[0] > out[1]) std::swap(out[0], out[1]);
        return out;
    };
    for (std::size_t n = 1; n <= n_max; ++n) {
        const std::array<double, 2> plus_cell{e.p[n - 1], e.p[n]};
        e.delta_minus_cells.push_back(pull(Branch::Left, plus_cell));
        e.delta_plus_cells.push_back(pull(Branch::Right, plus_cell));
        e.delta1_minus_cells.push_back(pull(Branch::Left, e.delta_plus_cells.back()));
        e.delta1_plus_cells.push_back(pull(Branch::Right, e.delta_plus_cells.back()));
    }
    return e;
}

inline PartitionEndpoints endpoints(const ParamSequence& seq, std::size_t k, std::size_t n_max) {
    switch (seq.family()) {
    case Family::LSV:
    case Family::Cui: return lsv_preimage_points(seq, k, n_max);
    case Family::Pikovsky: return pikovsky_endpoints(seq, k, n_max);
    case Family::GrossmannHorner: return gh_endpoints(seq, k, n_max);
    }
    return {};
}

namespace detail {

using IntervalList = std::vector<std::array<double, 2>>;

inline IntervalList merge_intervals(IntervalList v, double min_length, double& dropped) {
    std::sort(v.begin(), v.end());
    IntervalList merged;
    for (const auto& iv : v) {
        if (!merged.empty() && iv[0] <= merged.back()[1])
            merged.back()[1] = std::max(merged.back()[1], iv[1]);
        else
            merged.push_back(iv);
    }
    IntervalList out;
    for (const auto& iv : merged) {
        if (iv[1] - iv[0] < min_length)
            dropped += iv[1] - iv[0];
        else
            out.push_back(iv);
    }
    return out;
}

inline IntervalList preimage(const MapParams& p, const IntervalList& w) {
    IntervalList out;
    out.reserve(2 * w.size());
    for (const auto& iv : w)
        for (Branch b : {Branch::Left, Branch::Right}) {
            double a = inverse_branch(p, b, iv[0]), c = inverse_branch(p, b, iv[1]);
            if (a > c) std::swap(a, c);
            out.push_back({a, c});
        }
    return out;
}

inline double overlap(const IntervalList& w, const Interval& y) {
    double s = 0.0;
    for (const auto& iv : w) s += std::max(0.0, std::min(iv[1], y.hi) - std::max(iv[0], y.lo));
    return s;
}

// Exact tails by interval bookkeeping: with W_0 = X and
// W_m = {x not in Y : T x in W_{m-1}}, the event {tau >= n} is T^{-1} W_{n-1}.
// Used for the Grossmann-Horner map, whose induced partition is not a simple
// chain of cells (Delta_0^+ contains a repelling fixed point).
inline TailTable interval_union_tail(const MapParams& p, std::size_t k, std::size_t n_max, TailBase base,
                                     double min_length = 1e-15) {
    const Interval X = state_interval(p.family);
    const Interval Y = return_set(p);
    std::vector<double> t(n_max + 1, 1.0);
    IntervalList W{{X.lo, X.hi}};
    double dropped = 0.0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        const IntervalList pre = merge_intervals(preimage(p, W), 0.0, dropped);
        t[n] = base == TailBase::MK ? overlap(pre, Y) / Y.length() : overlap(pre, X) / X.length();
        IntervalList outside;
        for (const auto& iv : pre) {
            if (iv[1] <= Y.lo || iv[0] >= Y.hi) {
                outside.push_back(iv);
                continue;
            }
            if (iv[0] < Y.lo) outside.push_back({iv[0], Y.lo});
            if (iv[1] > Y.hi) outside.push_back({Y.hi, iv[1]});
        }
        W = merge_intervals(std::move(outside), min_length, dropped);
    }
    t[1] = 1.0;
    TailTable table(k, base == TailBase::MK ? TailLabel::HK : TailLabel::Lebesgue, std::move(t));
    table.truncated_mass = dropped;
    return table;
}

} // namespace detail

// Exact return-time tail t(n) = base(tau_k >= n), n = 0..n_max.
inline TailTable return_time_tail(const ParamSequence& seq, std::size_t k, std::size_t n_max, TailBase base) {
    if (n_max < 1) throw ParamError("n_max must be >= 1");
    const TailLabel label = base == TailBase::MK ? TailLabel::HK : TailLabel::Lebesgue;
    std::vector<double> t(n_max + 1, 1.0);
    switch (seq.family()) {
    case Family::LSV:
    case Family::Cui: {
        // Y = [1/2,1]; y in Y has tau >= n iff y < y_n(k). On [0,1/2), tau >= n iff x < x_n(k).
        const auto e = lsv_preimage_points(seq, k, n_max);
        for (std::size_t n = 1; n <= n_max; ++n)
            t[n] = base == TailBase::MK ? 2.0 * e.y_gap[n] : e.x[n] + e.y_gap[n];
        break;
    }
    case Family::Pikovsky: {
        // Y_k = (-1/(2 gamma_k), 1/(2 gamma_k)); on each half of Y_k, tau >= n on a piece
        // of length delta_plus[n]; outside Y_k, tau >= n iff |x| >= x_n^+(k).
        const auto e = pikovsky_endpoints(seq, k, n_max);
        for (std::size_t n = 1; n <= n_max; ++n)
            t[n] = base == TailBase::MK ? e.delta_plus[n] / e.Y.hi : e.w[n] + e.delta_plus[n];
        break;
    }
    case Family::GrossmannHorner:
        return detail::interval_union_tail(seq.at(k), k, n_max, base);
    }
    t[1] = 1.0;
    return TailTable(k, label, std::move(t));
}

// Monte Carlo first-entry statistics. `start(rng)` draws a starting point at
// time k and `target(params, x)` tells whether x lies in the target set of the
// map `params`; tau is the first n >= 1 with T_{k+n-1}...T_k x in the target of
// T_{k+n}. The result is reproducible for a given seed at any thread count:
// work is split into 64 fixed shards with independent streams.
template <class Start, class Target>
TailTable first_entry_tail_mc(const ParamSequence& seq, std::size_t k, std::size_t n_max, std::size_t samples,
                              std::uint64_t seed, Start&& start, Target&& target, TailLabel label) {
    if (samples < 1) throw ParamError("samples must be >= 1");
    constexpr std::size_t shards = 64;
    const auto params = seq.window(k, n_max + 1);
    std::vector<std::vector<std::uint64_t>> counts(shards, std::vector<std::uint64_t>(n_max + 2, 0));
    const std::uint64_t base_seed = hash_key(seed, purpose_key("return-time-mc"));
    detail::parallel_for(
        shards,
        [&](std::size_t b, std::size_t e) {
            for (std::size_t s = b; s < e; ++s) {
                SplitMix64 rng(hash_key(base_seed, s));
                const std::size_t lo = s * samples / shards, hi = (s + 1) * samples / shards;
                for (std::size_t i = lo; i < hi; ++i) {
                    double x = start(rng);
                    std::size_t tau = n_max + 1;
                    for (std::size_t n = 1; n <= n_max; ++n) {
                        x = eval_map(params[n - 1], x);
                        if (target(params[n], x)) {
                            tau = n;
                            break;
                        }
                    }
                    ++counts[s][tau];
                }
            }
        },
        1);
    std::vector<std::uint64_t> total(n_max + 2, 0);
    for (const auto& c : counts)
        for (std::size_t i = 0; i < c.size(); ++i) total[i] += c[i];
    TailTable t(k, label, std::vector<double>(n_max + 1));
    t.std_error.assign(n_max + 1, 0.0);
    const double N = static_cast<double>(samples);
    std::uint64_t at_least = samples;
    for (std::size_t n = 0; n <= n_max; ++n) {
        if (n >= 2) at_least -= total[n - 1];
        const double p = static_cast<double>(at_least) / N;
        t.values[n] = p;
        t.std_error[n] = std::sqrt(p * (1.0 - p) / N);
    }
    return t;
}

// Monte Carlo oracle for return_time_tail: starting points drawn from the base
// measure, orbits iterated forward until first entry into Y_{k+n}.
inline TailTable return_time_tail_mc(const ParamSequence& seq, std::size_t k, std::size_t n_max,
                                     std::size_t samples, std::uint64_t seed, TailBase base) {
    const Interval from = base == TailBase::MK ? return_set(seq.at(k)) : state_interval(seq.family());
    auto start = [from](SplitMix64& rng) {
        for (;;) {
            const double x = from.lo + from.length() * rng.uniform();
            if (x != 0.0 || from.lo == 0.0) return x;
        }
    };
    auto in_y = [](const MapParams& p, double x) { return return_set(p).contains(x); };
    return first_entry_tail_mc(seq, k, n_max, samples, seed, start, in_y,
                               base == TailBase::MK ? TailLabel::HK : TailLabel::Lebesgue);
}

} // namespace memloss
