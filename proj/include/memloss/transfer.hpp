#pragma once

// Transfer operators of the maps acting on piecewise-constant densities.
//
// A density is stored by its averages over N equal cells. The pushed cell
// average is computed exactly for the piecewise-constant input: the mass that
// lands in an output cell [y0, y1] is, branch by branch, the input mass of
// g([y0, y1]), read off the (piecewise linear) distribution function F.
// Preimages of the cell edges depend only on the map, so they are cached per
// MapParams. Mass conservation and L1 contraction hold up to rounding.

#include "memloss/detail/parallel.hpp"
#include "memloss/errors.hpp"
#include "memloss/maps.hpp"
#include "memloss/sequences.hpp"
#include "memloss/tail_table.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <string>
#include <vector>

namespace memloss {

class GridDensity {
public:
    GridDensity() = default;

    GridDensity(Interval domain, std::vector<double> values) : domain_(domain), values_(std::move(values)) {
        const std::size_t n = values_.size();
        if (n < (std::size_t{1} << 10) || n > (std::size_t{1} << 20) || (n & (n - 1)) != 0)
            throw ParamError("cell count must be a power of two in [2^10, 2^20], got " + std::to_string(n));
        for (double v : values_)
            if (!(v >= 0.0) || !std::isfinite(v)) throw ParamError("density values must be finite and >= 0");
    }

    [[nodiscard]] std::size_t size() const noexcept { return values_.size(); }
    [[nodiscard]] const Interval& domain() const noexcept { return domain_; }
    [[nodiscard]] double width() const noexcept { return domain_.length() / static_cast<double>(values_.size()); }
    [[nodiscard]] double edge(std::size_t i) const noexcept {
        return i == values_.size() ? domain_.hi : domain_.lo + width() * static_cast<double>(i);
    }
    [[nodiscard]] double midpoint(std::size_t i) const noexcept { return 0.5 * (edge(i) + edge(i + 1)); }
    [[nodiscard]] const std::vector<double>& values() const noexcept { return values_; }
    [[nodiscard]] double operator[](std::size_t i) const noexcept { return values_[i]; }

    [[nodiscard]] double mass() const noexcept {
        double s = 0.0;
        for (double v : values_) s += v;
        return s * width();
    }

    // Integral over [a, b] (exact for the piecewise-constant density).
    [[nodiscard]] double integral(Interval iv) const noexcept {
        const double a = std::max(iv.lo, domain_.lo), b = std::min(iv.hi, domain_.hi);
        if (!(b > a)) return 0.0;
        return cdf(b) - cdf(a);
    }

    [[nodiscard]] double cdf(double x) const noexcept {
        const double h = width();
        const auto n = values_.size();
        auto i = static_cast<std::size_t>(std::clamp((x - domain_.lo) / h, 0.0, static_cast<double>(n)));
        if (i >= n) i = n - 1;
        double s = 0.0;
        for (std::size_t j = 0; j < i; ++j) s += values_[j];
        return s * h + (x - edge(i)) * values_[i];
    }

private:
    Interval domain_;
    std::vector<double> values_;
};

inline bool same_grid(const GridDensity& f, const GridDensity& g) {
    return f.size() == g.size() && f.domain() == g.domain();
}

// ---------------------------------------------------------------------------
// Seed densities

enum class DensityKind { Uniform, Holder, Cone, Indicator };

// Holder profiles on s = (x - lo)/(hi - lo), exponent alpha in (0, 1]:
//   profile 0: 1 + sgn(c)|c|^alpha / 2, c = cos(2 pi s)
//   profile 1: 1 + sgn(c)|c|^alpha / 2, c = sin(2 pi s)
//   profile 2: 1 + |2s - 1|^alpha / 2
// Cone sample (LSV/Cui domain only): (1 - beta) x^{-beta}.
struct DensitySpec {
    DensityKind kind = DensityKind::Uniform;
    double exponent = 1.0;
    int profile = 0;
    double beta = 0.5;
    Interval set; // Indicator only

    static DensitySpec uniform() { return {}; }
    static DensitySpec holder(double exponent, int profile) { return {DensityKind::Holder, exponent, profile, 0.5, {}}; }
    static DensitySpec cone(double beta) { return {DensityKind::Cone, 1.0, 0, beta, {}}; }
    static DensitySpec indicator(Interval set) { return {DensityKind::Indicator, 1.0, 0, 0.5, set}; }
};

namespace detail {

inline double holder_profile(int profile, double alpha, double s) {
    auto signed_pow = [alpha](double c) { return std::copysign(std::pow(std::abs(c), alpha), c); };
    switch (profile) {
    case 0: return 1.0 + 0.5 * signed_pow(std::cos(2.0 * std::numbers::pi * s));
    case 1: return 1.0 + 0.5 * signed_pow(std::sin(2.0 * std::numbers::pi * s));
    case 2: return 1.0 + 0.5 * std::pow(std::abs(2.0 * s - 1.0), alpha);
    default: throw ParamError("holder profile id must be 0, 1 or 2");
    }
}

inline GridDensity normalized(Interval domain, std::vector<double> v) {
    double s = 0.0;
    for (double x : v) s += x;
    const double h = domain.length() / static_cast<double>(v.size());
    if (!(s > 0.0)) throw ParamError("density has zero mass");
    for (double& x : v) x /= s * h;
    return GridDensity(domain, std::move(v));
}

} // namespace detail

inline GridDensity make_density(const DensitySpec& spec, Interval domain, std::size_t N) {
    std::vector<double> v(N, 1.0);
    const double h = domain.length() / static_cast<double>(N);
    switch (spec.kind) {
    case DensityKind::Uniform: break;
    case DensityKind::Holder: {
        if (!(spec.exponent > 0.0 && spec.exponent <= 1.0)) throw ParamError("holder exponent must lie in (0,1]");
        // 8-point Gauss-Legendre cell averages.
        static constexpr std::array<double, 4> nodes{0.1834346424956498, 0.5255324099163290, 0.7966664774136267,
                                                     0.9602898564975363};
        static constexpr std::array<double, 4> weights{0.3626837833783620, 0.3137066458778873, 0.2223810344533745,
                                                       0.1012285362903763};
        const double ds = 1.0 / static_cast<double>(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double c = (static_cast<double>(i) + 0.5) * ds;
            double acc = 0.0;
            for (std::size_t q = 0; q < 4; ++q) {
                acc += weights[q] * (detail::holder_profile(spec.profile, spec.exponent, c - 0.5 * ds * nodes[q]) +
                                     detail::holder_profile(spec.profile, spec.exponent, c + 0.5 * ds * nodes[q]));
            }
            v[i] = 0.5 * acc;
        }
        break;
    }
    case DensityKind::Cone: {
        if (domain.lo != 0.0 || domain.hi != 1.0) throw ParamError("cone densities live on [0,1]");
        if (!(spec.beta > 0.0 && spec.beta < 1.0)) throw ParamError("cone beta must lie in (0,1)");
        // Exact cell averages of (1 - beta) x^{-beta}.
        const double e = 1.0 - spec.beta;
        for (std::size_t i = 0; i < N; ++i) {
            const double a = h * static_cast<double>(i), b = i + 1 == N ? 1.0 : h * static_cast<double>(i + 1);
            v[i] = (std::pow(b, e) - std::pow(a, e)) / h;
        }
        break;
    }
    case DensityKind::Indicator: {
        // Exact coverage fractions; no snapping of the set to cell edges.
        for (std::size_t i = 0; i < N; ++i) {
            const double a = domain.lo + h * static_cast<double>(i), b = a + h;
            v[i] = std::max(0.0, std::min(b, spec.set.hi) - std::max(a, spec.set.lo)) / h;
        }
        break;
    }
    }
    return detail::normalized(domain, std::move(v));
}

// ---------------------------------------------------------------------------
// Cone check

struct ConeReport {
    bool nonnegative = true;
    bool decreasing = true;
    bool weighted_increasing = true; // x^{beta+1} f nondecreasing
    bool pointwise_bound = true;     // f(x) <= a_beta x^{-beta} int f
    double worst_negative = 0.0;
    double worst_increase = 0.0;
    double worst_weighted_drop = 0.0;
    double worst_bound_excess = 0.0;
    bool a_beta_below_threshold = false; // a_beta <= 2^beta (beta + 2)

    [[nodiscard]] bool all_pass() const noexcept {
        return nonnegative && decreasing && weighted_increasing && pointwise_bound;
    }
};

// Conditions are checked on cell averages with one cell of slack: a member of
// the cone satisfies v_i >= v_{i+1}, e_i^{beta+1} v_i <= e_{i+2}^{beta+1} v_{i+1}
// and v_i <= a_beta e_i^{-beta} mass, with e_i the left edge of cell i.
inline ConeReport cone_membership(const GridDensity& f, double beta, double a_beta) {
    if (f.domain().lo != 0.0 || f.domain().hi != 1.0) throw ParamError("cone check needs a density on [0,1]");
    ConeReport r;
    r.a_beta_below_threshold = !(a_beta > std::pow(2.0, beta) * (beta + 2.0));
    const auto& v = f.values();
    const std::size_t n = v.size();
    const double mass = f.mass();
    constexpr double rel = 1e-12;
    for (std::size_t i = 0; i < n; ++i) {
        if (v[i] < 0.0) {
            r.nonnegative = false;
            r.worst_negative = std::max(r.worst_negative, -v[i]);
        }
        if (i + 1 < n) {
            const double up = v[i + 1] - v[i];
            if (up > rel * std::abs(v[i])) {
                r.decreasing = false;
                r.worst_increase = std::max(r.worst_increase, up);
            }
            const double left = std::pow(f.edge(i), beta + 1.0) * v[i];
            const double right = std::pow(f.edge(i + 2), beta + 1.0) * v[i + 1];
            if (left - right > rel * std::abs(left)) {
                r.weighted_increasing = false;
                r.worst_weighted_drop = std::max(r.worst_weighted_drop, left - right);
            }
        }
        if (i > 0) {
            const double bound = a_beta * std::pow(f.edge(i), -beta) * mass;
            if (v[i] > bound * (1.0 + rel)) {
                r.pointwise_bound = false;
                r.worst_bound_excess = std::max(r.worst_bound_excess, v[i] - bound);
            }
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Transfer operator

// Pushes densities on a fixed grid. Edge preimages are cached per MapParams,
// so long compositions with few distinct maps cost O(N) per step.
class TransferOperator {
public:
    TransferOperator(Interval domain, std::size_t N) : domain_(domain), n_(N) {
        GridDensity probe(domain, std::vector<double>(N, 0.0)); // validates N
    }

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] const Interval& domain() const noexcept { return domain_; }

    [[nodiscard]] GridDensity push(const MapParams& p, const GridDensity& f) const {
        if (f.size() != n_ || !(f.domain() == domain_)) throw ShapeMismatch("density grid differs from operator grid");
        if (!(state_interval(p.family) == domain_)) throw ShapeMismatch("map family lives on a different interval");
        const Plan& plan = plan_for(p);
        const auto& v = f.values();
        const double h = f.width();
        std::vector<double> cum(n_ + 1, 0.0);
        for (std::size_t i = 0; i < n_; ++i) cum[i + 1] = cum[i] + v[i] * h;
        std::vector<double> out(n_);
        detail::parallel_for(n_, [&](std::size_t b, std::size_t e) {
            for (std::size_t c = b; c < e; ++c) {
                double m = 0.0;
                for (const auto& br : plan.branch) {
                    const double f0 = cum[br.cell[c]] + br.offset[c] * v[br.cell[c]];
                    const double f1 = cum[br.cell[c + 1]] + br.offset[c + 1] * v[br.cell[c + 1]];
                    m += std::abs(f1 - f0);
                }
                out[c] = m / h;
            }
        });
        return GridDensity(domain_, std::move(out));
    }

private:
    struct BranchEdges {
        std::vector<std::uint32_t> cell; // cell containing the preimage of edge j
        std::vector<double> offset;      // preimage minus the left edge of that cell
    };
    struct Plan {
        std::array<BranchEdges, 2> branch;
    };

    const Plan& plan_for(const MapParams& p) const {
        std::lock_guard lock(mutex_);
        auto it = cache_.find(p);
        if (it != cache_.end()) return *it->second;
        auto plan = std::make_shared<Plan>();
        const double h = domain_.length() / static_cast<double>(n_);
        for (int b = 0; b < 2; ++b) {
            auto& br = plan->branch[b];
            br.cell.resize(n_ + 1);
            br.offset.resize(n_ + 1);
            const Branch id = b == 0 ? Branch::Left : Branch::Right;
            for (std::size_t j = 0; j <= n_; ++j) {
                const double y = j == n_ ? domain_.hi : domain_.lo + h * static_cast<double>(j);
                const double x = inverse_branch(p, id, y);
                auto i = static_cast<std::size_t>(std::clamp((x - domain_.lo) / h, 0.0, static_cast<double>(n_ - 1)));
                br.cell[j] = static_cast<std::uint32_t>(i);
                br.offset[j] = x - (domain_.lo + h * static_cast<double>(i));
            }
        }
        if (cache_.size() >= 64) cache_.clear();
        return *cache_.emplace(p, std::move(plan)).first->second;
    }

    Interval domain_;
    std::size_t n_;
    mutable std::mutex mutex_;
    mutable std::map<MapParams, std::shared_ptr<const Plan>> cache_;
};

inline GridDensity push_density(const MapParams& p, const GridDensity& f) {
    return TransferOperator(f.domain(), f.size()).push(p, f);
}

// Density of (T_n o ... o T_1)_* f, with T_j = seq.at(first + j - 1).
inline GridDensity evolve(const ParamSequence& seq, const GridDensity& f, std::size_t n,
                          const TransferOperator* op = nullptr, std::size_t first = 1) {
    std::unique_ptr<TransferOperator> own;
    if (op == nullptr) {
        own = std::make_unique<TransferOperator>(f.domain(), f.size());
        op = own.get();
    }
    GridDensity g = f;
    for (std::size_t j = 0; j < n; ++j) g = op->push(seq.at(first + j), g);
    return g;
}

// Total variation distance, half the L1 distance of the densities.
inline double tv_distance(const GridDensity& f, const GridDensity& g) {
    if (!same_grid(f, g)) throw ShapeMismatch("densities live on different grids");
    double s = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) s += std::abs(f[i] - g[i]);
    return 0.5 * s * f.width();
}

inline TailTable memory_loss_curve(const ParamSequence& seq, const GridDensity& f, const GridDensity& g,
                                   std::size_t n_max) {
    if (!same_grid(f, g)) throw ShapeMismatch("densities live on different grids");
    TransferOperator op(f.domain(), f.size());
    std::vector<double> tv(n_max + 1);
    GridDensity a = f, b = g;
    tv[0] = tv_distance(a, b);
    for (std::size_t n = 1; n <= n_max; ++n) {
        const MapParams p = seq.at(n);
        a = op.push(p, a);
        b = op.push(p, b);
        tv[n] = tv_distance(a, b);
    }
    return TailTable(1, TailLabel::TV, std::move(tv));
}

struct MixingReport {
    TailTable mass;          // ((T_{k,k+n-1})_* m_k)(Y_{k+n}), n = 0..n_max
    double min_value = 1.0;  // min over n in [n0, n_max]
    std::size_t argmin = 0;
};

inline MixingReport mixing_mass(const ParamSequence& seq, std::size_t k, std::size_t n_max, std::size_t N = 1 << 14,
                                std::size_t n0 = 2) {
    const Interval X = state_interval(seq.family());
    TransferOperator op(X, N);
    GridDensity f = make_density(DensitySpec::indicator(return_set(seq.at(k))), X, N);
    std::vector<double> mass(n_max + 1);
    mass[0] = f.integral(return_set(seq.at(k)));
    for (std::size_t n = 1; n <= n_max; ++n) {
        f = op.push(seq.at(k + n - 1), f);
        mass[n] = f.integral(return_set(seq.at(k + n)));
    }
    MixingReport r{TailTable(k, TailLabel::Mass, std::move(mass)), 1.0, n0};
    for (std::size_t n = n0; n <= n_max; ++n)
        if (r.mass.values[n] < r.min_value) {
            r.min_value = r.mass.values[n];
            r.argmin = n;
        }
    return r;
}

} // namespace memloss
