#pragma once

// Time-dependent parameter sequences k -> T_k (k >= 1) and the good-map
// frequency analysis built on them.

#include "memloss/errors.hpp"
#include "memloss/maps.hpp"
#include "memloss/rng.hpp"
#include "memloss/tail_table.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace memloss {

// Random draws: value k of a sequence with seed s uses splitmix-based
// hash_key(s, k), so param_at(k) does not depend on evaluation order.
class ParamSequence {
public:
    enum class Kind { Explicit, Periodic, IID, Markov };

    static ParamSequence constant(const MapParams& p) { return periodic({p}); }

    static ParamSequence explicit_list(std::vector<MapParams> list) {
        if (list.empty()) throw ParamError("explicit sequence is empty");
        auto st = std::make_shared<State>();
        st->kind = Kind::Explicit;
        st->support = std::move(list);
        return ParamSequence(std::move(st));
    }

    static ParamSequence periodic(std::vector<MapParams> cycle) {
        if (cycle.empty()) throw ParamError("periodic cycle is empty");
        auto st = std::make_shared<State>();
        st->kind = Kind::Periodic;
        st->support = std::move(cycle);
        return ParamSequence(std::move(st));
    }

    static ParamSequence iid(std::vector<MapParams> support, std::vector<double> probs, std::uint64_t seed) {
        auto st = std::make_shared<State>();
        st->kind = Kind::IID;
        st->support = std::move(support);
        st->seed = seed;
        if (st->support.empty()) throw ParamError("iid support is empty");
        if (probs.empty()) probs.assign(st->support.size(), 1.0 / static_cast<double>(st->support.size()));
        check_law(probs, st->support.size(), "probs");
        st->initial = std::move(probs);
        return ParamSequence(std::move(st));
    }

    // An empty `initial` selects the stationary law of the chain.
    static ParamSequence markov(std::vector<MapParams> support, std::vector<std::vector<double>> transition,
                                std::vector<double> initial, std::uint64_t seed) {
        auto st = std::make_shared<State>();
        st->kind = Kind::Markov;
        st->support = std::move(support);
        st->seed = seed;
        const std::size_t m = st->support.size();
        if (m == 0) throw ParamError("markov support is empty");
        if (transition.size() != m) throw ParamError("transition matrix must be " + std::to_string(m) + "x" + std::to_string(m));
        for (const auto& row : transition) check_law(row, m, "transition row");
        st->transition = std::move(transition);
        if (initial.empty()) initial = stationary_law(st->transition);
        check_law(initial, m, "initial law");
        st->initial = std::move(initial);
        return ParamSequence(std::move(st));
    }

    [[nodiscard]] Kind kind() const noexcept { return st_->kind; }
    [[nodiscard]] Family family() const noexcept { return st_->support.front().family; }
    [[nodiscard]] const std::vector<MapParams>& support() const noexcept { return st_->support; }
    [[nodiscard]] std::size_t offset() const noexcept { return offset_; }

    // Minimal period when the sequence is known to be periodic (1 = stationary).
    [[nodiscard]] std::optional<std::size_t> period() const {
        const auto& s = st_->support;
        const bool single = std::all_of(s.begin(), s.end(), [&](const MapParams& p) { return p == s.front(); });
        if (single && st_->kind != Kind::Explicit) return 1;
        if (st_->kind != Kind::Periodic) return std::nullopt;
        const std::size_t n = s.size();
        for (std::size_t p = 1; p <= n; ++p) {
            if (n % p != 0) continue;
            bool ok = true;
            for (std::size_t i = p; i < n && ok; ++i) ok = s[i] == s[i - p];
            if (ok) return p;
        }
        return n;
    }

    [[nodiscard]] bool is_stationary() const { return period() == std::optional<std::size_t>{1}; }

    // Sequence k -> at(k + by).
    [[nodiscard]] ParamSequence shifted(std::size_t by) const {
        ParamSequence s = *this;
        s.offset_ += by;
        return s;
    }

    [[nodiscard]] MapParams at(std::size_t k) const {
        if (k < 1) throw IndexError("sequence index starts at 1");
        const std::size_t i = k + offset_;
        const auto& s = st_->support;
        switch (st_->kind) {
        case Kind::Explicit:
            if (i > s.size())
                throw IndexError("explicit sequence has " + std::to_string(s.size()) + " entries, asked for " +
                                 std::to_string(i));
            return s[i - 1];
        case Kind::Periodic: return s[(i - 1) % s.size()];
        case Kind::IID: return s[categorical(st_->initial, to_unit(hash_key(st_->seed, i)))];
        case Kind::Markov: return s[markov_state(i)];
        }
        return s.front();
    }

    // Entries k, k+1, ..., k+len-1.
    [[nodiscard]] std::vector<MapParams> window(std::size_t k, std::size_t len) const {
        std::vector<MapParams> out;
        out.reserve(len);
        for (std::size_t j = 0; j < len; ++j) out.push_back(at(k + j));
        return out;
    }

private:
    struct State {
        Kind kind = Kind::Periodic;
        std::vector<MapParams> support;
        std::vector<double> initial;
        std::vector<std::vector<double>> transition;
        std::uint64_t seed = 0;
        std::mutex cache_mutex;
        std::vector<std::uint32_t> states; // Markov prefix, states[i-1] is the state at time i
    };

    explicit ParamSequence(std::shared_ptr<State> st) : st_(std::move(st)) {
        const Family f = st_->support.front().family;
        for (const auto& p : st_->support) {
            if (p.family != f) throw ParamError("all entries of a sequence must share one map family");
            validate_params(p);
        }
    }

    static void check_law(const std::vector<double>& w, std::size_t m, const char* what) {
        if (w.size() != m) throw ParamError(std::string(what) + " must have " + std::to_string(m) + " entries");
        double sum = 0.0;
        for (double x : w) {
            if (!(x >= 0.0) || !std::isfinite(x)) throw ParamError(std::string(what) + " has a negative entry");
            sum += x;
        }
        if (std::abs(sum - 1.0) > 1e-12) throw ParamError(std::string(what) + " must sum to 1");
    }

    static std::vector<double> stationary_law(const std::vector<std::vector<double>>& P) {
        const auto m = static_cast<Eigen::Index>(P.size());
        Eigen::MatrixXd A(m, m);
        for (Eigen::Index i = 0; i < m; ++i)
            for (Eigen::Index j = 0; j < m; ++j) A(i, j) = P[j][i] - (i == j ? 1.0 : 0.0);
        A.row(m - 1).setOnes();
        Eigen::VectorXd b = Eigen::VectorXd::Zero(m);
        b(m - 1) = 1.0;
        Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
        if (!lu.isInvertible())
            throw ParamError("transition matrix has no unique stationary law; give an initial law");
        Eigen::VectorXd pi = lu.solve(b);
        std::vector<double> out(P.size());
        double sum = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            out[i] = std::max(0.0, pi(i));
            sum += out[i];
        }
        for (double& x : out) x /= sum;
        return out;
    }

    static std::size_t categorical(const std::vector<double>& w, double u) {
        double acc = 0.0;
        for (std::size_t i = 0; i < w.size(); ++i) {
            acc += w[i];
            if (u < acc) return i;
        }
        for (std::size_t i = w.size(); i-- > 0;)
            if (w[i] > 0.0) return i;
        return 0;
    }

    std::size_t markov_state(std::size_t i) const {
        std::lock_guard lock(st_->cache_mutex);
        auto& states = st_->states;
        while (states.size() < i) {
            const std::size_t t = states.size() + 1;
            const double u = to_unit(hash_key(st_->seed, t));
            const auto& law = states.empty() ? st_->initial : st_->transition[states.back()];
            states.push_back(static_cast<std::uint32_t>(categorical(law, u)));
        }
        return states[i - 1];
    }

    std::shared_ptr<State> st_;
    std::size_t offset_ = 0;
};

inline MapParams param_at(const ParamSequence& seq, std::size_t k) { return seq.at(k); }

// #{k <= j <= k+len-1 : gamma_j <= threshold}
inline std::size_t good_count(const ParamSequence& seq, std::size_t k, std::size_t len, double threshold) {
    std::size_t c = 0;
    for (std::size_t j = k; j < k + len; ++j) c += seq.at(j).gamma <= threshold ? 1 : 0;
    return c;
}

struct FrequencyReport {
    double a = 0.0;
    double kappa = 0.0;
    std::size_t N = 1;
};

// Tightest (a, kappa, N), N <= n_max/2, with good_count(1,n)/n in
// [a(1-kappa), a(1+kappa)] for every N <= n <= n_max. Ties go to the smallest N.
inline FrequencyReport check_frequency(const ParamSequence& seq, double threshold, std::size_t n_max) {
    if (n_max < 10) throw ParamError("n_max must be >= 10");
    std::vector<double> ratio(n_max + 1, 0.0);
    std::size_t count = 0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        count += seq.at(n).gamma <= threshold ? 1 : 0;
        ratio[n] = static_cast<double>(count) / static_cast<double>(n);
    }
    if (count == 0) throw NoGoodMaps("no map with gamma <= " + std::to_string(threshold) + " in the first " +
                                     std::to_string(n_max) + " entries");
    std::vector<double> lo(n_max + 2, 2.0), hi(n_max + 2, -1.0);
    for (std::size_t n = n_max; n >= 1; --n) {
        lo[n] = std::min(lo[n + 1], ratio[n]);
        hi[n] = std::max(hi[n + 1], ratio[n]);
    }
    FrequencyReport best;
    double best_kappa = 2.0;
    for (std::size_t N = 1; N <= n_max / 2; ++N) {
        const double a = 0.5 * (lo[N] + hi[N]);
        double kappa = (hi[N] - lo[N]) / (hi[N] + lo[N]);
        while (a * (1.0 - kappa) > lo[N] || a * (1.0 + kappa) < hi[N])
            kappa = std::nextafter(kappa, 2.0);
        if (kappa < best_kappa) {
            best_kappa = kappa;
            best = {a, kappa, N};
        }
    }
    return best;
}

struct ThetaProfile {
    TailTable theta;      // Theta_n = |good_count(1,n)/n - b|, theta(0) = 0
    TailTable theta_star; // sup_{n <= l <= n_max} Theta_l (tabulated-range supremum)
};

inline ThetaProfile theta_profile(const ParamSequence& seq, double threshold, double b, std::size_t n_max) {
    if (!(b > 0.0 && b < 1.0) && b != 1.0) throw ParamError("b must lie in (0,1]");
    std::vector<double> th(n_max + 1, 0.0), star(n_max + 1, 0.0);
    std::size_t count = 0;
    for (std::size_t n = 1; n <= n_max; ++n) {
        count += seq.at(n).gamma <= threshold ? 1 : 0;
        th[n] = std::abs(static_cast<double>(count) / static_cast<double>(n) - b);
    }
    double run = 0.0;
    for (std::size_t n = n_max; n >= 1; --n) {
        run = std::max(run, th[n]);
        star[n] = run;
    }
    star[0] = run;
    return {TailTable(1, TailLabel::Theta, std::move(th)), TailTable(1, TailLabel::ThetaStar, std::move(star))};
}

} // namespace memloss
