#pragma once

// Coupling machinery: composed tails h_n^k, monotone envelopes, decomposition
// weights alpha_j, and the law of S = X_1 + ... + X_tau (tau geometric with
// parameter theta, independent of the X_j) by exact dynamic programming and by
// Monte Carlo.

#include "memloss/detail/parallel.hpp"
#include "memloss/errors.hpp"
#include "memloss/rng.hpp"
#include "memloss/tail_table.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace memloss {

struct KConstants {
    double K1 = 0.0;
    double K2 = 0.0;
};

// K2 = 2K / (1 - 1/lambda), K1 = K + K2 / lambda.
inline KConstants derive_k_constants(double K, double lambda) {
    if (!(lambda > 1.0)) throw ParamError("lambda must be > 1");
    if (!(K >= 0.0)) throw ParamError("K must be >= 0");
    const double K2 = 2.0 * K / (1.0 - 1.0 / lambda);
    return {K + K2 / lambda, K2};
}

struct CouplingConstants {
    double theta = 0.25;
    std::size_t n0 = 1;
    double K = 0.0;
    double lambda = 2.0;
    double K1 = 0.0;
    double K2 = 0.0;
    double diam_X = 1.0;
    double C_h = 2.0;
    double delta0 = 1.0;

    [[nodiscard]] bool degenerate_k() const noexcept { return K == 0.0; }

    static CouplingConstants make(double theta, std::size_t n0, double K = 0.0, double lambda = 2.0,
                                  double diam_X = 1.0, double delta0 = 1.0) {
        if (!(theta > 0.0 && theta <= 0.5)) throw ParamError("theta must lie in (0, 1/2]");
        if (!(diam_X > 0.0)) throw ParamError("diam_X must be > 0");
        if (!(delta0 > 0.0 && delta0 <= 1.0)) throw ParamError("delta0 must lie in (0, 1]");
        const KConstants kc = derive_k_constants(K, lambda);
        CouplingConstants c;
        c.theta = theta;
        c.n0 = n0;
        c.K = K;
        c.lambda = lambda;
        c.K1 = kc.K1;
        c.K2 = kc.K2;
        c.diam_X = diam_X;
        c.C_h = 2.0 * std::exp(kc.K2 * diam_X);
        c.delta0 = delta0;
        return c;
    }
};

// r_hat(0) = 1, r_hat(n) = min{1, r(1), ..., r(n)}.
inline TailTable hat_envelope(const TailTable& r) {
    TailTable out(r.k, r.label, std::vector<double>(r.values.size(), 1.0));
    double run = 1.0;
    for (std::size_t n = 1; n < r.values.size(); ++n) {
        run = std::min(run, r.values[n]);
        out.values[n] = run;
    }
    return out;
}

// min(1, m^{-beta}), m = 0..depth
inline TailTable synthetic_power_tail(double beta, std::size_t depth) {
    if (!(beta > 0.0)) throw ParamError("power tail exponent must be > 0");
    std::vector<double> v(depth + 1, 1.0);
    for (std::size_t m = 2; m <= depth; ++m) v[m] = std::pow(static_cast<double>(m), -beta);
    return TailTable(1, TailLabel::HK, std::move(v));
}

// 1 for m <= L, 0 after.
inline TailTable synthetic_step_tail(std::size_t L, std::size_t depth) {
    if (L < 1) throw ParamError("step tail length must be >= 1");
    std::vector<double> v(depth + 1, 0.0);
    for (std::size_t m = 0; m <= std::min(L, depth); ++m) v[m] = 1.0;
    return TailTable(1, TailLabel::HK, std::move(v));
}

struct TailBounds {
    double beta = 2.0;
    double beta_prime = 1.0;
    double C_beta = 1.0;
    double C_beta_prime = 1.0;
    std::vector<double> Theta; // Theta[j - k]; missing entries count as 0
};

// sup_{n >= 1} t(n) (1 v (n - shift))^{beta}: the smallest constant for which a
// bound of the form C (1 v (n - shift))^{-beta} holds on the tabulated range.
inline double minimal_constant(const TailTable& t, double beta, double shift = 0.0) {
    double c = 0.0;
    for (std::size_t n = 1; n < t.values.size(); ++n)
        c = std::max(c, t.values[n] * std::pow(std::max(1.0, static_cast<double>(n) - shift), beta));
    return c;
}

// Tails h^j (j >= k) and r. One h table means h^j = h for every j.
class TailFamily {
public:
    TailFamily(std::size_t k, std::vector<TailTable> h, TailTable r, TailBounds bounds)
        : k_(k), h_(std::move(h)), r_(std::move(r)), b_(std::move(bounds)) {
        if (k_ < 1) throw ParamError("base index k must be >= 1");
        if (h_.empty()) throw ParamError("tail family needs at least one h table");
        if (!(b_.beta > 1.0)) throw ParamError("beta must be > 1");
        if (!(b_.beta_prime > 0.0 && b_.beta_prime <= b_.beta)) throw ParamError("beta_prime must lie in (0, beta]");
        if (!(b_.C_beta >= 1.0 && b_.C_beta_prime >= 1.0)) throw ParamError("C_beta and C_beta_prime must be >= 1");
        for (double th : b_.Theta)
            if (!(th >= 0.0 && th < 1.0)) throw ParamError("Theta_j must lie in [0,1)");
        for (std::size_t i = 0; i < h_.size(); ++i) check_table(h_[i], "h^" + std::to_string(k_ + i));
        check_table(r_, "r");
        for (std::size_t i = 0; i < h_.size(); ++i) {
            const std::size_t j = k_ + i;
            const double need = minimal_constant(h_[i], b_.beta, theta(j) * static_cast<double>(j));
            if (need > b_.C_beta * (1.0 + 1e-12))
                throw ParamError("h^" + std::to_string(j) + " violates the declared bound; C_beta must be >= " +
                                 std::to_string(need));
        }
        const double need_r = minimal_constant(r_, b_.beta_prime, theta(k_) * static_cast<double>(k_));
        if (need_r > b_.C_beta_prime * (1.0 + 1e-12))
            throw ParamError("r violates the declared bound; C_beta_prime must be >= " + std::to_string(need_r));
    }

    static TailFamily stationary(TailTable h, TailTable r, TailBounds bounds) {
        return TailFamily(1, {std::move(h)}, std::move(r), std::move(bounds));
    }

    [[nodiscard]] std::size_t k() const noexcept { return k_; }
    [[nodiscard]] bool is_stationary() const noexcept { return h_.size() == 1; }
    [[nodiscard]] const TailBounds& bounds() const noexcept { return b_; }
    [[nodiscard]] const TailTable& r() const noexcept { return r_; }
    [[nodiscard]] std::size_t tables() const noexcept { return h_.size(); }

    [[nodiscard]] const TailTable& h(std::size_t j) const {
        if (is_stationary()) return h_.front();
        if (j < k_ || j - k_ >= h_.size())
            throw HorizonError("h^" + std::to_string(j) + " is not tabulated");
        return h_[j - k_];
    }

    [[nodiscard]] double theta(std::size_t j) const noexcept {
        return j >= k_ && j - k_ < b_.Theta.size() ? b_.Theta[j - k_] : 0.0;
    }

    // The tail bounds need small Theta; no threshold is known, 0.2 is advisory.
    [[nodiscard]] bool theta_warning() const noexcept {
        return std::any_of(b_.Theta.begin(), b_.Theta.end(), [](double t) { return t > 0.2; });
    }

    // Smallest tabulated depth over all h tables.
    [[nodiscard]] std::size_t depth() const noexcept {
        std::size_t d = h_.front().n_max();
        for (const auto& t : h_) d = std::min(d, t.n_max());
        return d;
    }

private:
    static void check_table(const TailTable& t, const std::string& name) {
        if (t.values.size() < 2) throw ParamError(name + " must be tabulated at n = 1");
        if (std::abs(t.values[1] - 1.0) > 1e-12) throw ParamError(name + "(1) must equal 1");
        for (std::size_t n = 1; n < t.values.size(); ++n) {
            if (!(t.values[n] >= 0.0 && t.values[n] <= 1.0)) throw ParamError(name + " has values outside [0,1]");
            if (t.values[n] > t.values[n - 1] + 1e-15 && n > 1) throw ParamError(name + " is not nonincreasing");
        }
    }

    std::size_t k_;
    std::vector<TailTable> h_;
    TailTable r_;
    TailBounds b_;
};

// h_n^k(l) = C_h sum_{i=0}^{n} h^{k+i}(n + l - i), with h(m) = 0 for m <= 0.
inline TailTable compose_tail(const TailFamily& fam, double C_h, std::size_t k, std::size_t n, std::size_t horizon) {
    std::vector<double> v(horizon + 1, 0.0);
    for (std::size_t l = 0; l <= horizon; ++l) {
        double s = 0.0;
        for (std::size_t i = 0; i <= n; ++i) {
            const std::size_t m = n + l - i;
            if (m == 0) continue;
            s += fam.h(k + i).at(m);
        }
        v[l] = C_h * s;
    }
    return TailTable(k, TailLabel::HK, std::move(v));
}

// Envelope of a composed tail: min{1, h_n^k(1), ..., h_n^k(l)}.
inline TailTable compose_tail_hat(const TailFamily& fam, double C_h, std::size_t k, std::size_t n, std::size_t horizon) {
    return hat_envelope(compose_tail(fam, C_h, k, n, horizon));
}

// The law of S: P(X_1 >= l) = r_hat(l - n0) and
// P(X_{j+1} >= l | X_1..X_j) = h_hat^{k + X_1 + ... + X_{j-1}}_{X_j}(l - n0),
// with r_hat(m) = h_hat(m) = 1 for m <= 0.
class CouplingModel {
public:
    CouplingModel(CouplingConstants c, TailFamily fam, std::size_t horizon)
        : c_(c), fam_(std::move(fam)), horizon_(horizon) {
        if (horizon_ < 1) throw ParamError("horizon must be >= 1");
        if (fam_.r().n_max() < horizon_ + 1)
            throw HorizonError("r is tabulated to " + std::to_string(fam_.r().n_max()) + ", need " +
                               std::to_string(horizon_ + 1));
        r_hat_ = hat_envelope(fam_.r());
        r_hat_.values.resize(horizon_ + 2);
        const std::size_t width = 2 * horizon_ + 4;
        if (fam_.depth() < width)
            throw HorizonError("h tables are tabulated to " + std::to_string(fam_.depth()) + ", need " +
                               std::to_string(width));
        if (fam_.is_stationary()) {
            // Suffix sums keep small composed tails accurate.
            const auto& h = fam_.h(fam_.k()).values;
            suffix_.assign(width + 2, 0.0);
            for (std::size_t m = width; m >= 1; --m) suffix_[m] = suffix_[m + 1] + h[m];
        } else {
            if (fam_.tables() < horizon_ + 1)
                throw HorizonError("need h^j for j up to k + " + std::to_string(horizon_));
            // diag_[r][m] = sum_{r' <= r} h^{k+r'}(m + r - r'), summed from the small end.
            width_ = width;
            diag_.assign((horizon_ + 1) * width_, 0.0);
            for (std::size_t r = 0; r <= horizon_; ++r) {
                const auto& h = fam_.h(fam_.k() + r).values;
                for (std::size_t m = 1; m < width_; ++m) {
                    const double prev = r > 0 && m + 1 < width_ ? diag_[(r - 1) * width_ + m + 1] : 0.0;
                    diag_[r * width_ + m] = prev + h[m];
                }
            }
        }
    }

    [[nodiscard]] const CouplingConstants& constants() const noexcept { return c_; }
    [[nodiscard]] const TailFamily& family() const noexcept { return fam_; }
    [[nodiscard]] const TailTable& r_hat() const noexcept { return r_hat_; }
    [[nodiscard]] std::size_t horizon() const noexcept { return horizon_; }
    [[nodiscard]] std::size_t k() const noexcept { return fam_.k(); }

    [[nodiscard]] double r_hat_at(long m) const {
        if (m <= 0) return 1.0;
        if (static_cast<std::size_t>(m) >= r_hat_.values.size())
            throw HorizonError("r_hat needed at " + std::to_string(m));
        return r_hat_.values[static_cast<std::size_t>(m)];
    }

    // Raw composed tail h_x^c(l), l >= 1, c >= k.
    [[nodiscard]] double composed(std::size_t c, std::size_t x, std::size_t l) const {
        if (fam_.is_stationary()) {
            if (x + l + 1 >= suffix_.size()) throw HorizonError("composed tail beyond horizon");
            return c_.C_h * (suffix_[l] - suffix_[x + l + 1]);
        }
        const std::size_t r = c + x - fam_.k();
        if (c < fam_.k() || r > horizon_ || x + l + 1 + r >= width_)
            throw HorizonError("composed tail beyond horizon");
        const double lower = c > fam_.k() ? diag_[(c - 1 - fam_.k()) * width_ + x + l + 1] : 0.0;
        return c_.C_h * (diag_[r * width_ + l] - lower);
    }

    // h_hat^c_x(m); h^j nonincreasing makes the running minimum a plain clamp.
    [[nodiscard]] double h_hat(std::size_t c, std::size_t x, long m) const {
        if (m <= 0) return 1.0;
        return std::min(1.0, composed(c, x, static_cast<std::size_t>(m)));
    }

    // P(X_1 >= l) and P(X_{j+1} >= l | base index c, last increment x).
    [[nodiscard]] double first_tail(std::size_t l) const { return r_hat_at(static_cast<long>(l) - static_cast<long>(c_.n0)); }
    [[nodiscard]] double next_tail(std::size_t c, std::size_t x, std::size_t l) const {
        return h_hat(c, x, static_cast<long>(l) - static_cast<long>(c_.n0));
    }

private:
    CouplingConstants c_;
    TailFamily fam_;
    std::size_t horizon_;
    TailTable r_hat_;
    std::vector<double> suffix_;
    std::vector<double> diag_;
    std::size_t width_ = 0;
};

struct AlphaWeights {
    std::size_t n0 = 1;
    std::size_t j_max = 0;
    std::vector<double> alpha; // alpha[j], j = n0+1..j_max (lower entries are 0)
    double residual = 0.0;     // r_hat(j_max + 1 - n0)

    [[nodiscard]] double total() const {
        double s = residual;
        for (double a : alpha) s += a;
        return s;
    }
};

// alpha_j = r_hat(j - n0) - r_hat(j + 1 - n0), j = n0+1..j_max.
inline AlphaWeights alpha_weights(const TailTable& r_hat, std::size_t n0, std::size_t j_max) {
    if (r_hat.values.size() < 2 || std::abs(r_hat.values[1] - 1.0) > 1e-15)
        throw NotNormalized("r_hat(1) must equal 1");
    if (j_max <= n0) throw ParamError("j_max must exceed n0");
    if (j_max + 1 - n0 > r_hat.n_max()) throw DepthError("r_hat not tabulated to j_max + 1 - n0");
    AlphaWeights w;
    w.n0 = n0;
    w.j_max = j_max;
    w.alpha.assign(j_max + 1, 0.0);
    for (std::size_t j = n0 + 1; j <= j_max; ++j) w.alpha[j] = r_hat.values[j - n0] - r_hat.values[j + 1 - n0];
    w.residual = r_hat.values[j_max + 1 - n0];
    return w;
}

// 2 sum_{j > n} alpha_j, including the residual mass beyond j_max.
inline double memory_loss_bound(const AlphaWeights& w, std::size_t n) {
    double s = w.residual;
    for (std::size_t j = w.j_max; j > n && j > w.n0; --j) s += w.alpha[j];
    return 2.0 * s;
}

// Exact P(S >= n), n = 0..n_max. The DP weight of state (s, x) is
// sum_j (1-theta)^{j-1} P(S_j = s, X_j = x), so P(S = s) = theta sum_x w(s, x)
// and tau never needs truncating. Mass of paths that jump past n_max is
// accumulated separately so that small tails are never formed by subtraction.
inline TailTable s_tail_dp(const CouplingModel& model, std::size_t n_max) {
    if (n_max > model.horizon())
        throw HorizonError("n_max " + std::to_string(n_max) + " exceeds the model horizon " +
                           std::to_string(model.horizon()));
    const double theta = model.constants().theta;
    const std::size_t n0 = model.constants().n0;
    const std::size_t k = model.k();
    std::vector<std::vector<double>> w(n_max + 1);
    for (std::size_t s = 0; s <= n_max; ++s) w[s].assign(s + 1, 0.0);
    double escaped = model.first_tail(n_max + 1);
    for (std::size_t x = n0; x <= n_max; ++x) w[x][x] += model.first_tail(x) - model.first_tail(x + 1);

    std::vector<double> p_s(n_max + 1, 0.0);
    std::vector<double> tail_at(n_max + 2);
    for (std::size_t s = 0; s <= n_max; ++s) {
        for (std::size_t x = 0; x <= s; ++x) {
            const double ws = w[s][x];
            if (ws == 0.0) continue;
            p_s[s] += theta * ws;
            const double carry = (1.0 - theta) * ws;
            const std::size_t c = k + s - x;
            const std::size_t room = n_max - s;
            // tail_at[l] = P(X' >= l) for l = 1 .. room+1
            for (std::size_t l = 1; l <= room + 1; ++l) tail_at[l] = l <= n0 ? 1.0 : model.next_tail(c, x, l);
            escaped += carry * tail_at[room + 1];
            for (std::size_t xn = n0 + 1; xn <= room; ++xn) {
                const double p = tail_at[xn] - tail_at[xn + 1];
                if (p > 0.0) w[s + xn][xn] += carry * p;
            }
        }
    }
    TailTable t(k, TailLabel::STail, std::vector<double>(n_max + 1));
    double acc = escaped;
    for (std::size_t n = n_max + 1; n-- > 0;) {
        acc += p_s[n];
        t.values[n] = acc;
    }
    return t;
}

// Monte Carlo tail of S by inverse-transform sampling of each conditional tail.
// 64 fixed shards with keyed streams make the result independent of threads.
inline TailTable s_tail_mc(const CouplingModel& model, std::size_t n_max, std::size_t samples, std::uint64_t seed) {
    if (samples < 1) throw ParamError("samples must be >= 1");
    if (n_max > model.horizon()) throw HorizonError("n_max exceeds the model horizon");
    constexpr std::size_t shards = 64;
    const double theta = model.constants().theta;
    const std::size_t n0 = model.constants().n0;
    const std::size_t k = model.k();
    std::vector<std::vector<std::uint64_t>> counts(shards, std::vector<std::uint64_t>(n_max + 2, 0));
    const std::uint64_t base_seed = hash_key(seed, purpose_key("coupling-mc"));
    detail::parallel_for(
        shards,
        [&](std::size_t b, std::size_t e) {
            for (std::size_t sh = b; sh < e; ++sh) {
                SplitMix64 rng(hash_key(base_seed, sh));
                const std::size_t lo = sh * samples / shards, hi = (sh + 1) * samples / shards;
                for (std::size_t i = lo; i < hi; ++i) {
                    std::size_t s = 0, x = 0;
                    bool first = true, over = false;
                    for (;;) {
                        // X = max{l : u < P(X >= l)}; stop early once S must exceed n_max.
                        const double u = rng.uniform();
                        const std::size_t c = k + s - x;
                        std::size_t l = n0 + 1;
                        while (u < (first ? model.first_tail(l) : model.next_tail(c, x, l))) {
                            if (s + l > n_max) {
                                over = true;
                                break;
                            }
                            ++l;
                        }
                        if (over) break;
                        x = l - 1;
                        s += x;
                        first = false;
                        if (rng.uniform() < theta) break;
                    }
                    ++counts[sh][over ? n_max + 1 : s];
                }
            }
        },
        1);
    std::vector<std::uint64_t> total(n_max + 2, 0);
    for (const auto& c : counts)
        for (std::size_t i = 0; i < c.size(); ++i) total[i] += c[i];
    TailTable t(k, TailLabel::STail, std::vector<double>(n_max + 1));
    t.std_error.assign(n_max + 1, 0.0);
    const double N = static_cast<double>(samples);
    std::uint64_t at_least = 0;
    for (std::size_t n = n_max + 2; n-- > 0;) {
        at_least += total[n];
        if (n > n_max) continue;
        const double p = static_cast<double>(at_least) / N;
        t.values[n] = p;
        t.std_error[n] = std::sqrt(p * (1.0 - p) / N);
    }
    return t;
}

struct STailBoundCheck {
    double sup_ratio = 0.0;
    std::size_t argmax_n = 0;
    bool plateau = false;                    // sup attained at n <= n_max / 2
    bool nonincreasing_after_argmax = false; // ratio sequence beyond the argmax
    std::vector<double> ratio;               // ratio[n], n = 1..n_max
};

// Ratios n^{beta'} P(S >= n) / (theta* k + 1)^{beta'} over the table.
inline STailBoundCheck check_stail_bound(const TailTable& table, double beta_prime, double theta_star, std::size_t k) {
    STailBoundCheck r;
    const std::size_t n_max = table.n_max();
    if (n_max < 1) throw ParamError("table must reach n = 1");
    const double scale = std::pow(theta_star * static_cast<double>(k) + 1.0, beta_prime);
    r.ratio.assign(n_max + 1, 0.0);
    for (std::size_t n = 1; n <= n_max; ++n) {
        r.ratio[n] = std::pow(static_cast<double>(n), beta_prime) * table.values[n] / scale;
        if (r.ratio[n] > r.sup_ratio) {
            r.sup_ratio = r.ratio[n];
            r.argmax_n = n;
        }
    }
    r.plateau = r.argmax_n <= n_max / 2;
    r.nonincreasing_after_argmax = true;
    for (std::size_t n = r.argmax_n + 1; n <= n_max; ++n)
        if (r.ratio[n] > r.ratio[n - 1]) r.nonincreasing_after_argmax = false;
    return r;
}

} // namespace memloss
