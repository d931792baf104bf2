#include "memloss/coupling.hpp"
#include "memloss/partitions.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <vector>

using namespace memloss;

namespace {

TailTable table(std::vector<double> v) { return TailTable(1, TailLabel::R, std::move(v)); }

TailBounds bounds_for(const TailTable& h, const TailTable& r, double beta, double beta_prime) {
    TailBounds b;
    b.beta = beta;
    b.beta_prime = beta_prime;
    b.C_beta = std::max(1.0, minimal_constant(h, beta));
    b.C_beta_prime = std::max(1.0, minimal_constant(r, beta_prime));
    return b;
}

// h = min(1, m^{-max(2, beta')}), r = min(1, m^{-beta'}).
CouplingModel power_model(double beta_prime, double theta, std::size_t horizon) {
    const std::size_t depth = 2 * horizon + 4;
    const double beta = std::max(2.0, beta_prime);
    auto h = synthetic_power_tail(beta, depth);
    auto r = synthetic_power_tail(beta_prime, depth);
    const auto b = bounds_for(h, r, beta, beta_prime);
    return CouplingModel(CouplingConstants::make(theta, 1), TailFamily::stationary(h, r, b), horizon);
}

// X = 2 always: n0 = 1 and r_hat = h_hat = 1 for m <= 1, 0 after.
CouplingModel degenerate_model(double theta, std::size_t horizon) {
    const std::size_t depth = 2 * horizon + 4;
    auto h = synthetic_step_tail(1, depth);
    TailBounds b;
    b.beta = 2.0;
    b.beta_prime = 2.0;
    return CouplingModel(CouplingConstants::make(theta, 1), TailFamily::stationary(h, h, b), horizon);
}

double max_z(const TailTable& dp, const TailTable& mc) {
    double worst = 0.0;
    for (std::size_t n = 0; n <= dp.n_max(); ++n) {
        const double p = dp(n);
        if (p <= 0.0 || p >= 1.0) {
            EXPECT_EQ(mc(n), p) << "n=" << n;
            continue;
        }
        const double se = std::sqrt(p * (1 - p) / 100000.0);
        worst = std::max(worst, std::abs(mc(n) - p) / se);
    }
    return worst;
}

} // namespace

TEST(KConstants, Examples) {
    auto a = derive_k_constants(1.0, 2.0);
    EXPECT_DOUBLE_EQ(a.K2, 4.0);
    EXPECT_DOUBLE_EQ(a.K1, 3.0);
    auto b = derive_k_constants(0.0, 2.0);
    EXPECT_EQ(b.K1, 0.0);
    EXPECT_EQ(b.K2, 0.0);
    EXPECT_TRUE(CouplingConstants::make(0.25, 1, 0.0).degenerate_k());
    auto c = derive_k_constants(2.0, 2.0);
    EXPECT_DOUBLE_EQ(c.K2, 8.0);
    EXPECT_DOUBLE_EQ(c.K1, 6.0);
    EXPECT_THROW(derive_k_constants(1.0, 1.0), ParamError);
    // Strict inequality K2 > K / (1 - 1/lambda).
    for (double lam : {1.5, 2.0, 4.0}) EXPECT_GT(derive_k_constants(1.0, lam).K2, 1.0 / (1.0 - 1.0 / lam));
}

TEST(CouplingConstants, Derived) {
    const auto c = CouplingConstants::make(0.5, 2, 1.0, 2.0, 0.5);
    EXPECT_DOUBLE_EQ(c.C_h, 2.0 * std::exp(4.0 * 0.5));
    EXPECT_EQ(CouplingConstants::make(0.25, 1).C_h, 2.0);
    EXPECT_THROW(CouplingConstants::make(0.6, 1), ParamError);
    EXPECT_THROW(CouplingConstants::make(0.0, 1), ParamError);
}

TEST(HatEnvelope, Examples) {
    EXPECT_EQ(hat_envelope(table({1, 1, 0.5, 0.7, 0.1})).values, (std::vector<double>{1, 1, 0.5, 0.5, 0.1}));
    const auto mono = table({1, 1, 0.8, 0.3, 0.3, 0.01});
    EXPECT_EQ(hat_envelope(mono).values, mono.values);
    for (double v : hat_envelope(table({2, 2, 2, 2})).values) EXPECT_EQ(v, 1.0);
}

TEST(HatEnvelope, Idempotent) {
    SplitMix64 rng(3);
    for (int i = 0; i < 50; ++i) {
        std::vector<double> v(60);
        for (double& x : v) x = 1.5 * rng.uniform();
        const auto once = hat_envelope(table(v));
        EXPECT_EQ(hat_envelope(once).values, once.values);
        EXPECT_TRUE(once.is_nonincreasing());
    }
}

TEST(ComposeTail, Examples) {
    const std::size_t depth = 400;
    const auto h = synthetic_power_tail(2.0, depth);
    const auto fam = TailFamily::stationary(h, h, bounds_for(h, h, 2.0, 2.0));
    const auto t0 = compose_tail(fam, 2.0, 1, 0, 100);
    for (std::size_t l = 1; l <= 100; ++l) EXPECT_DOUBLE_EQ(t0(l), 2.0 * h(l));
    const auto t5 = compose_tail(fam, 2.0, 1, 5, 100);
    for (std::size_t l = 1; l <= 100; ++l) {
        double s = 0.0;
        for (std::size_t m = l; m <= 5 + l; ++m) s += std::min(1.0, 1.0 / double(m * m));
        EXPECT_NEAR(t5(l), 2.0 * s, 1e-14);
    }
    EXPECT_LE(compose_tail_hat(fam, 2.0, 1, 5, 100)(1), 1.0);
}

TEST(ComposeTail, ZeroTails) {
    // h = 1{m <= 1}: every term with argument >= 2 vanishes.
    const auto h = synthetic_step_tail(1, 100);
    TailBounds b;
    const auto fam = TailFamily::stationary(h, h, b);
    const auto t = compose_tail(fam, 2.0, 1, 3, 50);
    for (std::size_t l = 2; l <= 50; ++l) EXPECT_EQ(t(l), 0.0);
}

// Nonstationary family: the model's anti-diagonal sums match direct summation.
TEST(ComposeTail, NonstationaryModelMatchesDirectSum) {
    const std::size_t horizon = 40, depth = 2 * horizon + 4;
    std::vector<TailTable> hs;
    for (std::size_t j = 0; j <= horizon; ++j) hs.push_back(synthetic_power_tail(2.0 + 0.5 * std::sin(double(j)), depth));
    TailBounds b;
    b.beta = 1.5;
    b.beta_prime = 1.5;
    const auto r = synthetic_power_tail(1.5, depth);
    const TailFamily fam(3, hs, r, b);
    const CouplingModel model(CouplingConstants::make(0.25, 1), fam, horizon);
    for (std::size_t c = 3; c <= 3 + 10; ++c)
        for (std::size_t x = 0; c + x <= 3 + horizon && x <= 12; ++x) {
            const auto direct = compose_tail(fam, 2.0, c, x, 20);
            for (std::size_t l = 1; l <= 20; ++l) EXPECT_NEAR(model.composed(c, x, l), direct(l), 1e-13);
        }
}

TEST(TailFamily, RejectsViolatedBounds) {
    const auto h = synthetic_power_tail(1.5, 100);
    TailBounds b; // beta = 2, C_beta = 1
    EXPECT_THROW(TailFamily::stationary(h, h, b), ParamError);
    auto bad = synthetic_power_tail(2.0, 100);
    bad.values[1] = 0.5;
    EXPECT_THROW(TailFamily::stationary(bad, bad, TailBounds{}), ParamError);
    TailBounds warn;
    warn.Theta = {0.3};
    const auto g = synthetic_power_tail(2.0, 100);
    warn.C_beta = minimal_constant(g, 2.0, 0.3);
    warn.C_beta_prime = std::max(1.0, minimal_constant(g, 1.0, 0.3));
    EXPECT_TRUE(TailFamily::stationary(g, g, warn).theta_warning());
}

TEST(AlphaWeights, Examples) {
    std::vector<double> v(200, 1.0);
    for (std::size_t n = 1; n < 200; ++n) v[n] = std::min(1.0, 1.0 / double(n));
    const auto w = alpha_weights(table(v), 1, 150);
    EXPECT_NEAR(w.alpha[2], 0.5, 1e-15);
    EXPECT_NEAR(w.alpha[3], 1.0 / 6.0, 1e-15);
    EXPECT_NEAR(w.alpha[4], 1.0 / 12.0, 1e-15);
    // Telescoping: sum_{j <= J} alpha_j = 1 - 1/J.
    double s = 0.0;
    for (std::size_t j = 2; j <= 150; ++j) {
        s += w.alpha[j];
        EXPECT_NEAR(s, 1.0 - 1.0 / double(j), 1e-14);
    }
    const auto step = alpha_weights(hat_envelope(synthetic_step_tail(5, 50)), 2, 30);
    for (std::size_t j = 0; j <= 30; ++j) EXPECT_EQ(step.alpha[j], j == 7 ? 1.0 : 0.0);
    EXPECT_THROW(alpha_weights(table({1, 0.9, 0.5}), 1, 1), NotNormalized);
}

TEST(AlphaWeights, Completeness) {
    SplitMix64 rng(77);
    for (int i = 0; i < 10; ++i) {
        std::vector<double> v(500, 1.0);
        for (std::size_t n = 2; n < 500; ++n) v[n] = v[n - 1] * (1.0 - 0.2 * rng.uniform());
        const auto w = alpha_weights(table(v), 1 + i % 3, 400);
        EXPECT_NEAR(w.total(), 1.0, 1e-12);
        for (double a : w.alpha) EXPECT_GE(a, 0.0);
    }
}

TEST(MemoryLossBound, Examples) {
    std::vector<double> v(200, 1.0);
    for (std::size_t n = 1; n < 200; ++n) v[n] = 1.0 / double(n);
    const auto w = alpha_weights(table(v), 1, 150);
    EXPECT_NEAR(memory_loss_bound(w, 2), 1.0, 1e-14);
    EXPECT_EQ(memory_loss_bound(w, 150), 2.0 * w.residual);
    EXPECT_EQ(memory_loss_bound(w, 400), 2.0 * w.residual);
    for (std::size_t n = 1; n < 160; ++n) {
        EXPECT_LE(memory_loss_bound(w, n + 1), memory_loss_bound(w, n));
        // Telescoping: 2 sum_{j > n} alpha_j = 2 r_hat(n + 1 - n0) for n >= n0.
        EXPECT_NEAR(memory_loss_bound(w, n), 2.0 * v[std::min<std::size_t>(n, 150)], 1e-13);
    }
}

TEST(STailDp, DegenerateGeometric) {
    const auto model = degenerate_model(0.5, 100);
    const auto t = s_tail_dp(model, 100);
    EXPECT_EQ(t(0), 1.0);
    for (std::size_t m = 1; m <= 50; ++m) EXPECT_NEAR(t(2 * m), std::pow(0.5, double(m - 1)), 1e-12);
}

TEST(STailDp, BelowN0IsOne) {
    const std::size_t horizon = 60;
    const auto h = synthetic_power_tail(2.0, 2 * horizon + 4);
    const auto fam = TailFamily::stationary(h, h, bounds_for(h, h, 2.0, 2.0));
    const auto t = s_tail_dp(CouplingModel(CouplingConstants::make(0.3, 4), fam, horizon), horizon);
    for (std::size_t n = 0; n <= 4; ++n) EXPECT_NEAR(t(n), 1.0, 1e-15);
    EXPECT_LT(t(5), 1.0);
    EXPECT_THROW(s_tail_dp(CouplingModel(CouplingConstants::make(0.3, 4), fam, horizon), horizon + 1), HorizonError);
}

// Direct enumeration of S for tiny n: sum over paths of X values.
TEST(STailDp, MatchesPathEnumeration) {
    const std::size_t horizon = 30;
    const auto model = power_model(1.5, 0.3, horizon);
    const double theta = 0.3;
    const std::size_t N = 12;
    std::vector<double> pS(N + 1, 0.0);
    // P(S = s): recurse over (partial sum, base index, last x, number of terms).
    std::function<void(std::size_t, std::size_t, std::size_t, double)> go = [&](std::size_t s, std::size_t c,
                                                                             std::size_t x, double prob) {
        // Stop here (tau = current number of terms) with probability theta.
        if (s <= N) pS[s] += prob * theta;
        for (std::size_t l = 1; s + l <= N; ++l) {
            const double px = model.next_tail(c, x, l) - model.next_tail(c, x, l + 1);
            if (px > 0) go(s + l, c + x, l, prob * (1 - theta) * px);
        }
    };
    for (std::size_t l = 1; l <= N; ++l) {
        const double px = model.first_tail(l) - model.first_tail(l + 1);
        if (px > 0) go(l, model.k(), l, px);
    }
    const auto t = s_tail_dp(model, N);
    double below = 0.0;
    for (std::size_t n = 1; n <= N; ++n) {
        below += pS[n - 1];
        EXPECT_NEAR(t(n), 1.0 - below, 1e-12) << "n=" << n;
    }
}

TEST(STailMc, Degenerate) {
    const auto model = degenerate_model(0.5, 50);
    const auto t = s_tail_mc(model, 50, 100000, 1);
    EXPECT_EQ(t(0), 1.0);
    EXPECT_NEAR(t(4), 0.5, 3 * std::sqrt(0.25 / 100000));
    EXPECT_EQ(t(3), t(4));
}

TEST(STailMc, AgreesWithDp) {
    for (double bp : {1.5, 2.0, 2.5}) {
        const auto model = power_model(bp, 0.25, 200);
        const auto dp = s_tail_dp(model, 200);
        const auto mc = s_tail_mc(model, 200, 100000, 42);
        EXPECT_LE(max_z(dp, mc), 4.0) << "beta'=" << bp;
        EXPECT_NEAR(dp(0), 1.0, 1e-15);
    }
}

TEST(STailMc, SeedsIndependent) {
    const auto model = power_model(2.0, 0.25, 100);
    const auto a = s_tail_mc(model, 100, 20000, 1), b = s_tail_mc(model, 100, 20000, 2);
    EXPECT_NE(a.values, b.values);
    for (std::size_t n = 0; n <= 100; ++n) {
        const double se = std::hypot(a.std_error[n], b.std_error[n]);
        EXPECT_LE(std::abs(a(n) - b(n)), 6 * se + 1e-15);
    }
}

TEST(STailDp, ThetaDomination) {
    const auto lo = s_tail_dp(power_model(2.0, 0.25, 300), 300);
    const auto hi = s_tail_dp(power_model(2.0, 0.5, 300), 300);
    for (std::size_t n = 0; n <= 300; ++n) EXPECT_LE(hi(n), lo(n) + 1e-15);
}

TEST(CheckStailBound, Examples) {
    std::vector<double> v(101, 1.0);
    for (std::size_t n = 1; n <= 100; ++n) v[n] = 1.0 / double(n);
    const auto exact = check_stail_bound(table(v), 1.0, 0.0, 1);
    EXPECT_NEAR(exact.sup_ratio, 1.0, 1e-15);

    const auto geo = check_stail_bound(s_tail_dp(degenerate_model(0.5, 200), 200), 2.0, 0.0, 1);
    EXPECT_TRUE(std::isfinite(geo.sup_ratio));
    EXPECT_LE(geo.argmax_n, 20u);
    EXPECT_TRUE(geo.plateau);
}

TEST(CheckStailBound, SyntheticPlateau) {
    const auto model = power_model(2.0, 0.25, 400);
    const auto chk = check_stail_bound(s_tail_dp(model, 400), 2.0, 0.0, 1);
    EXPECT_TRUE(chk.plateau);
    EXPECT_TRUE(chk.nonincreasing_after_argmax);
}

// Stationary LSV gamma = 1/2 tails (beta = 2) through the DP with beta' = 1.
TEST(EndToEnd, LsvTailsThroughDp) {
    const std::size_t horizon = 600, depth = 2 * horizon + 4;
    const auto seq = ParamSequence::constant(MapParams::lsv(0.5));
    const auto h = return_time_tail(seq, 1, depth, TailBase::MK);
    TailBounds b;
    b.beta = 2.0;
    b.beta_prime = 1.0;
    b.C_beta = std::max(1.0, minimal_constant(h, 2.0));
    b.C_beta_prime = std::max(1.0, minimal_constant(h, 1.0));
    const CouplingModel model(CouplingConstants::make(0.25, 1), TailFamily::stationary(h, h, b), horizon);
    const auto t = s_tail_dp(model, horizon);
    const auto chk = check_stail_bound(t, 1.0, 0.0, 1);
    EXPECT_TRUE(std::isfinite(chk.sup_ratio));
    EXPECT_TRUE(chk.plateau);
    // The ratio settles instead of growing.
    EXPECT_LE(chk.ratio[horizon], 1.05 * chk.ratio[horizon / 2]);
}
