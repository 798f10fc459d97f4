#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "vivid/priors.hpp"
#include "vivid/samplers.hpp"
#include "vivid/schedule.hpp"
#include "vivid/tensor.hpp"

using namespace vivid;

namespace {

LatentFrames randn(int f, int c, int h, int w, unsigned seed) {
    LatentFrames z(f, c, h, w);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n(0.0, 1.0);
    for (double& v : z.data) v = n(rng);
    return z;
}

}  // namespace

TEST_CASE("linear beta schedule endpoints and validation") {
    const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    REQUIRE(s.T() == 1000);
    CHECK(s.alpha_bars[0] == Catch::Approx(0.9999).margin(1e-12));
    CHECK(s.betas.back() == Catch::Approx(2e-2).margin(1e-15));

    const NoiseSchedule one = linear_beta_schedule(1, 0.5, 0.5);
    REQUIRE(one.T() == 1);
    CHECK(one.alpha_bars[0] == Catch::Approx(0.5).margin(1e-15));

    CHECK_THROWS_AS(linear_beta_schedule(0, 1e-4, 2e-2), std::invalid_argument);
    CHECK_THROWS_AS(linear_beta_schedule(10, 0.0, 2e-2), std::invalid_argument);
    CHECK_THROWS_AS(linear_beta_schedule(10, 0.3, 0.2), std::invalid_argument);
    CHECK_THROWS_AS(linear_beta_schedule(10, 0.5, 1.0), std::invalid_argument);
}

TEST_CASE("alpha_bars match an extended-precision product oracle") {
    const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    long double running = 1.0L;
    for (int t = 0; t < 1000; ++t) {
        const long double beta = 1e-4L + (2e-2L - 1e-4L) * t / 999.0L;
        running *= (1.0L - beta);
        if (t == 999 || t == 0 || t == 500) {
            CHECK(std::fabs(static_cast<double>(running) - s.alpha_bars[t]) <
                  1e-15 + 1e-12 * static_cast<double>(running));
        }
    }
    for (int t = 1; t < 1000; ++t) {
        CHECK(s.alpha_bars[t] < s.alpha_bars[t - 1]);
        CHECK(s.alpha_bars[t] > 0.0);
        CHECK(s.alpha_bars[t] < 1.0);
    }
}

TEST_CASE("timestep plan stride and bounds") {
    const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    const TimestepPlan plan = make_timestep_plan(s, 50);
    REQUIRE(plan.count() == 50);
    CHECK(plan.steps.front() == 999);
    CHECK(plan.steps.back() == 19);
    for (int i = 1; i < 50; ++i) CHECK(plan.steps[i - 1] - plan.steps[i] == 20);
    CHECK(plan.next_of(49) == kFinalStep);

    const TimestepPlan all = make_timestep_plan(s, 1000);
    REQUIRE(all.count() == 1000);
    for (int i = 0; i < 1000; ++i) CHECK(all.steps[i] == 999 - i);

    // Enumeration oracle for T=10, 3 steps: stride floor(10/3)=3.
    const NoiseSchedule small = linear_beta_schedule(10, 1e-4, 2e-2);
    const TimestepPlan p3 = make_timestep_plan(small, 3);
    REQUIRE(p3.steps == std::vector<int>{9, 6, 3});

    CHECK_THROWS_AS(make_timestep_plan(small, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_timestep_plan(small, 11), std::invalid_argument);
}

TEST_CASE("ddim step algebra") {
    const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    const LatentFrames z = randn(2, 3, 2, 2, 1);

    SECTION("zero eps rescales by sqrt(abar ratio)") {
        LatentFrames eps(2, 3, 2, 2);
        const LatentFrames out = ddim_step(z, eps, 800, 600, s);
        const double k = std::sqrt(s.alpha_bar(600) / s.alpha_bar(800));
        for (std::size_t i = 0; i < z.data.size(); ++i)
            CHECK(out.data[i] == Catch::Approx(k * z.data[i]).margin(1e-12));
    }

    SECTION("no-op when t_next == t_cur and eta == 0") {
        const LatentFrames eps = randn(2, 3, 2, 2, 2);
        const LatentFrames out = ddim_step(z, eps, 700, 700, s);
        for (std::size_t i = 0; i < z.data.size(); ++i)
            CHECK(out.data[i] == Catch::Approx(z.data[i]).margin(1e-10));
    }

    SECTION("matches extended-precision formula re-evaluation") {
        const LatentFrames eps = randn(2, 3, 2, 2, 3);
        const LatentFrames out = ddim_step(z, eps, 640, 360, s);
        const long double ab_c = s.alpha_bar(640);
        const long double ab_n = s.alpha_bar(360);
        for (std::size_t i = 0; i < z.data.size(); ++i) {
            const long double z0 =
                (static_cast<long double>(z.data[i]) - std::sqrt(1.0L - ab_c) * eps.data[i]) /
                std::sqrt(ab_c);
            const long double want = std::sqrt(ab_n) * z0 + std::sqrt(1.0L - ab_n) * eps.data[i];
            CHECK(std::fabs(out.data[i] - static_cast<double>(want)) < 1e-12);
        }
    }

    SECTION("shape and finiteness errors") {
        const LatentFrames bad = randn(1, 3, 2, 2, 4);
        CHECK_THROWS_AS(ddim_step(z, bad, 800, 600, s), ShapeError);
        LatentFrames nan = z;
        nan.data[0] = std::nan("");
        CHECK_THROWS_AS(ddim_step(z, nan, 800, 600, s), NumericError);
    }

    SECTION("final sentinel predicts z0") {
        const LatentFrames eps = randn(2, 3, 2, 2, 5);
        const LatentFrames out = ddim_step(z, eps, 19, kFinalStep, s);
        const double ab = s.alpha_bar(19);
        for (std::size_t i = 0; i < z.data.size(); ++i)
            CHECK(out.data[i] ==
                  Catch::Approx((z.data[i] - std::sqrt(1 - ab) * eps.data[i]) / std::sqrt(ab))
                      .margin(1e-12));
    }
}

TEST_CASE("ddim determinism is bitwise") {
    const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    const LatentFrames z = randn(3, 2, 4, 4, 6);
    const LatentFrames eps = randn(3, 2, 4, 4, 7);
    const LatentFrames a = ddim_step(z, eps, 500, 250, s);
    const LatentFrames b = ddim_step(z, eps, 500, 250, s);
    REQUIRE(a.data == b.data);

    GaussianRng r1(99), r2(99);
    const LatentFrames sa = ddim_step(z, eps, 500, 250, s, 0.7, &r1);
    const LatentFrames sb = ddim_step(z, eps, 500, 250, s, 0.7, &r2);
    REQUIRE(sa.data == sb.data);
}

TEST_CASE("ddpm step: posterior formula oracle, determinism, final step") {
    const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    const LatentFrames z = randn(1, 1, 1, 1, 8);
    const LatentFrames eps = randn(1, 1, 1, 1, 9);
    const int t_cur = 500, t_next = 480;

    GaussianRng r1(4242), r2(4242);
    const LatentFrames out = ddpm_step(z, eps, t_cur, t_next, s, r1);

    // Oracle: the mu-parameterized DDPM posterior evaluated independently.
    const double ab_c = s.alpha_bar(t_cur);
    const double ab_n = s.alpha_bar(t_next);
    const double a_eff = ab_c / ab_n;
    const double b_eff = 1.0 - a_eff;
    const double z0 = (z.data[0] - std::sqrt(1 - ab_c) * eps.data[0]) / std::sqrt(ab_c);
    const double mean = (std::sqrt(ab_n) * b_eff / (1 - ab_c)) * z0 +
                        (std::sqrt(a_eff) * (1 - ab_n) / (1 - ab_c)) * z.data[0];
    const double var = b_eff * (1 - ab_n) / (1 - ab_c);
    const double want = mean + std::sqrt(var) * r2.next();
    CHECK(out.data[0] == Catch::Approx(want).margin(1e-12));

    GaussianRng r3(4242);
    const LatentFrames again = ddpm_step(z, eps, t_cur, t_next, s, r3);
    REQUIRE(again.data == out.data);

    GaussianRng r4(1);
    const LatentFrames fin = ddpm_step(z, eps, 19, kFinalStep, s, r4);
    GaussianRng r5(2);
    const LatentFrames fin2 = ddpm_step(z, eps, 19, kFinalStep, s, r5);
    REQUIRE(fin.data == fin2.data);  // no noise at the final step
}

TEST_CASE("dpm-solver-2 is exact for noise predictions linear in log-SNR") {
    const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    const LatentFrames z = randn(1, 1, 1, 4, 10);
    const double c0[4] = {0.3, -1.2, 0.05, 2.0};
    const double c1[4] = {-0.7, 0.4, 1.3, -0.2};

    const EpsFn eps_fn = [&](const LatentFrames& zz, int t) {
        LatentFrames e = zz;
        const double lam = s.log_snr(t);
        for (int i = 0; i < 4; ++i) e.data[i] = c0[i] + c1[i] * lam;
        return e;
    };

    const int t_cur = 999, t_next = 499;
    const LatentFrames got = dpm_solver2_step(z, eps_fn, t_cur, t_next, s);

    // Analytic solution of the probability-flow ODE for eps(lambda) linear:
    // z_t = (a_t/a_s) z_s - a_t * int_{ls}^{lt} e^{-l} eps(l) dl.
    const double ls = s.log_snr(t_cur), lt = s.log_snr(t_next);
    const double a_s = std::sqrt(s.alpha_bar(t_cur)), a_t = std::sqrt(s.alpha_bar(t_next));
    for (int i = 0; i < 4; ++i) {
        const double integral = c0[i] * (std::exp(-ls) - std::exp(-lt)) +
                                c1[i] * (std::exp(-ls) * (ls + 1) - std::exp(-lt) * (lt + 1));
        const double want = (a_t / a_s) * z.data[i] - a_t * integral;
        CHECK(got.data[i] == Catch::Approx(want).margin(1e-9));
    }
}

TEST_CASE("dpm-solver-2 without correction equals ddim") {
    const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    const LatentFrames z = randn(2, 2, 2, 2, 11);
    const LatentFrames eps = randn(2, 2, 2, 2, 12);
    const EpsFn eps_fn = [&](const LatentFrames&, int) { return eps; };

    const LatentFrames first = dpm_solver2_step(z, eps_fn, 800, 400, s, /*use_correction=*/false);
    const LatentFrames ref = ddim_step(z, eps, 800, 400, s);
    for (std::size_t i = 0; i < z.data.size(); ++i)
        CHECK(first.data[i] == Catch::Approx(ref.data[i]).margin(1e-10));
}

TEST_CASE("dpm-solver-2 at 50 steps tracks a 500-step first-order reference") {
    const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    const std::vector<double> mean{0.8, -0.4}, var{0.25, 0.25};
    const EpsFn eps_fn = [&](const LatentFrames& zz, int t) {
        LatentFrames e = zz;
        e.data = exact_eps_gaussian(zz.data, t, mean, var, s);
        return e;
    };
    const LatentFrames z0 = randn(1, 2, 1, 1, 13);

    SamplerOptions dpm{SamplerKind::DpmSolver2, 50, 0.0};
    const LatentFrames fast =
        run_sampler(z0, eps_fn, make_timestep_plan(s, 50), s, dpm, 0);

    SamplerOptions ddim{SamplerKind::Ddim, 500, 0.0};
    const LatentFrames fine =
        run_sampler(z0, eps_fn, make_timestep_plan(s, 500), s, ddim, 0);

    double rms = 0.0;
    for (std::size_t i = 0; i < fast.data.size(); ++i) {
        const double d = fast.data[i] - fine.data[i];
        rms += d * d;
    }
    rms = std::sqrt(rms / static_cast<double>(fast.data.size()));
    CHECK(rms < 1e-2);
}

TEST_CASE("init_latents: determinism and moments") {
    const LatentFrames a = init_latents(24, 4, 32, 32, 1234);
    const LatentFrames b = init_latents(24, 4, 32, 32, 1234);
    REQUIRE(a.data == b.data);
    const LatentFrames c = init_latents(24, 4, 32, 32, 1235);
    REQUIRE(a.data != c.data);

    double mean = 0.0;
    for (double v : a.data) mean += v;
    mean /= static_cast<double>(a.data.size());
    CHECK(std::fabs(mean) < 0.02);

    double var = 0.0;
    for (double v : a.data) var += (v - mean) * (v - mean);
    var /= static_cast<double>(a.data.size() - 1);
    CHECK(var > 0.95);
    CHECK(var < 1.05);

    CHECK_THROWS_AS(init_latents(0, 4, 32, 32, 1), std::invalid_argument);
    CHECK_THROWS_AS(init_latents(24, -1, 32, 32, 1), std::invalid_argument);
}

TEST_CASE("identity codec") {
    const Codec codec;
    const LatentFrames x = randn(2, 3, 4, 4, 14);
    const LatentFrames round = codec.decode(codec.encode(x));
    REQUIRE(round.data == x.data);
}
