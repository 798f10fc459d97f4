#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "vivid/priors.hpp"
#include "vivid/schedule.hpp"

using namespace vivid;

namespace {

const NoiseSchedule& sched() {
    static const NoiseSchedule s = linear_beta_schedule(1000, 1e-4, 2e-2);
    return s;
}

double log_pdf_gaussian_diffused(const std::vector<double>& z, double ab,
                                 const std::vector<double>& mean,
                                 const std::vector<double>& var) {
    double lp = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double c = ab * var[i] + (1.0 - ab);
        const double d = z[i] - std::sqrt(ab) * mean[i];
        lp += -0.5 * (std::log(2.0 * kPi * c) + d * d / c);
    }
    return lp;
}

double log_pdf_gmm_diffused(const std::vector<double>& z, double ab, const GmmPrior& prior) {
    std::vector<double> lps;
    for (int k = 0; k < prior.components(); ++k)
        lps.push_back(std::log(prior.weights[k]) +
                      log_pdf_gaussian_diffused(z, ab, prior.means[k], prior.vars[k]));
    const double m = *std::max_element(lps.begin(), lps.end());
    double acc = 0.0;
    for (double lp : lps) acc += std::exp(lp - m);
    return m + std::log(acc);
}

/// Dense diffused log-density of the smooth video prior via Eigen, fully
/// independent of the spectral implementation.
struct DenseVideoOracle {
    Eigen::MatrixXd cov;    // diffused covariance
    Eigen::MatrixXd inv;
    double logdet;
    int n;

    DenseVideoOracle(const SmoothVideoPrior& prior, double ab) {
        const int F = prior.frame_count, d = prior.frame_dim;
        n = F * d;
        Eigen::MatrixXd L = Eigen::MatrixXd::Zero(F, F);
        for (int f = 0; f < F; ++f) {
            if (f > 0) {
                L(f, f) += 1.0;
                L(f, f - 1) -= 1.0;
            }
            if (f < F - 1) {
                L(f, f) += 1.0;
                L(f, f + 1) -= 1.0;
            }
        }
        Eigen::MatrixXd P = Eigen::MatrixXd::Zero(n, n);
        for (int f = 0; f < F; ++f)
            for (int g = 0; g < F; ++g)
                for (int j = 0; j < d; ++j)
                    P(f * d + j, g * d + j) = prior.coupling_strength * L(f, g) +
                                              (f == g ? prior.anchor_strength : 0.0);
        cov = ab * P.inverse() + (1.0 - ab) * Eigen::MatrixXd::Identity(n, n);
        inv = cov.inverse();
        logdet = std::log(cov.determinant());
    }

    double log_pdf(const std::vector<double>& z) const {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = z[static_cast<std::size_t>(i)];
        return -0.5 * (v.dot(inv * v) + logdet + n * std::log(2.0 * kPi));
    }

    std::vector<double> exact_eps(const std::vector<double>& z, double ab) const {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v(i) = z[static_cast<std::size_t>(i)];
        const Eigen::VectorXd e = std::sqrt(1.0 - ab) * (inv * v);
        std::vector<double> out(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = e(i);
        return out;
    }
};

/// Central-difference check of eps == -sqrt(1-abar) * grad log p_t.
template <typename LogPdf>
double fd_relative_error(const std::vector<double>& eps, std::vector<double> z, double ab,
                         LogPdf&& log_pdf, double step = 1e-4) {
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double orig = z[i];
        z[i] = orig + step;
        const double hi = log_pdf(z);
        z[i] = orig - step;
        const double lo = log_pdf(z);
        z[i] = orig;
        const double fd = -std::sqrt(1.0 - ab) * (hi - lo) / (2.0 * step);
        num += (eps[i] - fd) * (eps[i] - fd);
        den += fd * fd;
    }
    return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("exact gaussian eps: standard normal and scaled-mean identities") {
    const int t = 400;
    const double ab = sched().alpha_bar(t);
    const std::vector<double> z{0.7, -1.3, 0.2};

    const std::vector<double> eps_std =
        exact_eps_gaussian(z, t, {0, 0, 0}, {1, 1, 1}, sched());
    for (std::size_t i = 0; i < z.size(); ++i)
        CHECK(eps_std[i] == Catch::Approx(std::sqrt(1 - ab) * z[i]).margin(1e-12));

    const std::vector<double> mean{0.5, 2.0, -1.0};
    std::vector<double> at_mean(3);
    for (int i = 0; i < 3; ++i) at_mean[static_cast<std::size_t>(i)] = std::sqrt(ab) * mean[static_cast<std::size_t>(i)];
    const std::vector<double> eps0 =
        exact_eps_gaussian(at_mean, t, mean, {0.3, 0.3, 0.3}, sched());
    for (double e : eps0) CHECK(std::fabs(e) < 1e-12);

    CHECK_THROWS_AS(exact_eps_gaussian(z, t, mean, {0.3, -0.1, 0.3}, sched()),
                    std::invalid_argument);
}

TEST_CASE("exact gaussian eps matches the finite-difference score oracle") {
    std::mt19937_64 rng(101);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> ts(5, 995);
    const std::vector<double> mean{0.4, -0.8, 1.2, 0.0};
    const std::vector<double> var{0.09, 0.5, 1.5, 0.01};

    for (int trial = 0; trial < 40; ++trial) {
        const int t = ts(rng);
        const double ab = sched().alpha_bar(t);
        std::vector<double> z(4);
        for (double& v : z) v = 1.5 * n(rng);
        const std::vector<double> eps = exact_eps_gaussian(z, t, mean, var, sched());
        const double rel = fd_relative_error(
            eps, z, ab, [&](const std::vector<double>& q) {
                return log_pdf_gaussian_diffused(q, ab, mean, var);
            });
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("gmm eps: degenerate single component equals the gaussian") {
    GmmPrior prior;
    prior.weights = {1.0};
    prior.means = {{0.4, -0.6}};
    prior.vars = {{0.2, 0.7}};
    const std::vector<double> z{1.1, 0.3};
    const int t = 300;
    const std::vector<double> a = exact_eps_gmm(z, t, prior, sched());
    const std::vector<double> b =
        exact_eps_gaussian(z, t, prior.means[0], prior.vars[0], sched());
    for (std::size_t i = 0; i < z.size(); ++i) CHECK(a[i] == Catch::Approx(b[i]).margin(1e-12));
}

TEST_CASE("gmm eps: far-separated components give responsibility 1") {
    GmmPrior prior;
    prior.weights = {0.5, 0.5};
    prior.means = {{-30.0}, {30.0}};
    prior.vars = {{0.05}, {0.05}};
    const int t = 30;  // low noise so the diffused components stay separated
    const double ab = sched().alpha_bar(t);
    const std::vector<double> z{std::sqrt(ab) * 30.0};
    const std::vector<double> mixture = exact_eps_gmm(z, t, prior, sched());
    const std::vector<double> single =
        exact_eps_gaussian(z, ab, prior.means[1], prior.vars[1]);
    CHECK(std::fabs(mixture[0] - single[0]) < 1e-8);
}

TEST_CASE("gmm eps matches the finite-difference score oracle in d=2") {
    GmmPrior prior;
    prior.weights = {0.3, 0.7};
    prior.means = {{-1.0, 0.5}, {1.5, -0.5}};
    prior.vars = {{0.3, 0.6}, {0.2, 0.4}};
    prior.validate();

    std::mt19937_64 rng(202);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> ts(5, 995);
    for (int trial = 0; trial < 40; ++trial) {
        const int t = ts(rng);
        const double ab = sched().alpha_bar(t);
        std::vector<double> z{1.2 * n(rng), 1.2 * n(rng)};
        const std::vector<double> eps = exact_eps_gmm(z, t, prior, sched());
        const double rel = fd_relative_error(
            eps, z, ab,
            [&](const std::vector<double>& q) { return log_pdf_gmm_diffused(q, ab, prior); });
        CHECK(rel < 1e-5);
    }
}

TEST_CASE("gmm validation rejects bad priors") {
    GmmPrior bad;
    bad.weights = {0.4, 0.4};
    bad.means = {{0.0}, {1.0}};
    bad.vars = {{0.1}, {0.1}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    bad.weights = {0.5, 0.5};
    bad.vars = {{0.1}, {0.0}};
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("video prior eps: decoupled and constant-frame identities") {
    SmoothVideoPrior prior;
    prior.frame_count = 5;
    prior.frame_dim = 2;
    const int t = 450;
    const double ab = sched().alpha_bar(t);

    SECTION("coupling 0 reduces to per-coordinate gaussian with variance 1/gamma") {
        prior.coupling_strength = 0.0;
        prior.anchor_strength = 0.5;
        std::vector<double> z(10);
        std::mt19937_64 rng(5);
        std::normal_distribution<double> n(0.0, 1.0);
        for (double& v : z) v = n(rng);
        const std::vector<double> eps = exact_eps_video(z, t, prior, sched());
        const std::vector<double> mean(10, 0.0), var(10, 1.0 / prior.anchor_strength);
        const std::vector<double> want = exact_eps_gaussian(z, ab, mean, var);
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(eps[i] == Catch::Approx(want[i]).margin(1e-10));
    }

    SECTION("constant-across-frames input sees only the anchor") {
        prior.coupling_strength = 10.0;
        prior.anchor_strength = 0.3;
        std::vector<double> z;
        for (int f = 0; f < 5; ++f) {
            z.push_back(0.8);
            z.push_back(-0.4);
        }
        const std::vector<double> eps = exact_eps_video(z, t, prior, sched());
        const std::vector<double> mean(10, 0.0), var(10, 1.0 / prior.anchor_strength);
        const std::vector<double> want = exact_eps_gaussian(z, ab, mean, var);
        for (std::size_t i = 0; i < z.size(); ++i)
            CHECK(eps[i] == Catch::Approx(want[i]).margin(1e-10));
    }
}

TEST_CASE("video prior eps matches the dense linear-algebra oracle") {
    SmoothVideoPrior prior;
    prior.frame_count = 4;
    prior.frame_dim = 1;
    prior.coupling_strength = 10.0;
    prior.anchor_strength = 0.01;

    std::mt19937_64 rng(303);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_int_distribution<int> ts(5, 995);
    for (int trial = 0; trial < 20; ++trial) {
        const int t = ts(rng);
        const double ab = sched().alpha_bar(t);
        std::vector<double> z(4);
        for (double& v : z) v = 2.0 * n(rng);
        const std::vector<double> eps = exact_eps_video(z, t, prior, sched());
        const DenseVideoOracle oracle(prior, ab);
        const std::vector<double> want = oracle.exact_eps(z, ab);
        double num = 0.0, den = 0.0;
        for (std::size_t i = 0; i < z.size(); ++i) {
            num += (eps[i] - want[i]) * (eps[i] - want[i]);
            den += want[i] * want[i];
        }
        CHECK(std::sqrt(num / den) < 1e-10);
    }
}

TEST_CASE("video prior eps is equivariant to frame reversal") {
    SmoothVideoPrior prior;
    prior.frame_count = 6;
    prior.frame_dim = 2;
    std::mt19937_64 rng(404);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<double> z(12);
    for (double& v : z) v = n(rng);

    std::vector<double> rev(12);
    for (int f = 0; f < 6; ++f)
        for (int j = 0; j < 2; ++j) rev[static_cast<std::size_t>(f) * 2 + j] = z[static_cast<std::size_t>(5 - f) * 2 + j];

    const std::vector<double> eps = exact_eps_video(z, 321, prior, sched());
    const std::vector<double> eps_rev = exact_eps_video(rev, 321, prior, sched());
    for (int f = 0; f < 6; ++f)
        for (int j = 0; j < 2; ++j)
            CHECK(eps_rev[static_cast<std::size_t>(f) * 2 + j] ==
                  Catch::Approx(eps[static_cast<std::size_t>(5 - f) * 2 + j]).margin(1e-10));
}

TEST_CASE("video prior validation") {
    SmoothVideoPrior bad;
    bad.anchor_strength = 0.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    SmoothVideoPrior wrong_dim;
    CHECK_THROWS_AS(exact_eps_video({1.0, 2.0}, 100, wrong_dim, sched()),
                    std::invalid_argument);
}

TEST_CASE("pose target map traces a circle in azimuth") {
    const PoseTargetMap map{2, 1.5};
    const std::vector<double> a = map({0.0, 0.3, 2.0});
    CHECK(a[0] == Catch::Approx(1.5).margin(1e-12));
    CHECK(a[1] == Catch::Approx(0.0).margin(1e-12));
    const std::vector<double> b = map({kPi / 2, 0.0, 2.0});
    CHECK(b[0] == Catch::Approx(0.0).margin(1e-12));
    CHECK(b[1] == Catch::Approx(1.5).margin(1e-12));
}

TEST_CASE("denoiser adapters evaluate the analytic predictions") {
    const CameraPose ref{0.0, deg2rad(15.0), 3.2};
    const PoseTargetMap target{2, 1.0};
    const GaussianViewDenoiser view(ref, target, 0.1, sched());

    ViewConditioning cond;
    cond.input_image = LatentFrames(1, 2, 1, 1);
    cond.relative_poses = {relative_pose(ref, {kPi / 3, deg2rad(15.0), 3.2})};

    LatentFrames z(1, 2, 1, 1);
    z.data = {0.9, 0.1};
    const LatentFrames eps = view.evaluate(z, 250, cond, 0);
    const std::vector<double> mu = target({kPi / 3, deg2rad(15.0), 3.2});
    const std::vector<double> want =
        exact_eps_gaussian(z.data, 250, mu, {0.01, 0.01}, sched());
    CHECK(eps.data[0] == Catch::Approx(want[0]).margin(1e-12));
    CHECK(eps.data[1] == Catch::Approx(want[1]).margin(1e-12));
    CHECK_FALSE(view.has_unconditional());

    SmoothVideoPrior prior;
    prior.frame_count = 3;
    prior.frame_dim = 2;
    const SmoothVideoDenoiser video(prior, sched());
    LatentFrames zz(3, 2, 1, 1);
    for (std::size_t i = 0; i < zz.data.size(); ++i) zz.data[i] = 0.1 * static_cast<double>(i);
    const LatentFrames ev = video.evaluate(zz, 250, Prompt::null());
    const std::vector<double> vw = exact_eps_video(zz.data, 250, prior, sched());
    for (std::size_t i = 0; i < zz.data.size(); ++i)
        CHECK(ev.data[i] == Catch::Approx(vw[i]).margin(1e-12));

    const SmoothVideoDenoiser inert(prior, sched(), 1);
    const LatentFrames zero = inert.evaluate(zz, 250, Prompt::null());
    for (double v : zero.data) CHECK(v == 0.0);
}
