#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "vivid/denoisers.hpp"
#include "vivid/geometry.hpp"
#include "vivid/schedule.hpp"
#include "vivid/tensor.hpp"

namespace vivid {

// ---------------------------------------------------------------------------
// Exact noise predictions for Gaussian-family data distributions. For data
// x ~ N(mu, Sigma) the forward marginal at timestep t is
// N(sqrt(abar) mu, abar Sigma + (1-abar) I), and the exact prediction is
//   eps*(z,t) = sqrt(1-abar) (abar Sigma + (1-abar) I)^{-1} (z - sqrt(abar) mu),
// equal to -sqrt(1-abar) times the score of the diffused marginal.
// ---------------------------------------------------------------------------

inline std::vector<double> exact_eps_gaussian(const std::vector<double>& z, double alpha_bar,
                                              const std::vector<double>& mean,
                                              const std::vector<double>& var) {
    if (z.size() != mean.size() || z.size() != var.size())
        throw std::invalid_argument("exact_eps_gaussian: dimension mismatch");
    const double sa = std::sqrt(alpha_bar);
    const double sb = std::sqrt(1.0 - alpha_bar);
    std::vector<double> eps(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!(var[i] > 0.0))
            throw std::invalid_argument("exact_eps_gaussian: variance must be positive");
        eps[i] = sb * (z[i] - sa * mean[i]) / (alpha_bar * var[i] + (1.0 - alpha_bar));
    }
    return eps;
}

inline std::vector<double> exact_eps_gaussian(const std::vector<double>& z, int timestep,
                                              const std::vector<double>& mean,
                                              const std::vector<double>& var,
                                              const NoiseSchedule& schedule) {
    return exact_eps_gaussian(z, schedule.alpha_bar(timestep), mean, var);
}

/// Diagonal-covariance Gaussian mixture over R^d.
struct GmmPrior {
    std::vector<double> weights;             // K, nonnegative, sums to 1
    std::vector<std::vector<double>> means;  // K x d
    std::vector<std::vector<double>> vars;   // K x d, positive

    int components() const { return static_cast<int>(weights.size()); }
    int dim() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }

    void validate() const {
        if (weights.empty() || means.size() != weights.size() || vars.size() != weights.size())
            throw std::invalid_argument("GmmPrior: inconsistent component counts");
        double sum = 0.0;
        for (double w : weights) {
            if (w < 0.0) throw std::invalid_argument("GmmPrior: negative weight");
            sum += w;
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            throw std::invalid_argument("GmmPrior: weights must sum to 1");
        for (const auto& v : vars) {
            if (v.size() != means.front().size() || v.size() != static_cast<std::size_t>(dim()))
                throw std::invalid_argument("GmmPrior: dimension mismatch");
            for (double x : v)
                if (!(x > 0.0)) throw std::invalid_argument("GmmPrior: variance must be positive");
        }
    }
};

/// Responsibility-weighted combination of the per-component exact eps under
/// the diffused mixture, stabilized with log-sum-exp.
inline std::vector<double> exact_eps_gmm(const std::vector<double>& z, int timestep,
                                         const GmmPrior& prior, const NoiseSchedule& schedule) {
    prior.validate();
    if (z.size() != static_cast<std::size_t>(prior.dim()))
        throw std::invalid_argument("exact_eps_gmm: dimension mismatch");
    const double ab = schedule.alpha_bar(timestep);
    const double sa = std::sqrt(ab);
    const int K = prior.components();

    std::vector<double> log_post(K);
    for (int k = 0; k < K; ++k) {
        double lp = prior.weights[k] > 0.0 ? std::log(prior.weights[k])
                                           : -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < z.size(); ++i) {
            const double c = ab * prior.vars[k][i] + (1.0 - ab);
            const double d = z[i] - sa * prior.means[k][i];
            lp += -0.5 * (std::log(2.0 * kPi * c) + d * d / c);
        }
        log_post[k] = lp;
    }
    const double m = *std::max_element(log_post.begin(), log_post.end());
    double norm = 0.0;
    for (double& lp : log_post) {
        lp = std::exp(lp - m);
        norm += lp;
    }

    std::vector<double> eps(z.size(), 0.0);
    for (int k = 0; k < K; ++k) {
        const double r = log_post[k] / norm;
        if (r == 0.0) continue;
        const std::vector<double> ek = exact_eps_gaussian(z, ab, prior.means[k], prior.vars[k]);
        for (std::size_t i = 0; i < z.size(); ++i) eps[i] += r * ek[i];
    }
    return eps;
}

/// Zero-mean joint Gaussian over F frames of dimension d with precision
/// P = beta_s * L + gamma * I per coordinate, L the path-graph Laplacian.
struct SmoothVideoPrior {
    double coupling_strength = 10.0;  // beta_s
    double anchor_strength = 0.01;    // gamma
    int frame_dim = 2;
    int frame_count = 24;

    void validate() const {
        if (!(coupling_strength >= 0.0) || !(anchor_strength > 0.0))
            throw std::invalid_argument(
                "SmoothVideoPrior: need coupling >= 0 and anchor > 0 for a PD precision");
        if (frame_dim < 1 || frame_count < 1)
            throw std::invalid_argument("SmoothVideoPrior: positive dimensions required");
    }

    /// Path-graph Laplacian eigenvalues 2 - 2 cos(pi k / F).
    double laplacian_eigenvalue(int k) const {
        return 2.0 - 2.0 * std::cos(kPi * k / frame_count);
    }
};

namespace detail {

/// Orthonormal DCT-II eigenbasis of the path-graph Laplacian:
/// v_k(f) = n_k cos(pi k (2f+1) / (2F)).
inline double path_eigvec(int F, int k, int f) {
    const double nk = (k == 0) ? std::sqrt(1.0 / F) : std::sqrt(2.0 / F);
    return nk * std::cos(kPi * k * (2.0 * f + 1.0) / (2.0 * F));
}

}  // namespace detail

/// Exact eps for the smooth video prior; z is the F*d flattening of the
/// frames (frame-major). Diagonalizes in the Laplacian eigenbasis, applied
/// independently per coordinate.
inline std::vector<double> exact_eps_video(const std::vector<double>& z, int timestep,
                                           const SmoothVideoPrior& prior,
                                           const NoiseSchedule& schedule) {
    prior.validate();
    const int F = prior.frame_count;
    const int d = prior.frame_dim;
    if (z.size() != static_cast<std::size_t>(F) * d)
        throw std::invalid_argument("exact_eps_video: expected F*d values");
    const double ab = schedule.alpha_bar(timestep);
    const double sb = std::sqrt(1.0 - ab);

    // Spectral transform per coordinate: coef[k][j] = sum_f v_k(f) z[f*d + j].
    std::vector<double> coef(static_cast<std::size_t>(F) * d, 0.0);
    for (int k = 0; k < F; ++k)
        for (int f = 0; f < F; ++f) {
            const double v = detail::path_eigvec(F, k, f);
            for (int j = 0; j < d; ++j)
                coef[static_cast<std::size_t>(k) * d + j] += v * z[static_cast<std::size_t>(f) * d + j];
        }
    // Diffused covariance eigenvalue per mode: abar / p_k + (1 - abar).
    for (int k = 0; k < F; ++k) {
        const double p_k = prior.coupling_strength * prior.laplacian_eigenvalue(k) +
                           prior.anchor_strength;
        const double c_k = ab / p_k + (1.0 - ab);
        for (int j = 0; j < d; ++j) coef[static_cast<std::size_t>(k) * d + j] *= sb / c_k;
    }
    std::vector<double> eps(z.size(), 0.0);
    for (int f = 0; f < F; ++f)
        for (int k = 0; k < F; ++k) {
            const double v = detail::path_eigvec(F, k, f);
            for (int j = 0; j < d; ++j)
                eps[static_cast<std::size_t>(f) * d + j] += v * coef[static_cast<std::size_t>(k) * d + j];
        }
    return eps;
}

/// Pose-dependent target mean: a circle of the given radius traced by the
/// azimuth, embedded in the first two coordinates of R^d.
struct PoseTargetMap {
    int dim = 2;
    double radius = 1.0;

    std::vector<double> operator()(const CameraPose& pose) const {
        std::vector<double> mu(static_cast<std::size_t>(dim), 0.0);
        mu[0] = radius * std::cos(pose.azimuth);
        if (dim >= 2) mu[1] = radius * std::sin(pose.azimuth);
        return mu;
    }
};

// ---------------------------------------------------------------------------
// Denoiser adapters wrapping the analytic predictions.
// ---------------------------------------------------------------------------

/// Per-frame view prior N(mu(v^f), sigma^2 I). The absolute pose v^f is
/// reconstructed from the stored reference view and the frame's relative
/// pose, mirroring how the conditioning is wired in the real pipeline.
class GaussianViewDenoiser final : public ViewDenoiser {
public:
    GaussianViewDenoiser(CameraPose reference, PoseTargetMap target_map, double sigma,
                         const NoiseSchedule& schedule)
        : reference_(reference), target_map_(target_map), sigma_(sigma), schedule_(&schedule) {
        if (!(sigma > 0.0)) throw std::invalid_argument("GaussianViewDenoiser: sigma must be > 0");
    }

    LatentFrames evaluate(const LatentFrames& z, int timestep, const ViewConditioning& cond,
                          int frame_index) const override {
        const CameraPose v = apply_relative(reference_, cond.relative_poses.at(frame_index));
        const std::vector<double> mean = target_map_(v);
        if (z.size() != mean.size())
            throw ShapeError("GaussianViewDenoiser: latent dim does not match target map");
        const std::vector<double> var(mean.size(), sigma_ * sigma_);
        LatentFrames out = z;
        out.data = exact_eps_gaussian(z.data, timestep, mean, var, *schedule_);
        return out;
    }

    std::string identifier() const override { return "priors.gaussian_view"; }

private:
    CameraPose reference_;
    PoseTargetMap target_map_;
    double sigma_;
    const NoiseSchedule* schedule_;
};

/// Pose-conditioned mixture view prior: the configured components ride on
/// top of mu(v^f).
class GmmViewDenoiser final : public ViewDenoiser {
public:
    GmmViewDenoiser(CameraPose reference, PoseTargetMap target_map, GmmPrior base,
                    const NoiseSchedule& schedule)
        : reference_(reference), target_map_(target_map), base_(std::move(base)),
          schedule_(&schedule) {
        base_.validate();
    }

    LatentFrames evaluate(const LatentFrames& z, int timestep, const ViewConditioning& cond,
                          int frame_index) const override {
        const CameraPose v = apply_relative(reference_, cond.relative_poses.at(frame_index));
        const std::vector<double> mu = target_map_(v);
        GmmPrior shifted = base_;
        for (auto& m : shifted.means) {
            if (m.size() != mu.size())
                throw ShapeError("GmmViewDenoiser: component dim does not match target map");
            for (std::size_t i = 0; i < m.size(); ++i) m[i] += mu[i];
        }
        LatentFrames out = z;
        out.data = exact_eps_gmm(z.data, timestep, shifted, *schedule_);
        return out;
    }

    std::string identifier() const override { return "priors.gmm_view"; }

private:
    CameraPose reference_;
    PoseTargetMap target_map_;
    GmmPrior base_;
    const NoiseSchedule* schedule_;
};

/// Joint smoothness prior over the trajectory frames. `window` groups the
/// frames into contiguous blocks denoised jointly; window <= 1 leaves the
/// video branch inert (frames treated as independent).
class SmoothVideoDenoiser final : public VideoDenoiser {
public:
    SmoothVideoDenoiser(SmoothVideoPrior prior, const NoiseSchedule& schedule, int window = 0)
        : prior_(prior), schedule_(&schedule), window_(window) {
        prior_.validate();
    }

    LatentFrames evaluate(const LatentFrames& z, int timestep,
                          const Prompt& prompt) const override {
        (void)prompt;  // null prompting: content guidance comes from the view branch
        const int d = static_cast<int>(z.frame_size());
        LatentFrames eps = z;
        std::fill(eps.data.begin(), eps.data.end(), 0.0);
        const int window = (window_ <= 0) ? z.frames : window_;
        if (window <= 1) return eps;
        for (int f0 = 0; f0 < z.frames; f0 += window) {
            const int block = std::min(window, z.frames - f0);
            if (block <= 1) continue;
            SmoothVideoPrior block_prior = prior_;
            block_prior.frame_count = block;
            block_prior.frame_dim = d;
            std::vector<double> zb(z.data.begin() + static_cast<std::ptrdiff_t>(f0) * d,
                                   z.data.begin() + static_cast<std::ptrdiff_t>(f0 + block) * d);
            const std::vector<double> eb = exact_eps_video(zb, timestep, block_prior, *schedule_);
            std::copy(eb.begin(), eb.end(), eps.data.begin() + static_cast<std::ptrdiff_t>(f0) * d);
        }
        return eps;
    }

    std::string identifier() const override {
        return "priors.smooth_video/w" + std::to_string(window_);
    }

private:
    SmoothVideoPrior prior_;
    const NoiseSchedule* schedule_;
    int window_;
};

}  // namespace vivid
