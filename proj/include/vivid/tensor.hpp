#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "vivid/errors.hpp"
#include "vivid/rng.hpp"

namespace vivid {

/// F x C x H x W tensor of doubles, frame-major. Shape is fixed at
/// construction and immutable across a sampling run.
struct LatentFrames {
    int frames = 0;
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    LatentFrames() = default;
    LatentFrames(int f, int c, int h, int w)
        : frames(f), channels(c), height(h), width(w) {
        if (f <= 0 || c <= 0 || h <= 0 || w <= 0)
            throw std::invalid_argument("LatentFrames: dimensions must be positive");
        data.assign(static_cast<std::size_t>(f) * c * h * w, 0.0);
    }

    std::size_t frame_size() const { return static_cast<std::size_t>(channels) * height * width; }
    std::size_t size() const { return data.size(); }

    double* frame_ptr(int f) { return data.data() + static_cast<std::size_t>(f) * frame_size(); }
    const double* frame_ptr(int f) const {
        return data.data() + static_cast<std::size_t>(f) * frame_size();
    }

    bool same_shape(const LatentFrames& o) const {
        return frames == o.frames && channels == o.channels && height == o.height &&
               width == o.width;
    }

    std::string shape_str() const {
        return "[" + std::to_string(frames) + "," + std::to_string(channels) + "," +
               std::to_string(height) + "," + std::to_string(width) + "]";
    }

    bool all_finite() const {
        for (double v : data)
            if (!std::isfinite(v)) return false;
        return true;
    }

    /// One frame copied out as an F=1 tensor.
    LatentFrames frame(int f) const {
        LatentFrames out(1, channels, height, width);
        const double* src = frame_ptr(f);
        std::copy(src, src + frame_size(), out.data.begin());
        return out;
    }

    void set_frame(int f, const LatentFrames& single) {
        std::copy(single.data.begin(), single.data.end(), frame_ptr(f));
    }
};

inline void require_same_shape(const LatentFrames& a, const LatentFrames& b, const char* where) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(where) + ": shape mismatch " + a.shape_str() + " vs " +
                         b.shape_str());
}

inline void require_finite(const LatentFrames& t, const char* where) {
    if (!t.all_finite()) throw NumericError(std::string(where) + ": non-finite values");
}

/// z_T^{1:F} ~ N(0, I), deterministic given the seed.
inline LatentFrames init_latents(int frames, int channels, int height, int width,
                                 std::uint64_t seed) {
    LatentFrames z(frames, channels, height, width);
    GaussianRng rng(derive_seed(seed, SeedStream::LatentInit));
    for (double& v : z.data) v = rng.next();
    return z;
}

/// Sum_f ||z^{f+1} - z^f||^2 over the whole frame payload.
inline double roughness(const LatentFrames& z) {
    double acc = 0.0;
    const std::size_t n = z.frame_size();
    for (int f = 0; f + 1 < z.frames; ++f) {
        const double* a = z.frame_ptr(f);
        const double* b = z.frame_ptr(f + 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double d = b[i] - a[i];
            acc += d * d;
        }
    }
    return acc;
}

/// Identity encoder/decoder pair. The latent autoencoder of LDMs is out of
/// scope at desk scale; the sampling math is codec-agnostic.
struct Codec {
    LatentFrames encode(const LatentFrames& image) const { return image; }
    LatentFrames decode(const LatentFrames& latent) const { return latent; }
};

}  // namespace vivid
