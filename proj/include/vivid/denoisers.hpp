#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vivid/geometry.hpp"
#include "vivid/tensor.hpp"

namespace vivid {

/// Conditioning payload of the view branch: the input image x^0 plus one
/// relative pose per trajectory frame.
struct ViewConditioning {
    LatentFrames input_image;  // 1 x C x H x W, values in [0,1]
    std::vector<RelativePose> relative_poses;
};

/// Text conditioning for the video branch; disengaged (null) by default.
struct Prompt {
    std::optional<std::string> text;

    bool is_null() const { return !text.has_value(); }
    static Prompt null() { return {}; }
};

/// Per-frame noise estimator conditioned on the input image and a relative
/// camera pose. `z` is a single-frame latent (frames == 1).
class ViewDenoiser {
public:
    virtual ~ViewDenoiser() = default;

    virtual LatentFrames evaluate(const LatentFrames& z, int timestep,
                                  const ViewConditioning& cond, int frame_index) const = 0;

    /// Unconditional estimate for classifier-free guidance. Backends without
    /// one (analytic oracles, remotes that fuse guidance server-side) leave
    /// has_unconditional() false and the guidance loop uses the conditional
    /// estimate as-is.
    virtual LatentFrames evaluate_unconditional(const LatentFrames& z, int timestep) const {
        (void)z;
        (void)timestep;
        throw std::logic_error("ViewDenoiser: no unconditional branch");
    }
    virtual bool has_unconditional() const { return false; }

    /// Whether concurrent read-only evaluation is allowed.
    virtual bool concurrent_safe() const { return true; }

    virtual std::string identifier() const = 0;
};

/// Joint noise estimator over all frames of the trajectory.
class VideoDenoiser {
public:
    virtual ~VideoDenoiser() = default;

    virtual LatentFrames evaluate(const LatentFrames& z, int timestep,
                                  const Prompt& prompt) const = 0;

    virtual std::string identifier() const = 0;
};

}  // namespace vivid
