#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "vivid/flow.hpp"
#include "vivid/geometry.hpp"
#include "vivid/image.hpp"
#include "vivid/json.hpp"

namespace vivid {

/// Analytic test object: checker-textured sphere (radius = size) or cube
/// (half-extent = size) centered at the origin.
struct SceneObject {
    enum class Kind { Sphere, Cuboid };

    Kind kind = Kind::Sphere;
    double size = 1.0;
    int checker_cells = 8;
    double color_a[3] = {0.85, 0.55, 0.20};
    double color_b[3] = {0.15, 0.30, 0.55};

    void validate() const {
        if (!(size > 0.0)) throw std::invalid_argument("SceneObject: size must be positive");
        if (checker_cells < 2)
            throw std::invalid_argument("SceneObject: checker cells must be >= 2");
    }

    /// Azimuth period of the sphere texture (two cells per checker period).
    double symmetry_angle() const { return 4.0 * kPi / checker_cells; }

    /// Radius of the bounding sphere.
    double bounding_radius() const {
        return kind == Kind::Sphere ? size : size * std::sqrt(3.0);
    }
};

struct RenderConfig {
    int width = 256;
    int height = 256;
    double fov = deg2rad(45.0);  // vertical
    double background[3] = {1.0, 1.0, 1.0};
    int supersample = 3;  // subpixel grid per axis; hit points stay on center rays

    void validate() const {
        if (width < 16 || height < 16)
            throw std::invalid_argument("RenderConfig: width and height must be >= 16");
        if (!(fov > 0.0) || fov >= kPi)
            throw std::invalid_argument("RenderConfig: fov must be in (0, pi)");
        if (supersample < 1) throw std::invalid_argument("RenderConfig: supersample must be >= 1");
    }
};

namespace detail {

struct CameraFrame {
    Vec3 origin;
    Vec3 right, up, forward;
    double tan_half_fov;
    double aspect;
};

inline CameraFrame camera_frame(const CameraPose& pose, const RenderConfig& cfg) {
    CameraFrame f;
    f.origin = pose.position();
    f.forward = (-f.origin).normalized();  // look at the origin
    const Vec3 world_up{0.0, 0.0, 1.0};
    Vec3 right = f.forward.cross(world_up);
    if (right.norm() < 1e-12) right = {0.0, 1.0, 0.0};  // straight up/down pose
    f.right = right.normalized();
    f.up = f.right.cross(f.forward);
    f.tan_half_fov = std::tan(cfg.fov / 2.0);
    f.aspect = static_cast<double>(cfg.width) / cfg.height;
    return f;
}

/// Direction through continuous pixel coordinates (x right, y down).
inline Vec3 pixel_ray(const CameraFrame& cam, double px, double py, int width, int height) {
    const double ndc_x = (2.0 * (px + 0.5) / width - 1.0) * cam.tan_half_fov * cam.aspect;
    const double ndc_y = (1.0 - 2.0 * (py + 0.5) / height) * cam.tan_half_fov;
    return (cam.forward + cam.right * ndc_x + cam.up * ndc_y).normalized();
}

/// Projects a world point to continuous pixel coordinates; false if behind
/// the camera.
inline bool project(const CameraFrame& cam, const Vec3& p, int width, int height, double& px,
                    double& py) {
    const Vec3 d = p - cam.origin;
    const double fz = d.dot(cam.forward);
    if (fz <= 1e-9) return false;
    const double nx = d.dot(cam.right) / fz / (cam.tan_half_fov * cam.aspect);
    const double ny = d.dot(cam.up) / fz / cam.tan_half_fov;
    px = (nx + 1.0) / 2.0 * width - 0.5;
    py = (1.0 - ny) / 2.0 * height - 0.5;
    return true;
}

struct Hit {
    double t = 0.0;
    Vec3 point;
};

inline bool intersect_sphere(const Vec3& o, const Vec3& dir, double radius, Hit& hit) {
    const double b = o.dot(dir);
    const double c = o.dot(o) - radius * radius;
    const double disc = b * b - c;
    if (disc < 0.0) return false;
    const double t = -b - std::sqrt(disc);
    if (t <= 1e-9) return false;
    hit.t = t;
    hit.point = o + dir * t;
    return true;
}

inline bool intersect_box(const Vec3& o, const Vec3& dir, double half, Hit& hit) {
    double tmin = -1e300, tmax = 1e300;
    const double ov[3] = {o.x, o.y, o.z};
    const double dv[3] = {dir.x, dir.y, dir.z};
    for (int a = 0; a < 3; ++a) {
        if (std::fabs(dv[a]) < 1e-15) {
            if (ov[a] < -half || ov[a] > half) return false;
            continue;
        }
        double t0 = (-half - ov[a]) / dv[a];
        double t1 = (half - ov[a]) / dv[a];
        if (t0 > t1) std::swap(t0, t1);
        tmin = std::max(tmin, t0);
        tmax = std::min(tmax, t1);
        if (tmin > tmax) return false;
    }
    if (tmin <= 1e-9) return false;
    hit.t = tmin;
    hit.point = o + dir * tmin;
    return true;
}

inline bool intersect(const SceneObject& obj, const Vec3& o, const Vec3& dir, Hit& hit) {
    return obj.kind == SceneObject::Kind::Sphere ? intersect_sphere(o, dir, obj.size, hit)
                                                 : intersect_box(o, dir, obj.size, hit);
}

inline void texture_color(const SceneObject& obj, const Vec3& p, double rgb[3]) {
    bool parity;
    if (obj.kind == SceneObject::Kind::Sphere) {
        const double theta = std::acos(std::clamp(p.z / obj.size, -1.0, 1.0));
        double phi = std::atan2(p.y, p.x);
        if (phi < 0.0) phi += 2.0 * kPi;
        const int ci = static_cast<int>(std::floor(phi / (2.0 * kPi) * obj.checker_cells));
        const int ri = static_cast<int>(std::floor(theta / kPi * obj.checker_cells));
        parity = ((ci + ri) & 1) != 0;
    } else {
        // Dominant axis picks the face; the two remaining coordinates index
        // the checker grid.
        const double av[3] = {std::fabs(p.x), std::fabs(p.y), std::fabs(p.z)};
        int face = 0;
        if (av[1] > av[0] && av[1] >= av[2]) face = 1;
        else if (av[2] > av[0] && av[2] > av[1]) face = 2;
        const double coords[3] = {p.x, p.y, p.z};
        double a = coords[(face + 1) % 3];
        double b = coords[(face + 2) % 3];
        const double cell = 2.0 * obj.size / obj.checker_cells;
        const int ca = static_cast<int>(std::floor((a + obj.size) / cell));
        const int cb = static_cast<int>(std::floor((b + obj.size) / cell));
        const bool neg = coords[face] < 0.0;
        parity = ((ca + cb + face + (neg ? 1 : 0)) & 1) != 0;
    }
    const double* c = parity ? obj.color_b : obj.color_a;
    rgb[0] = c[0];
    rgb[1] = c[1];
    rgb[2] = c[2];
}

inline void require_camera_outside(const SceneObject& obj, const CameraPose& pose) {
    if (pose.radius <= obj.bounding_radius())
        throw std::invalid_argument("render: camera inside the object");
}

}  // namespace detail

struct RenderResult {
    Image image;              // 3 x H x W
    std::vector<std::uint8_t> mask;  // H*W foreground flags (center-ray hits)
};

/// Deterministic flat-shaded perspective render; the camera sits at the
/// spherical pose looking at the origin.
inline RenderResult render(const SceneObject& scene, const CameraPose& pose,
                           const RenderConfig& cfg) {
    scene.validate();
    cfg.validate();
    detail::require_camera_outside(scene, pose);
    const detail::CameraFrame cam = detail::camera_frame(pose, cfg);

    RenderResult out;
    out.image = Image(3, cfg.height, cfg.width);
    out.mask.assign(static_cast<std::size_t>(cfg.height) * cfg.width, 0);

    const int s = cfg.supersample;
    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            double acc[3] = {0.0, 0.0, 0.0};
            for (int sy = 0; sy < s; ++sy)
                for (int sx = 0; sx < s; ++sx) {
                    const double px = x + (sx + 0.5) / s - 0.5;
                    const double py = y + (sy + 0.5) / s - 0.5;
                    const Vec3 dir = detail::pixel_ray(cam, px, py, cfg.width, cfg.height);
                    detail::Hit hit;
                    double rgb[3];
                    if (detail::intersect(scene, cam.origin, dir, hit))
                        detail::texture_color(scene, hit.point, rgb);
                    else {
                        rgb[0] = cfg.background[0];
                        rgb[1] = cfg.background[1];
                        rgb[2] = cfg.background[2];
                    }
                    acc[0] += rgb[0];
                    acc[1] += rgb[1];
                    acc[2] += rgb[2];
                }
            const double inv = 1.0 / (s * s);
            out.image.at(0, y, x) = acc[0] * inv;
            out.image.at(1, y, x) = acc[1] * inv;
            out.image.at(2, y, x) = acc[2] * inv;

            const Vec3 dir = detail::pixel_ray(cam, x, y, cfg.width, cfg.height);
            detail::Hit hit;
            if (detail::intersect(scene, cam.origin, dir, hit))
                out.mask[static_cast<std::size_t>(y) * cfg.width + x] = 1;
        }
    return out;
}

/// Exact flow from pose_a's pixels to pose_b: the center-ray hit point is
/// projected into pose_b's camera. Validity excludes background pixels and
/// points occluded or off-screen in pose_b.
inline FlowField gt_flow(const SceneObject& scene, const CameraPose& pose_a,
                         const CameraPose& pose_b, const RenderConfig& cfg) {
    scene.validate();
    cfg.validate();
    detail::require_camera_outside(scene, pose_a);
    detail::require_camera_outside(scene, pose_b);
    const detail::CameraFrame cam_a = detail::camera_frame(pose_a, cfg);
    const detail::CameraFrame cam_b = detail::camera_frame(pose_b, cfg);

    FlowField field(cfg.height, cfg.width);
    std::fill(field.valid.begin(), field.valid.end(), 0);

    for (int y = 0; y < cfg.height; ++y)
        for (int x = 0; x < cfg.width; ++x) {
            const Vec3 dir = detail::pixel_ray(cam_a, x, y, cfg.width, cfg.height);
            detail::Hit hit;
            if (!detail::intersect(scene, cam_a.origin, dir, hit)) continue;

            double bx, by;
            if (!detail::project(cam_b, hit.point, cfg.width, cfg.height, bx, by)) continue;
            if (bx < 0.0 || by < 0.0 || bx > cfg.width - 1.0 || by > cfg.height - 1.0) continue;

            // Occlusion: the nearest surface along pose_b's ray to the point
            // must be the point itself.
            const Vec3 to_p = hit.point - cam_b.origin;
            const double dist = to_p.norm();
            detail::Hit hit_b;
            if (!detail::intersect(scene, cam_b.origin, to_p.normalized(), hit_b)) continue;
            if (hit_b.t < dist - 1e-6) continue;

            const std::size_t i = field.idx(y, x);
            field.u[i] = bx - x;
            field.v[i] = by - y;
            field.valid[i] = 1;
        }
    return field;
}

/// The 25-view evaluation protocol: elevation and radius from the base
/// pose, azimuths spanning base azimuth -45deg..+45deg inclusive, plus
/// masks, ground-truth flows from view 00, and a pose manifest.
inline constexpr int kProtocolViews = 25;
inline constexpr double kProtocolSpanDeg = 45.0;

inline std::vector<CameraPose> protocol_poses(const CameraPose& base) {
    std::vector<CameraPose> poses;
    poses.reserve(kProtocolViews);
    for (int i = 0; i < kProtocolViews; ++i) {
        const double off = -kProtocolSpanDeg + 2.0 * kProtocolSpanDeg * i / (kProtocolViews - 1);
        poses.emplace_back(base.azimuth + deg2rad(off), base.elevation, base.radius);
    }
    return poses;
}

inline void generate_dataset(const SceneObject& scene, const CameraPose& base_pose,
                             const RenderConfig& cfg, const std::string& out_dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(fs::path(out_dir) / "views", ec);
    fs::create_directories(fs::path(out_dir) / "masks", ec);
    fs::create_directories(fs::path(out_dir) / "flows", ec);
    if (ec) throw std::runtime_error("generate_dataset: cannot create " + out_dir);

    const std::vector<CameraPose> poses = protocol_poses(base_pose);
    nlohmann::json pose_list = nlohmann::json::array();

    char name[64];
    for (int i = 0; i < kProtocolViews; ++i) {
        const RenderResult r = render(scene, poses[static_cast<std::size_t>(i)], cfg);
        std::snprintf(name, sizeof(name), "view_%02d.png", i);
        write_png(r.image, (fs::path(out_dir) / "views" / name).string());

        Image mask(1, cfg.height, cfg.width);
        for (int y = 0; y < cfg.height; ++y)
            for (int x = 0; x < cfg.width; ++x)
                mask.at(0, y, x) = r.mask[static_cast<std::size_t>(y) * cfg.width + x] ? 1.0 : 0.0;
        std::snprintf(name, sizeof(name), "mask_%02d.png", i);
        write_png(mask, (fs::path(out_dir) / "masks" / name).string());

        const FlowField field = gt_flow(scene, poses[0], poses[static_cast<std::size_t>(i)], cfg);
        std::snprintf(name, sizeof(name), "flow_00_to_%02d.flo", i);
        write_flo(field, (fs::path(out_dir) / "flows" / name).string());

        pose_list.push_back(pose_to_json(poses[static_cast<std::size_t>(i)]));
    }

    std::ofstream pose_file(fs::path(out_dir) / "poses.json");
    if (!pose_file) throw std::runtime_error("generate_dataset: cannot write poses.json");
    pose_file << pose_list.dump(2) << "\n";
}

}  // namespace vivid
