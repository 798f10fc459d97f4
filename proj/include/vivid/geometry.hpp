#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

#include "vivid/json.hpp"

namespace vivid {

inline constexpr double kPi = 3.14159265358979323846;

inline double deg2rad(double d) { return d * kPi / 180.0; }
inline double rad2deg(double r) { return r * 180.0 / kPi; }

/// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
    a = std::fmod(a, 2.0 * kPi);
    if (a <= -kPi) a += 2.0 * kPi;
    if (a > kPi) a -= 2.0 * kPi;
    return a;
}

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;

    Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
    Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
    Vec3 operator*(double s) const { return {x * s, y * s, z * s}; }
    Vec3 operator-() const { return {-x, -y, -z}; }
    double dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
    Vec3 cross(const Vec3& o) const {
        return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
    }
    double norm() const { return std::sqrt(dot(*this)); }
    Vec3 normalized() const {
        const double n = norm();
        return {x / n, y / n, z / n};
    }
};

struct Quaternion {
    double w = 1.0, x = 0.0, y = 0.0, z = 0.0;

    double dot(const Quaternion& o) const { return w * o.w + x * o.x + y * o.y + z * o.z; }
    double norm() const { return std::sqrt(dot(*this)); }

    Quaternion normalized() const {
        const double n = norm();
        return {w / n, x / n, y / n, z / n};
    }

    Quaternion conjugate() const { return {w, -x, -y, -z}; }
    Quaternion operator-() const { return {-w, -x, -y, -z}; }

    Quaternion operator*(const Quaternion& o) const {
        return {w * o.w - x * o.x - y * o.y - z * o.z,
                w * o.x + x * o.w + y * o.z - z * o.y,
                w * o.y - x * o.z + y * o.w + z * o.x,
                w * o.z + x * o.y - y * o.x + z * o.w};
    }

    Vec3 rotate(const Vec3& v) const {
        const Quaternion p{0.0, v.x, v.y, v.z};
        const Quaternion r = (*this) * p * conjugate();
        return {r.x, r.y, r.z};
    }

    static Quaternion axis_angle(const Vec3& axis, double angle) {
        const Vec3 u = axis.normalized();
        const double h = 0.5 * angle;
        const double s = std::sin(h);
        return {std::cos(h), u.x * s, u.y * s, u.z * s};
    }
};

/// Geodesic angle between two unit quaternions as rotations (sign-insensitive).
inline double rotation_angle_between(const Quaternion& a, const Quaternion& b) {
    double d = std::fabs(a.dot(b));
    if (d > 1.0) d = 1.0;
    return 2.0 * std::acos(d);
}

/// Spherical camera pose looking at the origin. Angles in radians,
/// azimuth in (-pi, pi], elevation in [-pi/2, pi/2], radius > 0.
struct CameraPose {
    double azimuth = 0.0;
    double elevation = 0.0;
    double radius = 1.0;

    CameraPose() = default;
    CameraPose(double az, double el, double r) : azimuth(wrap_angle(az)), elevation(el), radius(r) {
        if (!(r > 0.0)) throw std::invalid_argument("CameraPose: radius must be positive");
        if (el < -kPi / 2 - 1e-12 || el > kPi / 2 + 1e-12)
            throw std::invalid_argument("CameraPose: elevation outside [-pi/2, pi/2]");
    }

    Vec3 position() const {
        const double ce = std::cos(elevation);
        return {radius * ce * std::cos(azimuth), radius * ce * std::sin(azimuth),
                radius * std::sin(elevation)};
    }
};

struct RelativePose {
    double d_azimuth = 0.0;
    double d_elevation = 0.0;
    double d_radius = 0.0;
};

/// Orientation for a spherical pose: azimuth rotation about the vertical
/// (z) axis composed with an elevation rotation about the local y axis,
/// i.e. Rz(az) * Ry(-el). The rotated x axis is then the view direction
/// (cos el cos az, cos el sin az, sin el).
inline Quaternion quat_from_pose(const CameraPose& p) {
    const Quaternion qz = Quaternion::axis_angle({0, 0, 1}, p.azimuth);
    const Quaternion qy = Quaternion::axis_angle({0, 1, 0}, -p.elevation);
    return (qz * qy).normalized();
}

/// Azimuth/elevation read back from an orientation via the rotated x axis.
/// Any roll component about the view direction is dropped.
inline void pose_angles_from_quat(const Quaternion& q, double& azimuth, double& elevation) {
    const Vec3 u = q.rotate({1, 0, 0});
    double uz = u.z;
    if (uz > 1.0) uz = 1.0;
    if (uz < -1.0) uz = -1.0;
    elevation = std::asin(uz);
    azimuth = (std::fabs(u.x) + std::fabs(u.y) < 1e-15) ? 0.0 : std::atan2(u.y, u.x);
}

/// Shortest-arc Slerp; falls back to normalized lerp when the inputs are
/// within 1e-6 of parallel.
inline Quaternion slerp(const Quaternion& q0, Quaternion q1, double tau) {
    double d = q0.dot(q1);
    if (d < 0.0) {
        q1 = -q1;
        d = -d;
    }
    if (d > 1.0 - 1e-6) {
        const Quaternion lin{q0.w + (q1.w - q0.w) * tau, q0.x + (q1.x - q0.x) * tau,
                             q0.y + (q1.y - q0.y) * tau, q0.z + (q1.z - q0.z) * tau};
        return lin.normalized();
    }
    const double omega = std::acos(d);
    const double so = std::sin(omega);
    const double a = std::sin((1.0 - tau) * omega) / so;
    const double b = std::sin(tau * omega) / so;
    return Quaternion{a * q0.w + b * q1.w, a * q0.x + b * q1.x, a * q0.y + b * q1.y,
                      a * q0.z + b * q1.z}
        .normalized();
}

/// v^{1:F}: the Slerp path of camera views plus the orientations it was
/// built from. Orientation steps are exactly uniform; poses are their
/// roll-free projections (exact whenever start and target share elevation).
struct Trajectory {
    std::vector<CameraPose> poses;
    std::vector<Quaternion> orientations;

    int frame_count() const { return static_cast<int>(poses.size()); }
};

inline Trajectory make_trajectory(const CameraPose& start, const CameraPose& target, int frames) {
    if (frames < 2) throw std::invalid_argument("make_trajectory: frames must be >= 2");
    const Quaternion q0 = quat_from_pose(start);
    const Quaternion q1 = quat_from_pose(target);
    Trajectory traj;
    traj.poses.reserve(frames);
    traj.orientations.reserve(frames);
    for (int f = 0; f < frames; ++f) {
        const double tau = static_cast<double>(f) / (frames - 1);
        const Quaternion q = slerp(q0, q1, tau);
        double az, el;
        pose_angles_from_quat(q, az, el);
        const double r = start.radius + (target.radius - start.radius) * tau;
        traj.orientations.push_back(q);
        traj.poses.emplace_back(az, el, r);
    }
    traj.poses.front() = start;
    traj.poses.back() = target;
    return traj;
}

inline RelativePose relative_pose(const CameraPose& reference, const CameraPose& view) {
    return {wrap_angle(view.azimuth - reference.azimuth), view.elevation - reference.elevation,
            view.radius - reference.radius};
}

inline CameraPose apply_relative(const CameraPose& reference, const RelativePose& rel) {
    return {wrap_angle(reference.azimuth + rel.d_azimuth), reference.elevation + rel.d_elevation,
            reference.radius + rel.d_radius};
}

/// JSON: degrees in files, radians in memory.
inline nlohmann::json pose_to_json(const CameraPose& p) {
    return {{"azimuth_deg", rad2deg(p.azimuth)},
            {"elevation_deg", rad2deg(p.elevation)},
            {"radius", p.radius}};
}

inline CameraPose pose_from_json(const nlohmann::json& j) {
    return {deg2rad(j.at("azimuth_deg").get<double>()),
            deg2rad(j.at("elevation_deg").get<double>()), j.at("radius").get<double>()};
}

inline nlohmann::json trajectory_to_json(const Trajectory& t) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& p : t.poses) arr.push_back(pose_to_json(p));
    return arr;
}

inline Trajectory trajectory_from_json(const nlohmann::json& arr) {
    Trajectory t;
    for (const auto& j : arr) {
        t.poses.push_back(pose_from_json(j));
        t.orientations.push_back(quat_from_pose(t.poses.back()));
    }
    return t;
}

}  // namespace vivid
