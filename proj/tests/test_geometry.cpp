#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "vivid/geometry.hpp"

using namespace vivid;

namespace {

// Independent oracle: spherical pose -> rotation matrix Rz(az) * Ry(-el),
// then matrix -> quaternion by the standard trace construction.
struct Mat3 {
    double m[3][3];
};

Mat3 matmul(const Mat3& a, const Mat3& b) {
    Mat3 c{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
            c.m[i][j] = 0.0;
            for (int k = 0; k < 3; ++k) c.m[i][j] += a.m[i][k] * b.m[k][j];
        }
    return c;
}

Mat3 rot_z(double a) {
    return {{{std::cos(a), -std::sin(a), 0}, {std::sin(a), std::cos(a), 0}, {0, 0, 1}}};
}

Mat3 rot_y(double a) {
    return {{{std::cos(a), 0, std::sin(a)}, {0, 1, 0}, {-std::sin(a), 0, std::cos(a)}}};
}

Quaternion quat_from_matrix(const Mat3& r) {
    const double tr = r.m[0][0] + r.m[1][1] + r.m[2][2];
    Quaternion q;
    if (tr > 0.0) {
        const double s = std::sqrt(tr + 1.0) * 2.0;
        q.w = 0.25 * s;
        q.x = (r.m[2][1] - r.m[1][2]) / s;
        q.y = (r.m[0][2] - r.m[2][0]) / s;
        q.z = (r.m[1][0] - r.m[0][1]) / s;
    } else if (r.m[0][0] > r.m[1][1] && r.m[0][0] > r.m[2][2]) {
        const double s = std::sqrt(1.0 + r.m[0][0] - r.m[1][1] - r.m[2][2]) * 2.0;
        q.w = (r.m[2][1] - r.m[1][2]) / s;
        q.x = 0.25 * s;
        q.y = (r.m[0][1] + r.m[1][0]) / s;
        q.z = (r.m[0][2] + r.m[2][0]) / s;
    } else if (r.m[1][1] > r.m[2][2]) {
        const double s = std::sqrt(1.0 + r.m[1][1] - r.m[0][0] - r.m[2][2]) * 2.0;
        q.w = (r.m[0][2] - r.m[2][0]) / s;
        q.x = (r.m[0][1] + r.m[1][0]) / s;
        q.y = 0.25 * s;
        q.z = (r.m[1][2] + r.m[2][1]) / s;
    } else {
        const double s = std::sqrt(1.0 + r.m[2][2] - r.m[0][0] - r.m[1][1]) * 2.0;
        q.w = (r.m[1][0] - r.m[0][1]) / s;
        q.x = (r.m[0][2] + r.m[2][0]) / s;
        q.y = (r.m[1][2] + r.m[2][1]) / s;
        q.z = 0.25 * s;
    }
    return q.normalized();
}

double quat_diff(const Quaternion& a, const Quaternion& b) {
    const double d1 = std::fabs(a.w - b.w) + std::fabs(a.x - b.x) + std::fabs(a.y - b.y) +
                      std::fabs(a.z - b.z);
    const double d2 = std::fabs(a.w + b.w) + std::fabs(a.x + b.x) + std::fabs(a.y + b.y) +
                      std::fabs(a.z + b.z);
    return std::min(d1, d2);
}

Quaternion random_unit_quat(std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Quaternion q{n(rng), n(rng), n(rng), n(rng)};
    return q.normalized();
}

CameraPose random_pose(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> az(-kPi, kPi);
    std::uniform_real_distribution<double> el(-kPi / 2 + 0.05, kPi / 2 - 0.05);
    std::uniform_real_distribution<double> r(0.5, 5.0);
    return {az(rng), el(rng), r(rng)};
}

}  // namespace

TEST_CASE("quat_from_pose basics") {
    const Quaternion id = quat_from_pose({0.0, 0.0, 1.0});
    CHECK(id.w == Catch::Approx(1.0).margin(1e-12));
    CHECK(std::fabs(id.x) < 1e-12);
    CHECK(std::fabs(id.y) < 1e-12);
    CHECK(std::fabs(id.z) < 1e-12);

    const Quaternion q90 = quat_from_pose({kPi / 2, 0.0, 1.0});
    CHECK(q90.w == Catch::Approx(std::cos(kPi / 4)).margin(1e-12));
    CHECK(std::fabs(q90.x) < 1e-12);
    CHECK(std::fabs(q90.y) < 1e-12);
    CHECK(q90.z == Catch::Approx(std::sin(kPi / 4)).margin(1e-12));
}

TEST_CASE("quat_from_pose matches the rotation-matrix oracle") {
    const CameraPose p{kPi / 3, kPi / 6, 2.0};
    const Quaternion got = quat_from_pose(p);
    const Quaternion want = quat_from_matrix(matmul(rot_z(p.azimuth), rot_y(-p.elevation)));
    CHECK(quat_diff(got, want) < 1e-12);

    std::mt19937_64 rng(7);
    for (int i = 0; i < 50; ++i) {
        const CameraPose rp = random_pose(rng);
        const Quaternion g = quat_from_pose(rp);
        const Quaternion w = quat_from_matrix(matmul(rot_z(rp.azimuth), rot_y(-rp.elevation)));
        CHECK(quat_diff(g, w) < 1e-9);
        CHECK(std::fabs(g.norm() - 1.0) < 1e-12);
    }
}

TEST_CASE("quat_from_pose round-trips through pose angles") {
    std::mt19937_64 rng(11);
    for (int i = 0; i < 100; ++i) {
        const CameraPose p = random_pose(rng);
        double az, el;
        pose_angles_from_quat(quat_from_pose(p), az, el);
        CHECK(az == Catch::Approx(p.azimuth).margin(1e-9));
        CHECK(el == Catch::Approx(p.elevation).margin(1e-9));
    }
}

TEST_CASE("slerp endpoint and midpoint identities") {
    std::mt19937_64 rng(3);
    const Quaternion q = random_unit_quat(rng);
    CHECK(quat_diff(slerp(q, q, 0.5), q) < 1e-12);

    const Quaternion q0 = random_unit_quat(rng);
    const Quaternion q1 = random_unit_quat(rng);
    CHECK(quat_diff(slerp(q0, q1, 0.0), q0) < 1e-12);
    CHECK(quat_diff(slerp(q0, q1, 1.0), q1) < 1e-12);

    const Quaternion z90 = Quaternion::axis_angle({0, 0, 1}, kPi / 2);
    const Quaternion mid = slerp({1, 0, 0, 0}, z90, 0.5);
    CHECK(mid.w == Catch::Approx(0.92388).margin(1e-5));
    CHECK(std::fabs(mid.x) < 1e-12);
    CHECK(std::fabs(mid.y) < 1e-12);
    CHECK(mid.z == Catch::Approx(0.38268).margin(1e-5));
}

TEST_CASE("slerp properties: unit norm, shortest arc, symmetry") {
    std::mt19937_64 rng(13);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 200; ++i) {
        const Quaternion q0 = random_unit_quat(rng);
        const Quaternion q1 = random_unit_quat(rng);
        const double tau = u(rng);
        const Quaternion s = slerp(q0, q1, tau);
        CHECK(std::fabs(s.norm() - 1.0) < 1e-9);
        CHECK(quat_diff(s, slerp(q1, q0, 1.0 - tau)) < 1e-9);
    }
    // Near-parallel fallback stays finite and unit.
    const Quaternion q = random_unit_quat(rng);
    Quaternion q_eps = q;
    q_eps.x += 1e-9;
    q_eps = q_eps.normalized();
    const Quaternion s = slerp(q, q_eps, 0.3);
    CHECK(std::fabs(s.norm() - 1.0) < 1e-12);
}

TEST_CASE("make_trajectory degenerate and single-axis paths") {
    const CameraPose p{0.3, deg2rad(15.0), 2.0};
    const Trajectory same = make_trajectory(p, p, 24);
    REQUIRE(same.frame_count() == 24);
    for (const auto& pose : same.poses) {
        CHECK(pose.azimuth == Catch::Approx(p.azimuth).margin(1e-12));
        CHECK(pose.elevation == Catch::Approx(p.elevation).margin(1e-12));
        CHECK(pose.radius == Catch::Approx(p.radius).margin(1e-12));
    }

    const Trajectory t = make_trajectory({0.0, 0.0, 1.0}, {kPi / 2, 0.0, 1.0}, 4);
    REQUIRE(t.frame_count() == 4);
    CHECK(t.poses[0].azimuth == Catch::Approx(0.0).margin(1e-12));
    CHECK(t.poses[1].azimuth == Catch::Approx(deg2rad(30.0)).margin(1e-9));
    CHECK(t.poses[2].azimuth == Catch::Approx(deg2rad(60.0)).margin(1e-9));
    CHECK(t.poses[3].azimuth == Catch::Approx(deg2rad(90.0)).margin(1e-12));

    CHECK_THROWS_AS(make_trajectory(p, p, 1), std::invalid_argument);
}

TEST_CASE("make_trajectory matches the 25-view protocol spacing") {
    const CameraPose start{0.0, deg2rad(15.0), 3.2};
    const CameraPose target{deg2rad(45.0), deg2rad(15.0), 3.2};
    const Trajectory t = make_trajectory(start, target, 25);
    REQUIRE(t.frame_count() == 25);

    // Same-elevation Slerp keeps elevation constant and azimuth linear.
    for (int f = 0; f < 25; ++f) {
        CHECK(t.poses[f].elevation == Catch::Approx(deg2rad(15.0)).margin(1e-9));
        CHECK(t.poses[f].azimuth == Catch::Approx(deg2rad(45.0 * f / 24.0)).margin(1e-9));
    }
    // Constant angular step between consecutive orientations.
    const double step0 = rotation_angle_between(t.orientations[0], t.orientations[1]);
    for (int f = 0; f + 1 < 25; ++f) {
        const double step = rotation_angle_between(t.orientations[f], t.orientations[f + 1]);
        CHECK(std::fabs(step - step0) < 1e-9);
    }
}

TEST_CASE("make_trajectory constant-step property on random pose pairs") {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 25; ++i) {
        const CameraPose a = random_pose(rng);
        const CameraPose b = random_pose(rng);
        const Trajectory t = make_trajectory(a, b, 12);
        const double step0 = rotation_angle_between(t.orientations[0], t.orientations[1]);
        for (int f = 0; f + 1 < t.frame_count(); ++f)
            CHECK(std::fabs(rotation_angle_between(t.orientations[f], t.orientations[f + 1]) -
                            step0) < 1e-9);
        // Radius interpolates linearly.
        CHECK(t.poses[0].radius == Catch::Approx(a.radius).margin(1e-12));
        CHECK(t.poses.back().radius == Catch::Approx(b.radius).margin(1e-12));
    }
}

TEST_CASE("relative_pose wraps and round-trips") {
    const CameraPose v{0.4, 0.2, 2.0};
    const RelativePose zero = relative_pose(v, v);
    CHECK(zero.d_azimuth == 0.0);
    CHECK(zero.d_elevation == 0.0);
    CHECK(zero.d_radius == 0.0);

    const RelativePose wrap =
        relative_pose({deg2rad(170.0), 0.0, 1.0}, {deg2rad(-170.0), 0.0, 1.0});
    CHECK(wrap.d_azimuth == Catch::Approx(deg2rad(20.0)).margin(1e-12));

    std::mt19937_64 rng(23);
    for (int i = 0; i < 100; ++i) {
        const CameraPose ref = random_pose(rng);
        const CameraPose view = random_pose(rng);
        const CameraPose rec = apply_relative(ref, relative_pose(ref, view));
        CHECK(rec.azimuth == Catch::Approx(view.azimuth).margin(1e-12));
        CHECK(rec.elevation == Catch::Approx(view.elevation).margin(1e-12));
        CHECK(rec.radius == Catch::Approx(view.radius).margin(1e-12));
    }
}

TEST_CASE("trajectory JSON uses degrees and round-trips") {
    const Trajectory t =
        make_trajectory({0.0, deg2rad(15.0), 3.2}, {deg2rad(90.0), deg2rad(15.0), 3.2}, 24);
    const nlohmann::json j = trajectory_to_json(t);
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 24);
    CHECK(j[0].at("azimuth_deg").get<double>() == Catch::Approx(0.0).margin(1e-12));
    CHECK(j[0].at("elevation_deg").get<double>() == Catch::Approx(15.0).margin(1e-9));

    const Trajectory back = trajectory_from_json(j);
    REQUIRE(back.frame_count() == t.frame_count());
    for (int f = 0; f < t.frame_count(); ++f) {
        CHECK(back.poses[f].azimuth == Catch::Approx(t.poses[f].azimuth).margin(1e-12));
        CHECK(back.poses[f].elevation == Catch::Approx(t.poses[f].elevation).margin(1e-12));
        CHECK(back.poses[f].radius == Catch::Approx(t.poses[f].radius).margin(1e-12));
    }
}

TEST_CASE("pose validation") {
    CHECK_THROWS_AS(CameraPose(0.0, 0.0, -1.0), std::invalid_argument);
    CHECK_THROWS_AS(CameraPose(0.0, 2.0, 1.0), std::invalid_argument);
    const CameraPose wrapped(kPi * 1.5, 0.0, 1.0);
    CHECK(wrapped.azimuth == Catch::Approx(-kPi / 2).margin(1e-12));
}
