#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "vivid/errors.hpp"
#include "vivid/image.hpp"

namespace vivid {

/// Middlebury unknown-flow sentinel; written for invalid pixels.
inline constexpr float kFlowUnknown = 1e10f;

/// Dense per-pixel displacement field (u horizontal, v vertical, pixels).
struct FlowField {
    int height = 0;
    int width = 0;
    std::vector<double> u;
    std::vector<double> v;
    std::vector<std::uint8_t> valid;

    FlowField() = default;
    FlowField(int h, int w)
        : height(h), width(w), u(static_cast<std::size_t>(h) * w, 0.0),
          v(static_cast<std::size_t>(h) * w, 0.0),
          valid(static_cast<std::size_t>(h) * w, 1) {}

    std::size_t idx(int y, int x) const { return static_cast<std::size_t>(y) * width + x; }
    double magnitude(int y, int x) const {
        const std::size_t i = idx(y, x);
        return std::hypot(u[i], v[i]);
    }
};

// ---------------------------------------------------------------------------
// Middlebury .flo interchange: little-endian float magic 202021.25, int32
// width, int32 height, then row-major interleaved (u, v) float32 pairs.
// ---------------------------------------------------------------------------

inline constexpr float kFloMagic = 202021.25f;

inline void write_flo(const FlowField& field, const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) throw FormatError("write_flo: cannot open " + path);
    const float magic = kFloMagic;
    const std::int32_t w = field.width;
    const std::int32_t h = field.height;
    if (std::fwrite(&magic, 4, 1, fp.get()) != 1 || std::fwrite(&w, 4, 1, fp.get()) != 1 ||
        std::fwrite(&h, 4, 1, fp.get()) != 1)
        throw FormatError("write_flo: header write failed for " + path);
    std::vector<float> row(static_cast<std::size_t>(field.width) * 2);
    for (int y = 0; y < field.height; ++y) {
        for (int x = 0; x < field.width; ++x) {
            const std::size_t i = field.idx(y, x);
            if (field.valid[i]) {
                row[2 * static_cast<std::size_t>(x)] = static_cast<float>(field.u[i]);
                row[2 * static_cast<std::size_t>(x) + 1] = static_cast<float>(field.v[i]);
            } else {
                row[2 * static_cast<std::size_t>(x)] = kFlowUnknown;
                row[2 * static_cast<std::size_t>(x) + 1] = kFlowUnknown;
            }
        }
        if (std::fwrite(row.data(), 4, row.size(), fp.get()) != row.size())
            throw FormatError("write_flo: payload write failed for " + path);
    }
}

inline FlowField read_flo(const std::string& path) {
    detail::FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw FormatError("read_flo: cannot open " + path);
    float magic = 0.0f;
    std::int32_t w = 0, h = 0;
    if (std::fread(&magic, 4, 1, fp.get()) != 1)
        throw FormatError("read_flo: truncated file at byte 0: " + path);
    if (magic != kFloMagic)
        throw FormatError("read_flo: bad magic at byte 0 (expected 202021.25): " + path);
    if (std::fread(&w, 4, 1, fp.get()) != 1)
        throw FormatError("read_flo: truncated file at byte 4: " + path);
    if (std::fread(&h, 4, 1, fp.get()) != 1)
        throw FormatError("read_flo: truncated file at byte 8: " + path);
    if (w <= 0 || h <= 0 || w > 1 << 20 || h > 1 << 20)
        throw FormatError("read_flo: implausible dimensions at byte 4: " + path);
    FlowField field(h, w);
    std::vector<float> row(static_cast<std::size_t>(w) * 2);
    for (int y = 0; y < h; ++y) {
        if (std::fread(row.data(), 4, row.size(), fp.get()) != row.size())
            throw FormatError("read_flo: truncated payload at byte " +
                              std::to_string(12 + static_cast<long long>(y) * w * 8) + ": " +
                              path);
        for (int x = 0; x < w; ++x) {
            const float fu = row[2 * static_cast<std::size_t>(x)];
            const float fv = row[2 * static_cast<std::size_t>(x) + 1];
            const std::size_t i = field.idx(y, x);
            if (std::fabs(fu) >= 1e9f || std::fabs(fv) >= 1e9f) {
                field.valid[i] = 0;
                field.u[i] = fu;
                field.v[i] = fv;
            } else {
                field.u[i] = fu;
                field.v[i] = fv;
            }
        }
    }
    return field;
}

// ---------------------------------------------------------------------------
// Coarse-to-fine pyramidal Lucas-Kanade.
// ---------------------------------------------------------------------------

struct FlowOptions {
    int pyramid_levels = 4;
    int window = 15;    // odd
    int iterations = 5; // Gauss-Newton refinements per level
    double min_eig = 1e-6;  // per-pixel threshold on min eigenvalue / window area
};

namespace detail {

/// [1 4 6 4 1]/16 blur then 2x decimation.
inline Image downsample(const Image& img) {
    static const double k[5] = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
    const int h = img.height, w = img.width;
    Image tmp(1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -2; i <= 2; ++i)
                acc += k[i + 2] * img.at(0, y, std::clamp(x + i, 0, w - 1));
            tmp.at(0, y, x) = acc;
        }
    Image tmp2(1, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double acc = 0.0;
            for (int i = -2; i <= 2; ++i)
                acc += k[i + 2] * tmp.at(0, std::clamp(y + i, 0, h - 1), x);
            tmp2.at(0, y, x) = acc;
        }
    Image out(1, (h + 1) / 2, (w + 1) / 2);
    for (int y = 0; y < out.height; ++y)
        for (int x = 0; x < out.width; ++x) out.at(0, y, x) = tmp2.at(0, 2 * y, 2 * x);
    return out;
}

/// Summed-area table with one row/column of zero padding.
struct Integral {
    int height = 0, width = 0;
    std::vector<double> s;

    explicit Integral(const std::vector<double>& img, int h, int w) : height(h), width(w) {
        s.assign(static_cast<std::size_t>(h + 1) * (w + 1), 0.0);
        for (int y = 0; y < h; ++y) {
            double rowsum = 0.0;
            for (int x = 0; x < w; ++x) {
                rowsum += img[static_cast<std::size_t>(y) * w + x];
                s[static_cast<std::size_t>(y + 1) * (w + 1) + (x + 1)] =
                    s[static_cast<std::size_t>(y) * (w + 1) + (x + 1)] + rowsum;
            }
        }
    }

    /// Sum over the clipped window [y0,y1] x [x0,x1] inclusive.
    double window_sum(int y0, int y1, int x0, int x1) const {
        y0 = std::max(y0, 0);
        x0 = std::max(x0, 0);
        y1 = std::min(y1, height - 1);
        x1 = std::min(x1, width - 1);
        if (y0 > y1 || x0 > x1) return 0.0;
        const auto at = [&](int y, int x) {
            return s[static_cast<std::size_t>(y) * (width + 1) + x];
        };
        return at(y1 + 1, x1 + 1) - at(y0, x1 + 1) - at(y1 + 1, x0) + at(y0, x0);
    }
};

}  // namespace detail

/// Dense coarse-to-fine Lucas-Kanade flow from src to dst. Pixels whose
/// normal matrix is near-singular (flat texture) or whose warp leaves the
/// image are flagged invalid rather than raising an error.
inline FlowField estimate_flow(const Image& src_in, const Image& dst_in,
                               const FlowOptions& opts = {}) {
    require_same_shape(src_in, dst_in, "estimate_flow");
    const Image src_gray = to_gray(src_in);
    const Image dst_gray = to_gray(dst_in);

    std::vector<Image> src_pyr{src_gray}, dst_pyr{dst_gray};
    for (int l = 1; l < opts.pyramid_levels; ++l) {
        if (src_pyr.back().width < 2 * opts.window || src_pyr.back().height < 2 * opts.window)
            break;
        src_pyr.push_back(detail::downsample(src_pyr.back()));
        dst_pyr.push_back(detail::downsample(dst_pyr.back()));
    }

    const int levels = static_cast<int>(src_pyr.size());
    FlowField flow(src_pyr.back().height, src_pyr.back().width);

    for (int level = levels - 1; level >= 0; --level) {
        const Image& S = src_pyr[static_cast<std::size_t>(level)];
        const Image& D = dst_pyr[static_cast<std::size_t>(level)];
        const int h = S.height, w = S.width;
        const std::size_t n = static_cast<std::size_t>(h) * w;

        if (flow.height != h || flow.width != w) {
            // Upsample previous level's flow: bilinear, values doubled.
            FlowField up(h, w);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const double py = std::min(y * 0.5, flow.height - 1.0);
                    const double px = std::min(x * 0.5, flow.width - 1.0);
                    const int y0 = static_cast<int>(py), x0 = static_cast<int>(px);
                    const int y1 = std::min(y0 + 1, flow.height - 1);
                    const int x1 = std::min(x0 + 1, flow.width - 1);
                    const double fy = py - y0, fx = px - x0;
                    const auto lerp = [&](const std::vector<double>& f) {
                        const double a = f[flow.idx(y0, x0)] * (1 - fx) +
                                         f[flow.idx(y0, x1)] * fx;
                        const double b = f[flow.idx(y1, x0)] * (1 - fx) +
                                         f[flow.idx(y1, x1)] * fx;
                        return a * (1 - fy) + b * fy;
                    };
                    up.u[up.idx(y, x)] = 2.0 * lerp(flow.u);
                    up.v[up.idx(y, x)] = 2.0 * lerp(flow.v);
                }
            flow = std::move(up);
        }

        // Spatial gradients of the source level (central differences).
        std::vector<double> Ix(n, 0.0), Iy(n, 0.0);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const std::size_t i = static_cast<std::size_t>(y) * w + x;
                Ix[i] = 0.5 * (S.at(0, y, std::min(x + 1, w - 1)) -
                               S.at(0, y, std::max(x - 1, 0)));
                Iy[i] = 0.5 * (S.at(0, std::min(y + 1, h - 1), x) -
                               S.at(0, std::max(y - 1, 0), x));
            }

        const int r = opts.window / 2;
        std::vector<double> gxx(n), gxy(n), gyy(n), bx(n), by(n), cnt(n);
        std::vector<std::uint8_t> ok(n);

        for (int iter = 0; iter < opts.iterations; ++iter) {
            // Temporal difference under the current warp. Pixels whose warp
            // leaves the destination are masked out of both sides of the
            // normal equations so partial windows stay unbiased.
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    double dv;
                    if (sample_bilinear(D, x + flow.u[i], y + flow.v[i], 0, dv)) {
                        const double it = dv - S.at(0, y, x);
                        gxx[i] = Ix[i] * Ix[i];
                        gxy[i] = Ix[i] * Iy[i];
                        gyy[i] = Iy[i] * Iy[i];
                        bx[i] = it * Ix[i];
                        by[i] = it * Iy[i];
                        cnt[i] = 1.0;
                        ok[i] = 1;
                    } else {
                        gxx[i] = gxy[i] = gyy[i] = bx[i] = by[i] = cnt[i] = 0.0;
                        ok[i] = 0;
                    }
                }
            const detail::Integral sxx(gxx, h, w), sxy(gxy, h, w), syy(gyy, h, w);
            const detail::Integral sbx(bx, h, w), sby(by, h, w), sc(cnt, h, w);

            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * w + x;
                    if (!ok[i]) {
                        flow.valid[flow.idx(y, x)] = 0;
                        continue;
                    }
                    const double wxx = sxx.window_sum(y - r, y + r, x - r, x + r);
                    const double wxy = sxy.window_sum(y - r, y + r, x - r, x + r);
                    const double wyy = syy.window_sum(y - r, y + r, x - r, x + r);
                    const double tr = wxx + wyy;
                    const double det = wxx * wyy - wxy * wxy;
                    const double disc = std::sqrt(std::max(0.0, tr * tr / 4.0 - det));
                    const double min_eig = tr / 2.0 - disc;
                    const double support = sc.window_sum(y - r, y + r, x - r, x + r);
                    if (support < 1.0 || min_eig < opts.min_eig * support || det <= 0.0) {
                        flow.valid[flow.idx(y, x)] = 0;
                        continue;
                    }
                    flow.valid[flow.idx(y, x)] = 1;
                    const double rbx = sbx.window_sum(y - r, y + r, x - r, x + r);
                    const double rby = sby.window_sum(y - r, y + r, x - r, x + r);
                    // Solve G * delta = -b.
                    double du = -(wyy * rbx - wxy * rby) / det;
                    double dvv = -(-wxy * rbx + wxx * rby) / det;
                    const double cap = static_cast<double>(r);
                    du = std::clamp(du, -cap, cap);
                    dvv = std::clamp(dvv, -cap, cap);
                    flow.u[flow.idx(y, x)] += du;
                    flow.v[flow.idx(y, x)] += dvv;
                }
        }
    }
    return flow;
}

}  // namespace vivid
