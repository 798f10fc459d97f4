#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "vivid/errors.hpp"
#include "vivid/flow.hpp"
#include "vivid/image.hpp"

namespace vivid {

struct MetricReport {
    std::string name;
    double psnr = 0.0;
    double ssim = 0.0;
    double for_8 = 0.0;
    double for_16 = 0.0;
    long pixel_count = 0;
};

/// 10 log10(peak^2 / MSE); identical images return the cap.
inline double psnr(const Image& a, const Image& b, double peak = 1.0, double cap_db = 99.0) {
    require_same_shape(a, b, "psnr");
    if (!(peak > 0.0)) throw std::invalid_argument("psnr: peak must be positive");
    double mse = 0.0;
    for (std::size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        mse += d * d;
    }
    mse /= static_cast<double>(a.data.size());
    if (mse == 0.0) return cap_db;
    return 10.0 * std::log10(peak * peak / mse);
}

namespace detail {

inline std::vector<double> gaussian_kernel_11() {
    std::vector<double> k(11);
    double sum = 0.0;
    for (int i = 0; i < 11; ++i) {
        const double d = i - 5;
        k[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
        sum += k[static_cast<std::size_t>(i)];
    }
    for (double& v : k) v /= sum;
    return k;
}

/// Separable 11-tap Gaussian, valid region only (output is (H-10)x(W-10)).
inline std::vector<double> gauss_filter_valid(const std::vector<double>& img, int h, int w,
                                              int& oh, int& ow) {
    const std::vector<double> k = gaussian_kernel_11();
    ow = w - 10;
    oh = h - 10;
    std::vector<double> tmp(static_cast<std::size_t>(h) * ow, 0.0);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < 11; ++i)
                acc += k[static_cast<std::size_t>(i)] * img[static_cast<std::size_t>(y) * w + x + i];
            tmp[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    std::vector<double> out(static_cast<std::size_t>(oh) * ow, 0.0);
    for (int y = 0; y < oh; ++y)
        for (int x = 0; x < ow; ++x) {
            double acc = 0.0;
            for (int i = 0; i < 11; ++i)
                acc += k[static_cast<std::size_t>(i)] * tmp[static_cast<std::size_t>(y + i) * ow + x];
            out[static_cast<std::size_t>(y) * ow + x] = acc;
        }
    return out;
}

}  // namespace detail

/// Mean local SSIM, 11x11 Gaussian window sigma 1.5, C1=(0.01 L)^2,
/// C2=(0.03 L)^2 with L=1 for [0,1] images; channels averaged.
inline double ssim(const Image& a, const Image& b) {
    require_same_shape(a, b, "ssim");
    if (a.height < 11 || a.width < 11)
        throw std::invalid_argument("ssim: images must be at least 11x11");
    constexpr double C1 = 0.01 * 0.01;
    constexpr double C2 = 0.03 * 0.03;
    const int h = a.height, w = a.width;
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    double total = 0.0;
    for (int c = 0; c < a.channels; ++c) {
        std::vector<double> xa(a.data.begin() + static_cast<std::ptrdiff_t>(c) * plane,
                               a.data.begin() + static_cast<std::ptrdiff_t>(c + 1) * plane);
        std::vector<double> xb(b.data.begin() + static_cast<std::ptrdiff_t>(c) * plane,
                               b.data.begin() + static_cast<std::ptrdiff_t>(c + 1) * plane);
        std::vector<double> xaa(plane), xbb(plane), xab(plane);
        for (std::size_t i = 0; i < plane; ++i) {
            xaa[i] = xa[i] * xa[i];
            xbb[i] = xb[i] * xb[i];
            xab[i] = xa[i] * xb[i];
        }
        int oh, ow;
        const std::vector<double> mu_a = detail::gauss_filter_valid(xa, h, w, oh, ow);
        const std::vector<double> mu_b = detail::gauss_filter_valid(xb, h, w, oh, ow);
        const std::vector<double> s_aa = detail::gauss_filter_valid(xaa, h, w, oh, ow);
        const std::vector<double> s_bb = detail::gauss_filter_valid(xbb, h, w, oh, ow);
        const std::vector<double> s_ab = detail::gauss_filter_valid(xab, h, w, oh, ow);

        double acc = 0.0;
        for (std::size_t i = 0; i < mu_a.size(); ++i) {
            const double va = s_aa[i] - mu_a[i] * mu_a[i];
            const double vb = s_bb[i] - mu_b[i] * mu_b[i];
            const double cov = s_ab[i] - mu_a[i] * mu_b[i];
            acc += ((2.0 * mu_a[i] * mu_b[i] + C1) * (2.0 * cov + C2)) /
                   ((mu_a[i] * mu_a[i] + mu_b[i] * mu_b[i] + C1) * (va + vb + C2));
        }
        total += acc / static_cast<double>(mu_a.size());
    }
    return total / a.channels;
}

namespace detail {

/// Union of pixels with non-trivial grayscale gradient in either image.
inline std::vector<std::uint8_t> gradient_active_mask(const Image& a, const Image& b,
                                                      double threshold = 1e-3) {
    const Image ga = to_gray(a);
    const Image gb = to_gray(b);
    const int h = ga.height, w = ga.width;
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(h) * w, 0);
    const auto grad = [&](const Image& g, int y, int x) {
        const double gx = 0.5 * (g.at(0, y, std::min(x + 1, w - 1)) -
                                 g.at(0, y, std::max(x - 1, 0)));
        const double gy = 0.5 * (g.at(0, std::min(y + 1, h - 1), x) -
                                 g.at(0, std::max(y - 1, 0), x));
        return std::hypot(gx, gy);
    };
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            if (grad(ga, y, x) > threshold || grad(gb, y, x) > threshold)
                mask[static_cast<std::size_t>(y) * w + x] = 1;
    return mask;
}

}  // namespace detail

/// FOR_k: the ratio of evaluated pixels whose estimated flow from
/// `generated` to `ground_truth` exceeds k pixels in magnitude. A perfect
/// rendering gives zero. Evaluated pixels come from the foreground mask when
/// given, else from the gradient-active union; invalid flow counts as an
/// outlier.
inline double for_k(const Image& generated, const Image& ground_truth, double k,
                    const std::vector<std::uint8_t>* mask = nullptr,
                    const FlowField* precomputed_flow = nullptr) {
    require_same_shape(generated, ground_truth, "for_k");
    if (!(k > 0.0)) throw std::invalid_argument("for_k: threshold must be positive");
    FlowField local;
    const FlowField* flow = precomputed_flow;
    if (!flow) {
        local = estimate_flow(generated, ground_truth);
        flow = &local;
    }
    std::vector<std::uint8_t> region;
    if (mask) {
        if (mask->size() != static_cast<std::size_t>(generated.height) * generated.width)
            throw std::invalid_argument("for_k: mask size mismatch");
        region = *mask;
    } else {
        region = detail::gradient_active_mask(generated, ground_truth);
    }
    long evaluated = 0;
    long outliers = 0;
    for (int y = 0; y < flow->height; ++y)
        for (int x = 0; x < flow->width; ++x) {
            const std::size_t i = flow->idx(y, x);
            if (!region[i]) continue;
            ++evaluated;
            if (!flow->valid[i] || flow->magnitude(y, x) > k) ++outliers;
        }
    if (evaluated == 0) throw std::invalid_argument("for_k: empty evaluation region");
    return static_cast<double>(outliers) / static_cast<double>(evaluated);
}

/// One report for a generated/ground-truth pair; the flow is estimated once
/// and shared by FOR_8 and FOR_16.
inline MetricReport evaluate_pair(const Image& generated, const Image& ground_truth,
                                  const std::vector<std::uint8_t>* mask = nullptr,
                                  std::string name = {}) {
    MetricReport r;
    r.name = std::move(name);
    r.psnr = psnr(generated, ground_truth);
    r.ssim = ssim(generated, ground_truth);
    const FlowField flow = estimate_flow(generated, ground_truth);
    r.for_8 = for_k(generated, ground_truth, 8.0, mask, &flow);
    r.for_16 = for_k(generated, ground_truth, 16.0, mask, &flow);
    r.pixel_count = static_cast<long>(generated.height) * generated.width;
    return r;
}

namespace detail {

inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

}  // namespace detail

inline std::string metrics_csv(const std::vector<MetricReport>& reports) {
    std::string csv = "name,psnr,ssim,for_8,for_16\n";
    double sp = 0.0, ss = 0.0, s8 = 0.0, s16 = 0.0;
    for (const auto& r : reports) {
        csv += r.name + "," + detail::format_double(r.psnr) + "," + detail::format_double(r.ssim) +
               "," + detail::format_double(r.for_8) + "," + detail::format_double(r.for_16) + "\n";
        sp += r.psnr;
        ss += r.ssim;
        s8 += r.for_8;
        s16 += r.for_16;
    }
    if (!reports.empty()) {
        const double n = static_cast<double>(reports.size());
        csv += "mean," + detail::format_double(sp / n) + "," + detail::format_double(ss / n) +
               "," + detail::format_double(s8 / n) + "," + detail::format_double(s16 / n) + "\n";
    }
    return csv;
}

/// Evaluates directories of equally named PNGs against each other; optional
/// masks directory supplies foreground masks (any filename order-aligned
/// with the sorted pair list).
inline std::vector<MetricReport> evaluate_pair_set(const std::string& gen_dir,
                                                   const std::string& gt_dir,
                                                   const std::string& masks_dir = {}) {
    namespace fs = std::filesystem;
    const auto list_png = [](const std::string& dir) {
        std::vector<std::string> names;
        if (!fs::is_directory(dir))
            throw std::invalid_argument("evaluate_pair_set: not a directory: " + dir);
        for (const auto& e : fs::directory_iterator(dir))
            if (e.is_regular_file() && e.path().extension() == ".png")
                names.push_back(e.path().filename().string());
        std::sort(names.begin(), names.end());
        return names;
    };
    const std::vector<std::string> gen_names = list_png(gen_dir);
    const std::vector<std::string> gt_names = list_png(gt_dir);
    if (gen_names != gt_names) {
        std::string msg = "evaluate_pair_set: directories do not match;";
        for (const auto& n : gen_names)
            if (!std::binary_search(gt_names.begin(), gt_names.end(), n))
                msg += " only-in-gen:" + n;
        for (const auto& n : gt_names)
            if (!std::binary_search(gen_names.begin(), gen_names.end(), n))
                msg += " only-in-gt:" + n;
        if (gen_names.size() != gt_names.size())
            msg += " (counts " + std::to_string(gen_names.size()) + " vs " +
                   std::to_string(gt_names.size()) + ")";
        throw std::invalid_argument(msg);
    }

    std::vector<std::string> mask_names;
    if (!masks_dir.empty()) {
        mask_names = list_png(masks_dir);
        if (mask_names.size() != gen_names.size())
            throw std::invalid_argument("evaluate_pair_set: mask count mismatch");
    }

    std::vector<MetricReport> reports;
    reports.reserve(gen_names.size());
    for (std::size_t i = 0; i < gen_names.size(); ++i) {
        const Image gen = read_png((fs::path(gen_dir) / gen_names[i]).string());
        const Image gt = read_png((fs::path(gt_dir) / gen_names[i]).string());
        std::optional<std::vector<std::uint8_t>> mask;
        if (!masks_dir.empty()) {
            const Image m = read_png((fs::path(masks_dir) / mask_names[i]).string());
            std::vector<std::uint8_t> mv(m.data.size());
            for (std::size_t j = 0; j < m.data.size(); ++j) mv[j] = m.data[j] > 0.5 ? 1 : 0;
            mask = std::move(mv);
        }
        reports.push_back(
            evaluate_pair(gen, gt, mask ? &*mask : nullptr, gen_names[i]));
    }
    return reports;
}

}  // namespace vivid
