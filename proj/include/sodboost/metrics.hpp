#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "sodboost/common.hpp"

namespace sodboost {

// Saliency evaluation works on flat double maps: prediction p in [0,1],
// ground truth g in {0,1}. Thresholded metrics quantize p to 255 levels via
// floor(255*p) and binarize with q >= t for t in 1..255.

struct PrPoint {
    double precision = 1.0;
    double recall = 0.0;
};

using PrCurve = std::array<PrPoint, 255>;

struct EvalOptions {
    double beta2 = 0.3;           // F-measure beta^2
    bool adaptive_meanf = false;  // mean F at threshold 2*mean(p) instead of
                                  // averaging over the 255 levels
};

struct EvalReport {
    double mae = 0.0;
    double f_max = 0.0;
    double f_mean = 0.0;
    double e_measure = 0.0;
    double s_measure = 0.0;
    PrCurve pr{};
    int images = 0;
    int skipped_empty_gt = 0;  // excluded from PR/F averaging
};

namespace metrics_detail {

inline void check_pair(const std::vector<double>& p, const std::vector<double>& g) {
    require_shape(p.size() == g.size() && !p.empty(),
                  "metrics: prediction and ground truth sizes differ (" +
                      std::to_string(p.size()) + " vs " + std::to_string(g.size()) + ")");
}

inline int quantize(double v) {
    int q = static_cast<int>(std::floor(255.0 * v));
    return std::clamp(q, 0, 255);
}

constexpr double kMatlabEps = 2.2204460492503131e-16;

}  // namespace metrics_detail

inline double mae(const std::vector<double>& p, const std::vector<double>& g) {
    metrics_detail::check_pair(p, g);
    double acc = 0.0;
    for (size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] - g[i]);
    return acc / static_cast<double>(p.size());
}

// Precision/recall at the 255 binarization levels. Precision is defined as 1
// when nothing is predicted positive. Throws when the ground truth has no
// foreground (recall undefined); dataset evaluation skips such samples with
// a warning.
inline PrCurve pr_curve(const std::vector<double>& p, const std::vector<double>& g) {
    metrics_detail::check_pair(p, g);
    std::array<int64_t, 256> pos{}, neg{};
    int64_t total_pos = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        const int q = metrics_detail::quantize(p[i]);
        if (g[i] > 0.5) {
            ++pos[static_cast<size_t>(q)];
            ++total_pos;
        } else {
            ++neg[static_cast<size_t>(q)];
        }
    }
    require(total_pos > 0, "pr_curve: ground truth has no foreground, recall undefined");

    PrCurve curve;
    int64_t tp = 0, fp = 0;
    for (int t = 255; t >= 1; --t) {
        tp += pos[static_cast<size_t>(t)];
        fp += neg[static_cast<size_t>(t)];
        PrPoint& pt = curve[static_cast<size_t>(t - 1)];
        pt.precision = (tp + fp) > 0 ? static_cast<double>(tp) / static_cast<double>(tp + fp)
                                     : 1.0;
        pt.recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    }
    return curve;
}

inline double f_beta(double precision, double recall, double beta2) {
    const double denom = beta2 * precision + recall;
    if (denom == 0.0) return 0.0;
    return (1.0 + beta2) * precision * recall / denom;
}

// Max and mean F over the 255 thresholds of a PR curve.
inline std::pair<double, double> f_measure(const PrCurve& curve, double beta2 = 0.3) {
    double fmax = 0.0, fsum = 0.0;
    for (const PrPoint& pt : curve) {
        const double f = f_beta(pt.precision, pt.recall, beta2);
        fmax = std::max(fmax, f);
        fsum += f;
    }
    return {fmax, fsum / static_cast<double>(curve.size())};
}

// F at the adaptive threshold min(2*mean(p), 1).
inline double f_adaptive(const std::vector<double>& p, const std::vector<double>& g,
                         double beta2 = 0.3) {
    metrics_detail::check_pair(p, g);
    double m = 0.0;
    for (double v : p) m += v;
    m = std::min(2.0 * m / static_cast<double>(p.size()), 1.0);
    int64_t tp = 0, fp = 0, fn = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        const bool pred = p[i] >= m;
        const bool truth = g[i] > 0.5;
        tp += pred && truth;
        fp += pred && !truth;
        fn += !pred && truth;
    }
    require(tp + fn > 0, "f_adaptive: ground truth has no foreground");
    const double precision = (tp + fp) > 0 ? static_cast<double>(tp) / (tp + fp) : 1.0;
    const double recall = static_cast<double>(tp) / (tp + fn);
    return f_beta(precision, recall, beta2);
}

namespace metrics_detail {

// Dissimilarity score of the prediction restricted to a mask region.
inline double object_score(const std::vector<double>& values, const std::vector<bool>& mask) {
    int64_t n = 0;
    double sum = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        if (mask[i]) {
            sum += values[i];
            ++n;
        }
    }
    if (n == 0) return 0.0;
    const double x = sum / static_cast<double>(n);
    double var = 0.0;
    for (size_t i = 0; i < values.size(); ++i) {
        if (mask[i]) {
            const double d = values[i] - x;
            var += d * d;
        }
    }
    const double sigma = n > 1 ? std::sqrt(var / static_cast<double>(n - 1)) : 0.0;
    return 2.0 * x / (x * x + 1.0 + sigma + kMatlabEps);
}

inline double s_object(const std::vector<double>& p, const std::vector<double>& g) {
    const size_t n = p.size();
    std::vector<double> fg(n), bg(n);
    std::vector<bool> m(n), inv(n);
    double gsum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const bool on = g[i] > 0.5;
        m[i] = on;
        inv[i] = !on;
        fg[i] = on ? p[i] : 0.0;
        bg[i] = on ? 0.0 : 1.0 - p[i];
        gsum += on ? 1.0 : 0.0;
    }
    const double u = gsum / static_cast<double>(n);
    return u * object_score(fg, m) + (1.0 - u) * object_score(bg, inv);
}

// Region similarity of one rectangle (the S-measure's SSIM variant).
inline double region_ssim(const std::vector<double>& p, const std::vector<double>& g, int W,
                          int y0, int y1, int x0, int x1) {
    const int64_t n = static_cast<int64_t>(y1 - y0) * (x1 - x0);
    if (n <= 0) return 0.0;
    double mx = 0.0, my = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            mx += p[static_cast<size_t>(y) * W + x];
            my += g[static_cast<size_t>(y) * W + x];
        }
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const double dx = p[static_cast<size_t>(y) * W + x] - mx;
            const double dy = g[static_cast<size_t>(y) * W + x] - my;
            sxx += dx * dx;
            syy += dy * dy;
            sxy += dx * dy;
        }
    }
    const double div = n > 1 ? static_cast<double>(n - 1) : 1.0;
    sxx /= div;
    syy /= div;
    sxy /= div;
    const double alpha = 4.0 * mx * my * sxy;
    const double beta = (mx * mx + my * my) * (sxx + syy);
    if (alpha != 0.0) return alpha / (beta + kMatlabEps);
    return beta == 0.0 ? 1.0 : 0.0;
}

inline double s_region(const std::vector<double>& p, const std::vector<double>& g, int H,
                       int W) {
    // Foreground centroid with 1-based rounding, matching the reference
    // formulation.
    double area = 0.0, sx = 0.0, sy = 0.0;
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const double v = g[static_cast<size_t>(y) * W + x];
            area += v;
            sx += v * (x + 1);
            sy += v * (y + 1);
        }
    }
    int cx, cy;
    if (area == 0.0) {
        cx = static_cast<int>(std::lround(W / 2.0));
        cy = static_cast<int>(std::lround(H / 2.0));
    } else {
        cx = static_cast<int>(std::lround(sx / area));
        cy = static_cast<int>(std::lround(sy / area));
    }
    const double total = static_cast<double>(H) * W;
    const double w1 = (static_cast<double>(cx) * cy) / total;
    const double w2 = (static_cast<double>(W - cx) * cy) / total;
    const double w3 = (static_cast<double>(cx) * (H - cy)) / total;
    const double w4 = 1.0 - w1 - w2 - w3;
    return w1 * region_ssim(p, g, W, 0, cy, 0, cx) +
           w2 * region_ssim(p, g, W, 0, cy, cx, W) +
           w3 * region_ssim(p, g, W, cy, H, 0, cx) +
           w4 * region_ssim(p, g, W, cy, H, cx, W);
}

}  // namespace metrics_detail

// Structure measure: alpha-blend of object-aware and region-aware structural
// similarity; degenerate all-background / all-foreground ground truths fall
// back to the mean prediction.
inline double s_measure(const std::vector<double>& p, const std::vector<double>& g, int H,
                        int W, double alpha = 0.5) {
    metrics_detail::check_pair(p, g);
    require_shape(static_cast<size_t>(H) * W == p.size(), "s_measure: bad spatial dims");
    double gmean = 0.0;
    for (double v : g) gmean += v;
    gmean /= static_cast<double>(g.size());
    double pmean = 0.0;
    for (double v : p) pmean += v;
    pmean /= static_cast<double>(p.size());
    if (gmean == 0.0) return 1.0 - pmean;
    if (gmean == 1.0) return pmean;
    const double q = alpha * metrics_detail::s_object(p, g) +
                     (1.0 - alpha) * metrics_detail::s_region(p, g, H, W);
    return std::max(q, 0.0);
}

namespace metrics_detail {

// Enhanced-alignment score of one binarized prediction against a binary
// ground truth. Degenerate all-black / all-white ground truths score the
// plain (mis)match fraction. Normalized by the pixel count so the score
// stays in [0,1] with 1 for a perfect prediction.
inline double e_align(const std::vector<uint8_t>& fm, const std::vector<double>& g) {
    const size_t n = fm.size();
    double gsum = 0.0, fsum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        gsum += g[i];
        fsum += fm[i];
    }
    const double gmean = gsum / static_cast<double>(n);
    const double fmean = fsum / static_cast<double>(n);
    double total = 0.0;
    if (gsum == 0.0) {
        for (size_t i = 0; i < n; ++i) total += 1.0 - fm[i];
    } else if (gsum == static_cast<double>(n)) {
        for (size_t i = 0; i < n; ++i) total += fm[i];
    } else {
        for (size_t i = 0; i < n; ++i) {
            const double dg = g[i] - gmean;
            const double df = fm[i] - fmean;
            const double align = 2.0 * dg * df / (dg * dg + df * df + kMatlabEps);
            const double enhanced = (align + 1.0) * (align + 1.0) / 4.0;
            total += enhanced;
        }
    }
    return total / static_cast<double>(n);
}

}  // namespace metrics_detail

// Maximum enhanced-alignment measure over the 255 binarization levels.
inline double e_measure(const std::vector<double>& p, const std::vector<double>& g) {
    metrics_detail::check_pair(p, g);
    std::vector<int> q(p.size());
    for (size_t i = 0; i < p.size(); ++i) q[i] = metrics_detail::quantize(p[i]);
    double best = 0.0;
    std::vector<uint8_t> fm(p.size());
    for (int t = 1; t <= 255; ++t) {
        for (size_t i = 0; i < q.size(); ++i) fm[i] = q[i] >= t ? 1 : 0;
        best = std::max(best, metrics_detail::e_align(fm, g));
    }
    return best;
}

// Min-max normalization applied before thresholded metrics; constant maps
// are left untouched.
inline std::vector<double> minmax_normalize(const std::vector<double>& p) {
    double lo = p[0], hi = p[0];
    for (double v : p) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    if (hi <= lo) return p;
    std::vector<double> out(p.size());
    const double inv = 1.0 / (hi - lo);
    for (size_t i = 0; i < p.size(); ++i) out[i] = (p[i] - lo) * inv;
    return out;
}

struct PerImageMetrics {
    double mae = 0.0;
    double f_max = 0.0, f_mean = 0.0;
    double e_measure = 0.0, s_measure = 0.0;
    PrCurve pr{};
    bool pr_valid = false;
};

// All metrics for one prediction/mask pair. MAE and the structure measure use
// the raw prediction; thresholded metrics use the min-max normalized map.
inline PerImageMetrics evaluate_pair(const std::vector<double>& p,
                                     const std::vector<double>& g, int H, int W,
                                     const EvalOptions& opts = {}) {
    metrics_detail::check_pair(p, g);
    PerImageMetrics m;
    m.mae = mae(p, g);
    m.s_measure = s_measure(p, g, H, W);
    const std::vector<double> pn = minmax_normalize(p);
    m.e_measure = e_measure(pn, g);
    double gsum = 0.0;
    for (double v : g) gsum += v;
    if (gsum > 0.0) {
        m.pr = pr_curve(pn, g);
        m.pr_valid = true;
        auto [fmax, fmean] = f_measure(m.pr, opts.beta2);
        m.f_max = fmax;
        m.f_mean = opts.adaptive_meanf ? f_adaptive(pn, g, opts.beta2) : fmean;
    }
    return m;
}

// Averages per-image metrics into a dataset report; PR points are averaged
// pointwise over the images that have foreground.
class ReportAccumulator {
public:
    ReportAccumulator() {
        for (auto& pt : pr_) pt = PrPoint{0.0, 0.0};
    }

    void add(const PerImageMetrics& m) {
        ++count_;
        mae_ += m.mae;
        e_ += m.e_measure;
        s_ += m.s_measure;
        if (m.pr_valid) {
            ++pr_count_;
            fmax_ += m.f_max;
            fmean_ += m.f_mean;
            for (size_t i = 0; i < m.pr.size(); ++i) {
                pr_[i].precision += m.pr[i].precision;
                pr_[i].recall += m.pr[i].recall;
            }
        } else {
            ++skipped_;
        }
    }

    EvalReport report() const {
        require(count_ > 0, "evaluation saw no images");
        EvalReport r;
        r.images = count_;
        r.skipped_empty_gt = skipped_;
        r.mae = mae_ / count_;
        r.e_measure = e_ / count_;
        r.s_measure = s_ / count_;
        if (pr_count_ > 0) {
            r.f_max = fmax_ / pr_count_;
            r.f_mean = fmean_ / pr_count_;
            for (size_t i = 0; i < r.pr.size(); ++i) {
                r.pr[i].precision = pr_[i].precision / pr_count_;
                r.pr[i].recall = pr_[i].recall / pr_count_;
            }
        }
        return r;
    }

private:
    int count_ = 0, pr_count_ = 0, skipped_ = 0;
    double mae_ = 0.0, fmax_ = 0.0, fmean_ = 0.0, e_ = 0.0, s_ = 0.0;
    std::array<PrPoint, 255> pr_{};
};

}  // namespace sodboost
