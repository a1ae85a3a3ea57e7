#include "ugv/encoding.hpp"

#include <algorithm>
#include <cmath>

#include "ugv/errors.hpp"
#include "ugv/rng.hpp"

namespace ugv {

Tensor encode_heatmap(const Annotation& ann, int mh, int mw, double stride, double radius,
                      EncodeStats* stats) {
    if (radius < 1) throw ValidationError("heatmap radius must be >= 1");
    if (stride <= 0) throw ValidationError("stride must be positive");

    Tensor heat({5, static_cast<uint32_t>(mh), static_cast<uint32_t>(mw)});
    for (int k = 0; k < 4; ++k) {
        const auto& kp = ann.kps[k];
        if (!kp.visible) continue;
        const double mx = kp.x / stride;
        const double my = kp.y / stride;
        if (mx < 0 || mx >= mw || my < 0 || my >= mh) {
            if (stats) ++stats->skipped_keypoints;
            continue;
        }
        const int x0 = std::max(0, static_cast<int>(std::floor(mx - radius - 1)));
        const int x1 = std::min(mw - 1, static_cast<int>(std::ceil(mx + radius + 1)));
        const int y0 = std::max(0, static_cast<int>(std::floor(my - radius - 1)));
        const int y1 = std::min(mh - 1, static_cast<int>(std::ceil(my + radius + 1)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double dx = (x + 0.5) - mx;
                const double dy = (y + 0.5) - my;
                if (dx * dx + dy * dy <= radius * radius) heat.at(k, y, x) = 1.0f;
            }
        }
    }
    // Background = clamp(1 - sum of keypoint channels, 0, 1).
    const size_t plane = static_cast<size_t>(mh) * mw;
    for (size_t i = 0; i < plane; ++i) {
        float s = 0;
        for (int k = 0; k < 4; ++k) s += heat.data[k * plane + i];
        heat.data[4 * plane + i] = std::clamp(1.0f - s, 0.0f, 1.0f);
    }
    return heat;
}

Tensor encode_paf(const Annotation& ann, int mh, int mw, double stride, double width,
                  EncodeStats* stats) {
    if (width < 1) throw ValidationError("paf width must be >= 1");
    if (stride <= 0) throw ValidationError("stride must be positive");

    Tensor paf({8, static_cast<uint32_t>(mh), static_cast<uint32_t>(mw)});
    const double half = width / 2.0;
    for (int c = 0; c < 4; ++c) {
        const auto& a = ann.kps[kConnections[c].first];
        const auto& b = ann.kps[kConnections[c].second];
        if (!a.visible || !b.visible) continue;
        const double ax = a.x / stride, ay = a.y / stride;
        const double bx = b.x / stride, by = b.y / stride;
        const double dx = bx - ax, dy = by - ay;
        const double len = std::hypot(dx, dy);
        if (len < 1e-9) {
            if (stats) ++stats->skipped_connections;
            continue;
        }
        const float ux = static_cast<float>(dx / len);
        const float uy = static_cast<float>(dy / len);

        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(ax, bx) - half - 1)));
        const int x1 = std::min(mw - 1, static_cast<int>(std::ceil(std::max(ax, bx) + half + 1)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(ay, by) - half - 1)));
        const int y1 = std::min(mh - 1, static_cast<int>(std::ceil(std::max(ay, by) + half + 1)));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                const double px = x + 0.5, py = y + 0.5;
                // Distance from the pixel center to the segment, endpoints
                // included.
                double t = ((px - ax) * dx + (py - ay) * dy) / (len * len);
                t = std::clamp(t, 0.0, 1.0);
                const double ex = ax + t * dx - px;
                const double ey = ay + t * dy - py;
                if (ex * ex + ey * ey <= half * half) {
                    paf.at(2 * c + 0, y, x) = ux;
                    paf.at(2 * c + 1, y, x) = uy;
                }
            }
        }
    }
    return paf;
}

GroundTruthMaps encode_ground_truth(const Annotation& ann, int mh, int mw, double stride,
                                    double radius, double paf_width, EncodeStats* stats) {
    GroundTruthMaps gt;
    gt.heatmap = encode_heatmap(ann, mh, mw, stride, radius, stats);
    gt.paf = encode_paf(ann, mh, mw, stride, paf_width, stats);
    gt.stride = stride;
    return gt;
}

double balance_rate(int epoch) {
    if (epoch < 0) throw ValidationError("epoch must be >= 0");
    return std::min(1.0, 0.05 + 0.02 * epoch);
}

BalanceMask balance_mask(int epoch, const GroundTruthMaps& gt, uint64_t seed) {
    const int mh = gt.heatmap.height();
    const int mw = gt.heatmap.width();
    BalanceMask out;
    out.epoch = epoch;
    out.rate = balance_rate(epoch);
    out.mask = Tensor({static_cast<uint32_t>(mh), static_cast<uint32_t>(mw)});

    const size_t plane = static_cast<size_t>(mh) * mw;
    Rng rng(seed);
    for (size_t i = 0; i < plane; ++i) {
        bool fg = false;
        for (int k = 0; k < 4 && !fg; ++k) fg = gt.heatmap.data[k * plane + i] != 0.0f;
        for (int c = 0; c < 8 && !fg; ++c) fg = gt.paf.data[c * plane + i] != 0.0f;
        // One draw per pixel regardless of foreground keeps the mask for a
        // given seed independent of the maps' foreground layout.
        const double u = rng.uniform();
        out.mask.data[i] = (fg || u < out.rate) ? 1.0f : 0.0f;
    }
    return out;
}

double loss(const Tensor& pred_heat, const Tensor& gt_heat,
            const Tensor& pred_paf, const Tensor& gt_paf,
            const BalanceMask& mask, double w_p, double w_q) {
    if (!pred_heat.same_shape(gt_heat) || !pred_paf.same_shape(gt_paf))
        throw ShapeError("loss: prediction/ground-truth shapes disagree");
    if (pred_heat.ndim() != 3 || pred_paf.ndim() != 3)
        throw ShapeError("loss: expected (C,H,W) maps");
    if (pred_heat.dims[1] != pred_paf.dims[1] || pred_heat.dims[2] != pred_paf.dims[2])
        throw ShapeError("loss: heatmap and PAF spatial dims disagree");
    if (mask.mask.ndim() != 2 || mask.mask.dims[0] != pred_heat.dims[1] ||
        mask.mask.dims[1] != pred_heat.dims[2])
        throw ShapeError("loss: mask dims disagree with maps");

    const size_t plane = static_cast<size_t>(pred_heat.dims[1]) * pred_heat.dims[2];
    size_t n = 0;
    for (size_t i = 0; i < plane; ++i)
        if (mask.mask.data[i] != 0.0f) ++n;
    if (n == 0) throw DegenerateMaskError("loss: mask excludes every pixel");

    const int s = pred_heat.channels();
    const int t = pred_paf.channels();
    double heat_sum = 0, paf_sum = 0;
    for (int c = 0; c < s; ++c) {
        const float* p = pred_heat.channel(c);
        const float* g = gt_heat.channel(c);
        for (size_t i = 0; i < plane; ++i) {
            if (mask.mask.data[i] == 0.0f) continue;
            const double d = static_cast<double>(p[i]) - g[i];
            heat_sum += d * d;
        }
    }
    for (int c = 0; c < t; ++c) {
        const float* p = pred_paf.channel(c);
        const float* g = gt_paf.channel(c);
        for (size_t i = 0; i < plane; ++i) {
            if (mask.mask.data[i] == 0.0f) continue;
            const double d = static_cast<double>(p[i]) - g[i];
            paf_sum += d * d;
        }
    }
    const double dn = static_cast<double>(n);
    return w_p / (dn * s) * heat_sum + w_q / (dn * t) * paf_sum;
}

} // namespace ugv
