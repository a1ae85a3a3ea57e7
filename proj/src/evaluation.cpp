#include "ugv/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "ugv/errors.hpp"

namespace ugv {

namespace {

// Even-odd crossing xs for the horizontal line y = py. The crossing formula
// must stay in sync with the per-pixel rule: an edge contributes when
// (y1 > py) != (y2 > py), at x = x1 + (py - y1) * (x2 - x1) / (y2 - y1).
void row_crossings(const std::array<Vec2, 4>& quad, double py, std::vector<double>& xs) {
    xs.clear();
    for (int i = 0; i < 4; ++i) {
        const Vec2& p1 = quad[i];
        const Vec2& p2 = quad[(i + 1) % 4];
        if ((p1.y() > py) != (p2.y() > py))
            xs.push_back(p1.x() + (py - p1.y()) * (p2.x() - p1.x()) / (p2.y() - p1.y()));
    }
    std::sort(xs.begin(), xs.end());
}

// Number of crossings strictly right of px; the pixel center is inside when
// it is odd.
bool inside_from_sorted(const std::vector<double>& xs, double px) {
    size_t k = 0;
    while (k < xs.size() && !(xs[k] > px)) ++k;
    return ((xs.size() - k) & 1) != 0;
}

} // namespace

std::array<Vec2, 4> annotation_quad(const Annotation& ann) {
    std::array<Vec2, 4> q;
    for (int i = 0; i < 4; ++i) q[i] = Vec2(ann.kps[i].x, ann.kps[i].y);
    return q;
}

std::array<Vec2, 4> detection_quad(const Detection& det) {
    std::array<Vec2, 4> q;
    for (int i = 0; i < 4; ++i) q[i] = Vec2(det.kps[i].x, det.kps[i].y);
    return q;
}

double quad_iou(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b, int h, int w) {
    for (const auto& q : {a, b})
        for (const auto& p : q)
            if (!p.allFinite()) throw ValidationError("quad_iou: non-finite vertex");

    // Rows outside both quads' vertical extent cannot contain inside pixels.
    double ymin = 1e300, ymax = -1e300;
    for (const auto& q : {a, b})
        for (const auto& p : q) {
            ymin = std::min(ymin, p.y());
            ymax = std::max(ymax, p.y());
        }
    const int row_lo = std::max(0, static_cast<int>(std::floor(ymin - 1)));
    const int row_hi = std::min(h - 1, static_cast<int>(std::ceil(ymax)));

    size_t inter = 0, uni = 0;
    std::vector<double> xa, xb;
    for (int i = row_lo; i <= row_hi; ++i) {
        const double py = i + 0.5;
        row_crossings(a, py, xa);
        row_crossings(b, py, xb);
        if (xa.empty() && xb.empty()) continue;
        for (int j = 0; j < w; ++j) {
            const double px = j + 0.5;
            const bool ia = inside_from_sorted(xa, px);
            const bool ib = inside_from_sorted(xb, px);
            inter += ia && ib;
            uni += ia || ib;
        }
    }
    if (uni == 0) return 0.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

MatchResult match_and_count(const std::vector<Detection>& detections,
                            const std::vector<Annotation>& gts, double iou_threshold,
                            int h, int w) {
    MatchResult result;
    result.matches.assign(gts.size(), -1);

    std::vector<char> claimed(detections.size(), 0);
    double iou_sum = 0;
    for (size_t g = 0; g < gts.size(); ++g) {
        bool gt_ok = true;
        for (const auto& kp : gts[g].kps) gt_ok = gt_ok && kp.visible;
        if (!gt_ok) {
            ++result.fn;
            continue;
        }
        const auto gt_quad = annotation_quad(gts[g]);
        int best = -1;
        double best_iou = iou_threshold; // must be strictly exceeded
        for (size_t d = 0; d < detections.size(); ++d) {
            if (claimed[d] || !detections[d].complete) continue;
            const double iou = quad_iou(detection_quad(detections[d]), gt_quad, h, w);
            if (iou > best_iou) {
                best_iou = iou;
                best = static_cast<int>(d);
            }
        }
        if (best >= 0) {
            claimed[best] = 1;
            result.matches[g] = best;
            ++result.tp;
            iou_sum += best_iou;
        } else {
            ++result.fn;
        }
    }
    for (size_t d = 0; d < detections.size(); ++d)
        if (!claimed[d]) ++result.fp;
    result.mean_matched_iou = result.tp > 0 ? iou_sum / result.tp : 0.0;
    return result;
}

DistanceReport keypoint_distance(const std::vector<Detection>& detections,
                                 const std::vector<Annotation>& gts,
                                 const MatchResult& matches) {
    DistanceReport report;
    std::array<double, 4> sums = {0, 0, 0, 0};
    int pairs = 0;
    for (size_t g = 0; g < gts.size(); ++g) {
        const int d = matches.matches[g];
        if (d < 0) continue;
        ++pairs;
        for (int k = 0; k < 4; ++k) {
            const double dx = detections[d].kps[k].x - gts[g].kps[k].x;
            const double dy = detections[d].kps[k].y - gts[g].kps[k].y;
            sums[k] += std::hypot(dx, dy);
        }
    }
    report.matched = pairs;
    if (pairs == 0) return report; // undefined, not zero
    report.defined = true;
    double total = 0;
    for (int k = 0; k < 4; ++k) {
        report.per_channel[k] = sums[k] / pairs;
        total += report.per_channel[k];
    }
    report.mean = total / 4.0; // mean of channel means, not pooled
    return report;
}

PoseReprojReport pose_reproj_eval(const std::vector<Detection>& detections,
                                  const std::vector<Annotation>& gts,
                                  const MatchResult& matches, const RobotModel& model,
                                  const CameraIntrinsics& cam) {
    PoseReprojReport report;
    const std::array<Vec3, 4> phi = robot_keypoints(model);
    double sum = 0;
    for (size_t g = 0; g < gts.size(); ++g) {
        const int d = matches.matches[g];
        if (d < 0 || !detections[d].complete) continue;
        std::array<Vec2, 4> det_pix, gt_pix;
        for (int k = 0; k < 4; ++k) {
            det_pix[k] = Vec2(detections[d].kps[k].x, detections[d].kps[k].y);
            gt_pix[k] = Vec2(gts[g].kps[k].x, gts[g].kps[k].y);
        }
        try {
            const P4PResult solved = solve_p4p_lm(phi, det_pix, cam);
            double err = 0;
            for (int k = 0; k < 4; ++k)
                err += (project(solved.pose, cam, phi[k]) - gt_pix[k]).norm();
            sum += err / 4.0;
            ++report.evaluated;
        } catch (const Error&) {
            ++report.solver_failures;
        }
    }
    if (report.evaluated > 0) {
        report.mean_px = sum / report.evaluated;
        report.defined = true;
    }
    return report;
}

EvalReport evaluate(const std::vector<Detection>& detections,
                    const std::vector<Annotation>& gts, double iou_threshold, int h, int w,
                    const RobotModel* model, const CameraIntrinsics* cam) {
    EvalReport report;
    const MatchResult m = match_and_count(detections, gts, iou_threshold, h, w);
    report.tp = m.tp;
    report.fp = m.fp;
    report.fn = m.fn;
    report.precision = (m.tp + m.fp) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fp) : 0.0;
    report.recall = (m.tp + m.fn) > 0 ? static_cast<double>(m.tp) / (m.tp + m.fn) : 0.0;
    report.mean_iou = m.mean_matched_iou;
    const DistanceReport dist = keypoint_distance(detections, gts, m);
    report.per_channel_dist = dist.per_channel;
    report.mean_dist = dist.mean;
    report.dist_defined = dist.defined;
    if (model && cam) {
        const PoseReprojReport pr = pose_reproj_eval(detections, gts, m, *model, *cam);
        if (pr.defined) report.pose_reproj_err = pr.mean_px;
    }
    return report;
}

} // namespace ugv
