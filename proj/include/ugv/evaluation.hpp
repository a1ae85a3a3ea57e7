#ifndef UGV_EVALUATION_HPP
#define UGV_EVALUATION_HPP

#include <array>
#include <optional>
#include <vector>

#include "ugv/decoding.hpp"
#include "ugv/encoding.hpp"
#include "ugv/geometry.hpp"

namespace ugv {

// Pixel-level IoU of two quadrilaterals rasterized at (h, w) with the
// even-odd rule on pixel centers. Both-empty is defined as 0.
double quad_iou(const std::array<Vec2, 4>& a, const std::array<Vec2, 4>& b, int h, int w);

struct MatchResult {
    int tp = 0, fp = 0, fn = 0;
    double mean_matched_iou = 0;
    // matches[g] = detection index matched to ground-truth g, or -1.
    std::vector<int> matches;
};

// Per ground truth, the highest-IoU detection above the threshold is the
// true positive and every other detection above it counts as a false
// positive. Unmatched detections are FP (incomplete ones always), unmatched
// ground truths FN.
MatchResult match_and_count(const std::vector<Detection>& detections,
                            const std::vector<Annotation>& gts, double iou_threshold,
                            int h, int w);

struct DistanceReport {
    std::array<double, 4> per_channel = {0, 0, 0, 0};
    double mean = 0;
    int matched = 0;
    bool defined = false; // false when there are no matched pairs
};

// Mean Euclidean distances over TP-matched pairs; overall mean is the mean
// of the four per-channel means.
DistanceReport keypoint_distance(const std::vector<Detection>& detections,
                                 const std::vector<Annotation>& gts,
                                 const MatchResult& matches);

struct PoseReprojReport {
    double mean_px = 0;
    int evaluated = 0;
    int solver_failures = 0;
    bool defined = false;
};

// Solves P4P on each matched complete detection, projects the model corners
// back and measures the mean distance to the ground-truth keypoints.
PoseReprojReport pose_reproj_eval(const std::vector<Detection>& detections,
                                  const std::vector<Annotation>& gts,
                                  const MatchResult& matches, const RobotModel& model,
                                  const CameraIntrinsics& cam);

struct EvalReport {
    double precision = 0;
    double recall = 0;
    double mean_iou = 0;
    std::array<double, 4> per_channel_dist = {0, 0, 0, 0};
    double mean_dist = 0;
    bool dist_defined = false;
    std::optional<double> pose_reproj_err;
    int tp = 0, fp = 0, fn = 0;
};

EvalReport evaluate(const std::vector<Detection>& detections,
                    const std::vector<Annotation>& gts, double iou_threshold, int h, int w,
                    const RobotModel* model = nullptr, const CameraIntrinsics* cam = nullptr);

std::array<Vec2, 4> annotation_quad(const Annotation& ann);
std::array<Vec2, 4> detection_quad(const Detection& det);

} // namespace ugv

#endif // UGV_EVALUATION_HPP
