#ifndef UGV_ENCODING_HPP
#define UGV_ENCODING_HPP

#include <array>
#include <cstdint>
#include <string>

#include "ugv/tensor.hpp"

namespace ugv {

// One image's four ordered keypoints in pixel coordinates. Coordinates are
// continuous with the origin at the top-left image corner; the center of
// pixel (row i, col j) is at (j + 0.5, i + 0.5).
struct Annotation {
    struct Keypoint {
        double x = 0, y = 0;
        bool visible = false;
    };
    std::string image_id;
    int image_w = 0, image_h = 0;
    std::array<Keypoint, 4> kps;
};

// The four directed connections forming the quadrilateral: each keypoint to
// the next, the last back to the first.
inline constexpr std::array<std::pair<int, int>, 4> kConnections = {{{0, 1}, {1, 2}, {2, 3}, {3, 0}}};

struct EncodeStats {
    int skipped_keypoints = 0;   // mapped outside the map after stride
    int skipped_connections = 0; // zero-length
};

// 5-channel binary heatmap: for each visible keypoint k, channel k is 1 at
// every map pixel whose center lies within `radius` (map px) of the keypoint
// scaled by 1/stride; channel 4 is the background,
// clamp(1 - sum(channels 0..3), 0, 1).
Tensor encode_heatmap(const Annotation& ann, int mh, int mw, double stride, double radius,
                      EncodeStats* stats = nullptr);

// 8-channel PAF: for connection c with both endpoints visible, every map
// pixel whose center is within width/2 of the segment carries the unit
// vector from source to target in channels (2c, 2c+1); elsewhere zero.
Tensor encode_paf(const Annotation& ann, int mh, int mw, double stride, double width,
                  EncodeStats* stats = nullptr);

struct GroundTruthMaps {
    Tensor heatmap; // (5, mh, mw)
    Tensor paf;     // (8, mh, mw)
    double stride = 4;
};

GroundTruthMaps encode_ground_truth(const Annotation& ann, int mh, int mw, double stride,
                                    double radius = 3.0, double paf_width = 6.0,
                                    EncodeStats* stats = nullptr);

// min(1, 0.05 + 0.02 * epoch)
double balance_rate(int epoch);

// Background-sampling mask: foreground pixels (any keypoint disk or PAF
// support) are always 1; background pixels are kept independently with
// probability balance_rate(epoch), deterministically under the seed.
struct BalanceMask {
    Tensor mask; // (mh, mw), values 0/1
    int epoch = 0;
    double rate = 0;
};

BalanceMask balance_mask(int epoch, const GroundTruthMaps& gt, uint64_t seed);

// Masked MSE:
//   w_p/(n*s) * sum over masked heatmap error^2
// + w_q/(n*t) * sum over masked PAF error^2
// with s = heatmap channels, t = PAF channels and n the number of
// mask-included pixels. Throws ShapeError on mismatched shapes and
// DegenerateMaskError when the mask excludes everything.
double loss(const Tensor& pred_heat, const Tensor& gt_heat,
            const Tensor& pred_paf, const Tensor& gt_paf,
            const BalanceMask& mask, double w_p = 1.0, double w_q = 0.1);

} // namespace ugv

#endif // UGV_ENCODING_HPP
