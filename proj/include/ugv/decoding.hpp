#ifndef UGV_DECODING_HPP
#define UGV_DECODING_HPP

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "ugv/image.hpp"
#include "ugv/network.hpp"
#include "ugv/tensor.hpp"

namespace ugv {

// A keypoint candidate in map pixel-index coordinates: integer (x, y) names
// the peak pixel; sub-pixel refinement adds fractional offsets. The pixel
// center lives at (x + 0.5, y + 0.5) in continuous map coordinates.
struct Candidate {
    int channel = 0; // 0..3
    double x = 0, y = 0;
    float score = 0;
};

// Peak extraction on heatmap channels 0..3 (background ignored). A peak is a
// connected component of equal-valued pixels >= peak_threshold with no
// strictly greater value inside the window around any member and at least
// one strictly lower neighbor; single-pixel peaks get a quadratic sub-pixel
// fit (capped at +/-0.5 px), plateaus report their centroid. Uniform maps
// therefore yield nothing.
std::vector<Candidate> nms_peaks(const Tensor& heatmap, int window = 5,
                                 float peak_threshold = 0.5f);

struct ConnectionScore {
    double paf_score = 0;      // mean alignment in [-1, 1]
    double valid_fraction = 0; // fraction of samples above the alignment threshold
};

// Samples n points uniformly on the segment a->b, bilinearly interpolates the
// two PAF channels of the pair and dots with the a->b unit vector.
ConnectionScore score_connection(const Candidate& a, const Candidate& b, const Tensor& paf,
                                 int channel_pair, int n_samples = 10,
                                 double alignment_threshold = 0.05);

struct Detection {
    struct Keypoint {
        double x = 0, y = 0;
        float score = 0;
        bool present = false;
    };
    std::string image_id;
    std::array<Keypoint, 4> kps;
    double total_score = 0;
    bool complete = false;
    bool degenerate = false; // complete but self-intersecting quad
};

struct AssembleParams {
    double min_paf_score = 0.05;
    double min_valid_fraction = 0.8;
    int n_samples = 10;
    double alignment_threshold = 0.05;
    double scale = 4.0;  // map px -> output px (the output stride)
    bool single = false; // keep only the best-scoring detection
};

// Greedy per-edge matching of candidates against the PAF, chaining accepted
// edges into detections. Candidates with no accepted incident edge are
// dropped. Keypoints are reported at (index + 0.5) * scale in output pixels.
std::vector<Detection> assemble(const std::vector<Candidate>& candidates, const Tensor& paf,
                                const AssembleParams& params = {});

struct DetectParams {
    int window = 5;
    float peak_threshold = 0.5f;
    AssembleParams assemble;
    bool single = false;
};

// resize -> forward -> nms -> assemble; keypoints in raw-image pixels.
std::vector<Detection> detect(const ImageBuffer& img, const ParameterStore& params,
                              const NetworkConfig& cfg, const DetectParams& dp = {});

// Decodes precomputed maps (ground truth or network output). scale_x/scale_y
// convert map px to the caller's pixel space. Coordinates are clamped to
// [0, bound_w) x [0, bound_h) when bounds are positive.
std::vector<Detection> decode_maps(const Tensor& heatmap, const Tensor& paf,
                                   const DetectParams& dp, double scale_x, double scale_y,
                                   int bound_w = 0, int bound_h = 0);

} // namespace ugv

#endif // UGV_DECODING_HPP
