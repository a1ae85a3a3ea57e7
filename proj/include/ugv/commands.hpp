#ifndef UGV_COMMANDS_HPP
#define UGV_COMMANDS_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "ugv/decoding.hpp"
#include "ugv/evaluation.hpp"
#include "ugv/jsonl.hpp"
#include "ugv/network.hpp"
#include "ugv/synth.hpp"

namespace ugv {

// Shared map-resolution knobs. stride 0 means "derive from the annotation
// width" (image_w / map_w).
struct MapOptions {
    int map_h = 90, map_w = 160;
    double stride = 0;
    double radius = 3.0;
    double paf_width = 6.0;
};

struct SynthCmdOptions {
    SynthParams params;
    MapOptions maps;
    std::string out_dir;
    bool write_maps = true;
};

// Writes annotations.jsonl, poses_true.jsonl, camera.json and per-scene
// ground-truth map tensors under out_dir/maps.
void cmd_synth(const SynthCmdOptions& opts);

struct EncodeCmdOptions {
    std::string annotations;
    std::string out_dir;
    MapOptions maps;
};

void cmd_encode(const EncodeCmdOptions& opts);

struct InferCmdOptions {
    std::vector<std::string> images;
    std::string weights_manifest;
    std::string out_dir;
};

// Forward pass per image; writes predicted heat/paf map tensors.
void cmd_infer(const InferCmdOptions& opts);

struct DecodeCmdOptions {
    std::string maps_dir;
    std::string out_path;
    std::optional<std::string> annotations; // per-image sizes when given
    int image_w = 1920, image_h = 1080;
    DetectParams detect;
};

void cmd_decode(const DecodeCmdOptions& opts);

struct PoseCmdOptions {
    std::string detections;
    std::string camera_config;
    std::string out_path;
    RobotModel model;
};

struct PoseCmdSummary {
    int written = 0;
    int skipped_incomplete = 0;
    bool camera_frame_fallback = false;
};

PoseCmdSummary cmd_pose(const PoseCmdOptions& opts);

struct CalibrateCmdOptions {
    std::string reference_annotations; // first complete entry is used
    std::string camera_config;         // updated in place, prior file backed up
    RobotModel model;
};

RigidPose cmd_calibrate(const CalibrateCmdOptions& opts);

struct EvalCmdOptions {
    std::string detections;
    std::string annotations;
    double iou_threshold = 0.8;
    std::optional<std::string> camera_config; // enables the reprojection column
    RobotModel model;
    std::optional<NetworkConfig> net; // enables the Params/FLOPs columns
    std::optional<std::string> json_out;
};

EvalReport cmd_eval(const EvalCmdOptions& opts);

void cmd_stats(const NetworkConfig& cfg);

struct InitWeightsCmdOptions {
    NetworkConfig cfg;
    uint64_t seed = 1;
    std::string out_dir;
};

void cmd_init_weights(const InitWeightsCmdOptions& opts);

struct OverlayCmdOptions {
    std::string image;
    std::string detections;
    std::string out_path;
    std::optional<std::string> camera_config; // enables pose axes
    RobotModel model;
};

void cmd_overlay(const OverlayCmdOptions& opts);

struct BenchCmdOptions {
    std::string weights_manifest;
    int runs = 5;
};

void cmd_bench(const BenchCmdOptions& opts);

} // namespace ugv

#endif // UGV_COMMANDS_HPP
