#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ugv/commands.hpp"
#include "ugv/errors.hpp"

namespace {

ugv::NetworkConfig config_for(const std::string& variant, const std::string& config_path) {
    if (!config_path.empty()) return ugv::config_from_json_file(config_path);
    return ugv::NetworkConfig::defaults(ugv::variant_from_name(variant));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"UGV keypoint detection and 6-DoF pose estimation toolkit"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate synthetic scenes with ground truth");
    ugv::SynthCmdOptions synth_opts;
    synth->add_option("--n", synth_opts.params.n, "number of scenes")->default_val(10);
    synth->add_option("--seed", synth_opts.params.seed)->default_val(1);
    synth->add_option("--noise-sigma", synth_opts.params.noise_sigma)->default_val(0.0);
    synth->add_option("--fx", synth_opts.params.cam.fx)->default_val(1000.0);
    synth->add_option("--fy", synth_opts.params.cam.fy)->default_val(1000.0);
    synth->add_option("--cx", synth_opts.params.cam.cx)->default_val(960.0);
    synth->add_option("--cy", synth_opts.params.cam.cy)->default_val(540.0);
    synth->add_option("--image-w", synth_opts.params.image_w)->default_val(1920);
    synth->add_option("--image-h", synth_opts.params.image_h)->default_val(1080);
    synth->add_option("--length", synth_opts.params.model.length)->default_val(0.72);
    synth->add_option("--width", synth_opts.params.model.width)->default_val(0.48);
    synth->add_option("--height", synth_opts.params.model.height)->default_val(0.23);
    synth->add_option("--radius", synth_opts.maps.radius)->default_val(3.0);
    synth->add_option("--stride", synth_opts.maps.stride, "input px per map px (0 = auto)")
        ->default_val(0.0);
    synth->add_option("--map-h", synth_opts.maps.map_h)->default_val(90);
    synth->add_option("--map-w", synth_opts.maps.map_w)->default_val(160);
    synth->add_flag("--no-maps", [&](int64_t) { synth_opts.write_maps = false; },
                    "skip ground-truth map tensors");
    synth->add_option("--out", synth_opts.out_dir)->required();

    // encode
    auto* encode = app.add_subcommand("encode", "Encode annotations into ground-truth maps");
    ugv::EncodeCmdOptions encode_opts;
    encode->add_option("--annotations", encode_opts.annotations)->required();
    encode->add_option("--out", encode_opts.out_dir)->required();
    encode->add_option("--radius", encode_opts.maps.radius)->default_val(3.0);
    encode->add_option("--paf-width", encode_opts.maps.paf_width)->default_val(6.0);
    encode->add_option("--stride", encode_opts.maps.stride)->default_val(0.0);
    encode->add_option("--map-h", encode_opts.maps.map_h)->default_val(90);
    encode->add_option("--map-w", encode_opts.maps.map_w)->default_val(160);

    // infer
    auto* infer = app.add_subcommand("infer", "Run the network on images");
    ugv::InferCmdOptions infer_opts;
    infer->add_option("images", infer_opts.images, "PNG/PPM files")->required();
    infer->add_option("--weights", infer_opts.weights_manifest, "weight manifest")->required();
    infer->add_option("--out", infer_opts.out_dir)->required();

    // decode
    auto* decode = app.add_subcommand("decode", "Decode map tensors into detections");
    ugv::DecodeCmdOptions decode_opts;
    std::string decode_annotations;
    decode->add_option("--maps", decode_opts.maps_dir)->required();
    decode->add_option("--out", decode_opts.out_path)->required();
    decode->add_option("--annotations", decode_annotations, "per-image sizes source");
    decode->add_option("--image-w", decode_opts.image_w)->default_val(1920);
    decode->add_option("--image-h", decode_opts.image_h)->default_val(1080);
    decode->add_option("--peak-thresh", decode_opts.detect.peak_threshold)->default_val(0.5f);
    decode->add_option("--window", decode_opts.detect.window)->default_val(5);
    decode->add_option("--paf-thresh", decode_opts.detect.assemble.min_paf_score)
        ->default_val(0.05);
    decode->add_option("--valid-fraction", decode_opts.detect.assemble.min_valid_fraction)
        ->default_val(0.8);
    decode->add_flag("--single-ugv", decode_opts.detect.single,
                     "keep only the best-scoring detection per image");

    // pose
    auto* pose = app.add_subcommand("pose", "Solve 6-DoF poses from detections");
    ugv::PoseCmdOptions pose_opts;
    pose->add_option("--detections", pose_opts.detections)->required();
    pose->add_option("--config", pose_opts.camera_config, "camera config JSON")->required();
    pose->add_option("--out", pose_opts.out_path)->required();
    pose->add_option("--length", pose_opts.model.length)->default_val(0.72);
    pose->add_option("--width", pose_opts.model.width)->default_val(0.48);
    pose->add_option("--height", pose_opts.model.height)->default_val(0.23);

    // calibrate
    auto* calibrate = app.add_subcommand("calibrate",
                                         "Derive cam_to_world from a reference annotation");
    ugv::CalibrateCmdOptions cal_opts;
    calibrate->add_option("--annotations", cal_opts.reference_annotations)->required();
    calibrate->add_option("--config", cal_opts.camera_config)->required();
    calibrate->add_option("--length", cal_opts.model.length)->default_val(0.72);
    calibrate->add_option("--width", cal_opts.model.width)->default_val(0.48);
    calibrate->add_option("--height", cal_opts.model.height)->default_val(0.23);

    // eval
    auto* eval = app.add_subcommand("eval", "Score detections against annotations");
    ugv::EvalCmdOptions eval_opts;
    std::string eval_camera, eval_json, eval_variant = "";
    eval->add_option("--detections", eval_opts.detections)->required();
    eval->add_option("--annotations", eval_opts.annotations)->required();
    eval->add_option("--iou-thresh", eval_opts.iou_threshold)->default_val(0.8);
    eval->add_option("--config", eval_camera, "camera config for the reprojection column");
    eval->add_option("--variant", eval_variant, "full|star for the Params/FLOPs columns");
    eval->add_option("--json-out", eval_json);
    eval->add_option("--length", eval_opts.model.length)->default_val(0.72);
    eval->add_option("--width", eval_opts.model.width)->default_val(0.48);
    eval->add_option("--height", eval_opts.model.height)->default_val(0.23);

    // stats
    auto* stats = app.add_subcommand("stats", "Parameter and FLOP counts");
    std::string stats_variant = "full", stats_config;
    stats->add_option("--variant", stats_variant, "full|star");
    stats->add_option("--net-config", stats_config, "network config JSON");

    // init-weights
    auto* init = app.add_subcommand("init-weights", "Write a randomly initialized weight set");
    ugv::InitWeightsCmdOptions init_opts;
    std::string init_variant = "full", init_config;
    init->add_option("--variant", init_variant, "full|star");
    init->add_option("--net-config", init_config, "network config JSON");
    init->add_option("--seed", init_opts.seed)->default_val(1);
    init->add_option("--out", init_opts.out_dir)->required();

    // overlay
    auto* overlay = app.add_subcommand("overlay", "Render detections onto an image");
    ugv::OverlayCmdOptions overlay_opts;
    std::string overlay_camera;
    overlay->add_option("--image", overlay_opts.image)->required();
    overlay->add_option("--detections", overlay_opts.detections)->required();
    overlay->add_option("--out", overlay_opts.out_path)->required();
    overlay->add_option("--config", overlay_camera, "camera config for pose axes");
    overlay->add_option("--length", overlay_opts.model.length)->default_val(0.72);
    overlay->add_option("--width", overlay_opts.model.width)->default_val(0.48);
    overlay->add_option("--height", overlay_opts.model.height)->default_val(0.23);

    // bench
    auto* bench = app.add_subcommand("bench", "Time the forward pass");
    ugv::BenchCmdOptions bench_opts;
    bench->add_option("--weights", bench_opts.weights_manifest)->required();
    bench->add_option("--runs", bench_opts.runs)->default_val(5);

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed()) ugv::cmd_synth(synth_opts);
        if (encode->parsed()) ugv::cmd_encode(encode_opts);
        if (infer->parsed()) ugv::cmd_infer(infer_opts);
        if (decode->parsed()) {
            if (!decode_annotations.empty()) decode_opts.annotations = decode_annotations;
            ugv::cmd_decode(decode_opts);
        }
        if (pose->parsed()) ugv::cmd_pose(pose_opts);
        if (calibrate->parsed()) ugv::cmd_calibrate(cal_opts);
        if (eval->parsed()) {
            if (!eval_camera.empty()) eval_opts.camera_config = eval_camera;
            if (!eval_json.empty()) eval_opts.json_out = eval_json;
            if (!eval_variant.empty())
                eval_opts.net = ugv::NetworkConfig::defaults(ugv::variant_from_name(eval_variant));
            ugv::cmd_eval(eval_opts);
        }
        if (stats->parsed()) ugv::cmd_stats(config_for(stats_variant, stats_config));
        if (init->parsed()) {
            init_opts.cfg = config_for(init_variant, init_config);
            ugv::cmd_init_weights(init_opts);
        }
        if (overlay->parsed()) {
            if (!overlay_camera.empty()) overlay_opts.camera_config = overlay_camera;
            ugv::cmd_overlay(overlay_opts);
        }
        if (bench->parsed()) ugv::cmd_bench(bench_opts);
    } catch (const ugv::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 2;
    } catch (const ugv::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
