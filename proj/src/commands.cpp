#include "ugv/commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>

#include <json.hpp>

#include "ugv/errors.hpp"
#include "ugv/evaluation.hpp"
#include "ugv/image.hpp"
#include "ugv/parallel.hpp"

namespace ugv {

namespace {

namespace fs = std::filesystem;

double map_stride(const MapOptions& maps, int image_w) {
    if (maps.stride > 0) return maps.stride;
    return static_cast<double>(image_w) / maps.map_w;
}

void write_maps_for(const Annotation& ann, const MapOptions& maps, const fs::path& dir,
                    EncodeStats* stats) {
    const double stride = map_stride(maps, ann.image_w);
    const GroundTruthMaps gt = encode_ground_truth(ann, maps.map_h, maps.map_w, stride,
                                                   maps.radius, maps.paf_width, stats);
    tensor_write_file(gt.heatmap, (dir / (ann.image_id + ".heat.ugvt")).string());
    tensor_write_file(gt.paf, (dir / (ann.image_id + ".paf.ugvt")).string());
}

void draw_line(ImageBuffer& img, double x0, double y0, double x1, double y1,
               float r, float g, float b) {
    const int steps = static_cast<int>(std::ceil(std::max(std::abs(x1 - x0), std::abs(y1 - y0)))) + 1;
    for (int s = 0; s <= steps; ++s) {
        const double t = static_cast<double>(s) / steps;
        const int x = static_cast<int>(std::lround(x0 + t * (x1 - x0)));
        const int y = static_cast<int>(std::lround(y0 + t * (y1 - y0)));
        for (int dy = 0; dy <= 1; ++dy)
            for (int dx = 0; dx <= 1; ++dx) {
                const int px = x + dx, py = y + dy;
                if (px < 0 || px >= img.width || py < 0 || py >= img.height) continue;
                img.at(py, px, 0) = r;
                img.at(py, px, 1) = g;
                img.at(py, px, 2) = b;
            }
    }
}

} // namespace

void cmd_synth(const SynthCmdOptions& opts) {
    fs::create_directories(opts.out_dir);
    const std::vector<SyntheticScene> scenes = generate_scenes(opts.params);

    std::vector<Annotation> anns;
    std::vector<TruePose> poses;
    anns.reserve(scenes.size());
    poses.reserve(scenes.size());
    for (const SyntheticScene& s : scenes) {
        anns.push_back(s.annotation);
        poses.push_back({s.image_id, s.pose});
    }
    write_annotations(anns, (fs::path(opts.out_dir) / "annotations.jsonl").string());
    write_true_poses(poses, (fs::path(opts.out_dir) / "poses_true.jsonl").string());
    write_camera_config({opts.params.cam, std::nullopt},
                        (fs::path(opts.out_dir) / "camera.json").string());

    if (opts.write_maps) {
        const fs::path maps_dir = fs::path(opts.out_dir) / "maps";
        fs::create_directories(maps_dir);
        std::vector<EncodeStats> stats(anns.size());
        parallel_for(anns.size(), [&](size_t i) {
            write_maps_for(anns[i], opts.maps, maps_dir, &stats[i]);
        });
        int skipped = 0;
        for (const EncodeStats& s : stats) skipped += s.skipped_keypoints;
        if (skipped > 0)
            std::cerr << "warning: " << skipped << " keypoints fell outside the maps\n";
    }
    std::cout << "wrote " << scenes.size() << " scenes to " << opts.out_dir << "\n";
}

void cmd_encode(const EncodeCmdOptions& opts) {
    const std::vector<Annotation> anns = read_annotations(opts.annotations);
    fs::create_directories(opts.out_dir);
    std::vector<EncodeStats> stats(anns.size());
    parallel_for(anns.size(), [&](size_t i) {
        write_maps_for(anns[i], opts.maps, opts.out_dir, &stats[i]);
    });
    int skipped_kp = 0, skipped_conn = 0;
    for (const EncodeStats& s : stats) {
        skipped_kp += s.skipped_keypoints;
        skipped_conn += s.skipped_connections;
    }
    if (skipped_kp > 0)
        std::cerr << "warning: " << skipped_kp << " keypoints fell outside the maps\n";
    if (skipped_conn > 0)
        std::cerr << "warning: " << skipped_conn << " zero-length connections skipped\n";
    std::cout << "encoded " << anns.size() << " annotations into " << opts.out_dir << "\n";
}

void cmd_infer(const InferCmdOptions& opts) {
    if (opts.images.empty()) throw ValidationError("infer: no input images");
    const LoadedModel model = load_parameters(opts.weights_manifest);
    fs::create_directories(opts.out_dir);

    // Images are processed by the pool; each index owns its output files.
    parallel_for(opts.images.size(), [&](size_t i) {
        const fs::path in(opts.images[i]);
        const std::string id = in.stem().string();
        const ImageBuffer img = image_load(in.string());
        const ImageBuffer resized =
            resize_bilinear(img, model.config.input_h, model.config.input_w);
        const ForwardResult fw =
            network_forward(image_to_chw(resized), model.store, model.config);
        tensor_write_file(fw.heatmap, (fs::path(opts.out_dir) / (id + ".heat.ugvt")).string());
        tensor_write_file(fw.paf, (fs::path(opts.out_dir) / (id + ".paf.ugvt")).string());
    });
    std::cout << "inferred " << opts.images.size() << " images into " << opts.out_dir << "\n";
}

void cmd_decode(const DecodeCmdOptions& opts) {
    std::vector<std::string> ids;
    for (const auto& entry : fs::directory_iterator(opts.maps_dir)) {
        const std::string name = entry.path().filename().string();
        const std::string suffix = ".heat.ugvt";
        if (name.size() > suffix.size() &&
            name.compare(name.size() - suffix.size(), suffix.size(), suffix) == 0)
            ids.push_back(name.substr(0, name.size() - suffix.size()));
    }
    std::sort(ids.begin(), ids.end());
    if (ids.empty()) throw ValidationError("decode: no *.heat.ugvt files in " + opts.maps_dir);

    std::map<std::string, std::pair<int, int>> sizes;
    if (opts.annotations) {
        for (const Annotation& a : read_annotations(*opts.annotations))
            sizes[a.image_id] = {a.image_w, a.image_h};
    }

    std::vector<std::vector<Detection>> results(ids.size());
    parallel_for(ids.size(), [&](size_t i) {
        const Tensor heat =
            tensor_read_file((fs::path(opts.maps_dir) / (ids[i] + ".heat.ugvt")).string());
        const Tensor paf =
            tensor_read_file((fs::path(opts.maps_dir) / (ids[i] + ".paf.ugvt")).string());
        int w = opts.image_w, h = opts.image_h;
        if (const auto it = sizes.find(ids[i]); it != sizes.end()) {
            w = it->second.first;
            h = it->second.second;
        }
        const double sx = static_cast<double>(w) / heat.width();
        const double sy = static_cast<double>(h) / heat.height();
        std::vector<Detection> dets = decode_maps(heat, paf, opts.detect, sx, sy, w, h);
        for (Detection& d : dets) d.image_id = ids[i];
        results[i] = std::move(dets);
    });

    // Single writer, input order.
    std::vector<Detection> all;
    for (auto& r : results)
        for (Detection& d : r) all.push_back(std::move(d));
    write_detections(all, opts.out_path);
    std::cout << "decoded " << ids.size() << " map pairs -> " << all.size() << " detections\n";
}

PoseCmdSummary cmd_pose(const PoseCmdOptions& opts) {
    const std::vector<Detection> dets = read_detections(opts.detections);
    const CameraConfig config = read_camera_config(opts.camera_config);
    const std::array<Vec3, 4> phi = robot_keypoints(opts.model);

    PoseCmdSummary summary;
    RigidPose cam_world; // identity when absent: camera-frame output
    if (config.cam_to_world) {
        cam_world = *config.cam_to_world;
    } else {
        summary.camera_frame_fallback = true;
    }

    std::vector<PoseRecord> records;
    for (const Detection& det : dets) {
        if (!det.complete) {
            ++summary.skipped_incomplete;
            continue;
        }
        std::array<Vec2, 4> pix;
        for (int k = 0; k < 4; ++k) pix[k] = Vec2(det.kps[k].x, det.kps[k].y);
        const P4PResult solved = solve_p4p_lm(phi, pix, config.cam);
        const WorldPose world = pose_to_world(solved.pose, cam_world);
        PoseRecord rec;
        rec.image_id = det.image_id;
        rec.t_w = world.pose.translation;
        rec.euler = world.euler;
        rec.frame = config.cam_to_world ? "world" : "camera";
        rec.reproj_err = solved.mean_reproj_px;
        rec.converged = solved.converged;
        records.push_back(std::move(rec));
    }
    write_poses(records, opts.out_path);
    summary.written = static_cast<int>(records.size());
    if (summary.skipped_incomplete > 0)
        std::cerr << "warning: skipped " << summary.skipped_incomplete
                  << " incomplete detections\n";
    if (summary.camera_frame_fallback)
        std::cerr << "warning: no cam_to_world calibration; poses are in the camera frame\n";
    std::cout << "wrote " << summary.written << " poses to " << opts.out_path << "\n";
    return summary;
}

RigidPose cmd_calibrate(const CalibrateCmdOptions& opts) {
    const std::vector<Annotation> anns = read_annotations(opts.reference_annotations);
    const Annotation* ref = nullptr;
    for (const Annotation& a : anns) {
        bool complete = true;
        for (const auto& kp : a.kps) complete = complete && kp.visible;
        if (complete) {
            ref = &a;
            break;
        }
    }
    if (!ref) throw CalibrationError("calibrate: no complete annotation found");

    CameraConfig config = read_camera_config(opts.camera_config);
    std::array<Vec2, 4> pix;
    for (int k = 0; k < 4; ++k) pix[k] = Vec2(ref->kps[k].x, ref->kps[k].y);

    P4PResult solved;
    try {
        solved = solve_p4p_lm(robot_keypoints(opts.model), pix, config.cam);
    } catch (const Error& e) {
        throw CalibrationError(std::string("calibrate: solver failed: ") + e.what());
    }
    if (!solved.converged)
        throw CalibrationError("calibrate: solver did not converge on the reference annotation");

    config.cam_to_world = camera_extrinsics_from_reference(solved.pose);

    // Keep the previous config around before overwriting.
    if (fs::exists(opts.camera_config))
        fs::copy_file(opts.camera_config, opts.camera_config + ".bak",
                      fs::copy_options::overwrite_existing);
    write_camera_config(config, opts.camera_config);
    std::cout << "calibrated camera-to-world from " << ref->image_id << " (reproj "
              << solved.mean_reproj_px << " px)\n";
    return *config.cam_to_world;
}

EvalReport cmd_eval(const EvalCmdOptions& opts) {
    const std::vector<Detection> all_dets = read_detections(opts.detections);
    const std::vector<Annotation> anns = read_annotations(opts.annotations);

    // Group per image id; every annotation line is one ground-truth instance.
    std::map<std::string, std::vector<Detection>> dets_by_image;
    for (const Detection& d : all_dets) dets_by_image[d.image_id].push_back(d);
    std::map<std::string, std::vector<Annotation>> gts_by_image;
    for (const Annotation& a : anns) gts_by_image[a.image_id].push_back(a);

    std::optional<CameraConfig> camera;
    if (opts.camera_config) camera = read_camera_config(*opts.camera_config);

    EvalReport total;
    std::array<double, 4> dist_sums = {0, 0, 0, 0};
    int dist_images = 0;
    double iou_sum = 0;
    double reproj_sum = 0;
    int reproj_count = 0;

    for (const auto& [id, gts] : gts_by_image) {
        const auto it = dets_by_image.find(id);
        static const std::vector<Detection> kEmpty;
        const std::vector<Detection>& dets = it == dets_by_image.end() ? kEmpty : it->second;
        const int w = gts[0].image_w, h = gts[0].image_h;
        const MatchResult m = match_and_count(dets, gts, opts.iou_threshold, h, w);
        total.tp += m.tp;
        total.fp += m.fp;
        total.fn += m.fn;
        iou_sum += m.mean_matched_iou * m.tp;
        const DistanceReport dist = keypoint_distance(dets, gts, m);
        if (dist.defined) {
            for (int k = 0; k < 4; ++k) dist_sums[k] += dist.per_channel[k] * dist.matched;
            dist_images += dist.matched;
        }
        if (camera) {
            const PoseReprojReport pr =
                pose_reproj_eval(dets, gts, m, opts.model, camera->cam);
            if (pr.defined) {
                reproj_sum += pr.mean_px * pr.evaluated;
                reproj_count += pr.evaluated;
            }
        }
    }
    // Detections for images with no annotation line at all are false positives.
    for (const auto& [id, dets] : dets_by_image)
        if (!gts_by_image.count(id)) total.fp += static_cast<int>(dets.size());

    total.precision = (total.tp + total.fp) > 0
                          ? static_cast<double>(total.tp) / (total.tp + total.fp) : 0.0;
    total.recall = (total.tp + total.fn) > 0
                       ? static_cast<double>(total.tp) / (total.tp + total.fn) : 0.0;
    total.mean_iou = total.tp > 0 ? iou_sum / total.tp : 0.0;
    if (dist_images > 0) {
        total.dist_defined = true;
        double s = 0;
        for (int k = 0; k < 4; ++k) {
            total.per_channel_dist[k] = dist_sums[k] / dist_images;
            s += total.per_channel_dist[k];
        }
        total.mean_dist = s / 4.0;
    }
    if (reproj_count > 0) total.pose_reproj_err = reproj_sum / reproj_count;

    // Aligned-column table; Params/FLOPs come from the network config when
    // one was given.
    std::string params_col = "-", flops_col = "-";
    if (opts.net) {
        const ModelStats stats = model_stats(*opts.net);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f", stats.param_count / 1e6);
        params_col = buf;
        std::snprintf(buf, sizeof(buf), "%.2f", stats.flop_count / 1e9);
        flops_col = buf;
    }
    std::printf("%-12s %-10s %-12s %-10s %-8s %-12s\n", "Params (M)", "FLOPs (G)",
                "Precision", "Recall", "IoU", "Dist (px)");
    std::printf("%-12s %-10s %-12.4f %-10.4f %-8.4f ", params_col.c_str(), flops_col.c_str(),
                total.precision, total.recall, total.mean_iou);
    if (total.dist_defined)
        std::printf("%-12.3f\n", total.mean_dist);
    else
        std::printf("%-12s\n", "-");
    if (total.pose_reproj_err)
        std::printf("pose reprojection error: %.3f px\n", *total.pose_reproj_err);

    if (opts.json_out) {
        nlohmann::json j = {{"precision", total.precision},
                            {"recall", total.recall},
                            {"mean_iou", total.mean_iou},
                            {"tp", total.tp},
                            {"fp", total.fp},
                            {"fn", total.fn}};
        if (total.dist_defined) {
            j["per_channel_dist"] = total.per_channel_dist;
            j["mean_dist"] = total.mean_dist;
        }
        if (total.pose_reproj_err) j["pose_reproj_err"] = *total.pose_reproj_err;
        std::ofstream f(*opts.json_out);
        if (!f) throw IoError("cannot write report: " + *opts.json_out);
        f << j.dump(2) << "\n";
    }
    return total;
}

void cmd_stats(const NetworkConfig& cfg) {
    const ModelStats stats = model_stats(cfg);
    std::printf("%-8s %-12s %-12s\n", "variant", "Params (M)", "FLOPs (G)");
    std::printf("%-8s %-12.3f %-12.3f\n", variant_name(cfg.variant), stats.param_count / 1e6,
                stats.flop_count / 1e9);
    std::printf("(params: %zu, flops: %zu at %dx%d)\n", stats.param_count, stats.flop_count,
                cfg.input_h, cfg.input_w);
}

void cmd_init_weights(const InitWeightsCmdOptions& opts) {
    const ParameterStore store = init_parameters(opts.cfg, opts.seed);
    save_parameters(store, opts.cfg, opts.out_dir);
    std::cout << "wrote " << store.entries.size() << " tensors + manifest.json to "
              << opts.out_dir << "\n";
}

void cmd_overlay(const OverlayCmdOptions& opts) {
    ImageBuffer img = image_load(opts.image);
    const std::vector<Detection> dets = read_detections(opts.detections);

    std::optional<CameraConfig> camera;
    if (opts.camera_config) camera = read_camera_config(*opts.camera_config);

    // Edge colors 1->2 red, 2->3 green, 3->4 blue, 4->1 yellow.
    const float edge_colors[4][3] = {
        {1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {1, 1, 0}};
    for (const Detection& det : dets) {
        for (int c = 0; c < 4; ++c) {
            const auto& a = det.kps[kConnections[c].first];
            const auto& b = det.kps[kConnections[c].second];
            if (!a.present || !b.present) continue;
            draw_line(img, a.x, a.y, b.x, b.y, edge_colors[c][0], edge_colors[c][1],
                      edge_colors[c][2]);
        }
        if (camera && det.complete) {
            std::array<Vec2, 4> pix;
            for (int k = 0; k < 4; ++k) pix[k] = Vec2(det.kps[k].x, det.kps[k].y);
            try {
                const P4PResult solved = solve_p4p_lm(robot_keypoints(opts.model), pix,
                                                      camera->cam);
                const Vec2 origin = project(solved.pose, camera->cam, Vec3::Zero());
                const double axis_len = 0.3; // m
                const Vec3 axes[3] = {Vec3(axis_len, 0, 0), Vec3(0, axis_len, 0),
                                      Vec3(0, 0, axis_len)};
                const float axis_colors[3][3] = {{1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
                for (int a = 0; a < 3; ++a) {
                    const Vec2 tip = project(solved.pose, camera->cam, axes[a]);
                    draw_line(img, origin.x(), origin.y(), tip.x(), tip.y(),
                              axis_colors[a][0], axis_colors[a][1], axis_colors[a][2]);
                }
            } catch (const Error&) {
                std::cerr << "warning: pose solve failed for overlay axes ("
                          << det.image_id << ")\n";
            }
        }
    }
    image_save_png(img, opts.out_path);
    std::cout << "wrote " << opts.out_path << "\n";
}

void cmd_bench(const BenchCmdOptions& opts) {
    const LoadedModel model = load_parameters(opts.weights_manifest);
    Tensor input({3, static_cast<uint32_t>(model.config.input_h),
                  static_cast<uint32_t>(model.config.input_w)});
    for (size_t i = 0; i < input.data.size(); ++i)
        input.data[i] = static_cast<float>(i % 255) / 255.0f;

    network_forward(input, model.store, model.config); // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < opts.runs; ++i) network_forward(input, model.store, model.config);
    const auto t1 = std::chrono::steady_clock::now();
    const double ms =
        std::chrono::duration<double, std::milli>(t1 - t0).count() / opts.runs;
    std::printf("%s forward: %.1f ms/frame (%.2f FPS) over %d runs\n",
                variant_name(model.config.variant), ms, 1000.0 / ms, opts.runs);
}

} // namespace ugv
