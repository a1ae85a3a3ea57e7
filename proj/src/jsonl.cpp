#include "ugv/jsonl.hpp"

#include <fstream>

#include <json.hpp>

#include "ugv/errors.hpp"

namespace ugv {

namespace {

using nlohmann::json;

std::vector<json> read_lines(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open: " + path);
    std::vector<json> out;
    std::string line;
    size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            out.push_back(json::parse(line));
        } catch (const json::exception& e) {
            throw FormatError(path + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_lines(const std::vector<json>& lines, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for write: " + path);
    for (const json& j : lines) f << j.dump() << "\n";
    if (!f) throw IoError("write failed: " + path);
}

json pose_to_json(const RigidPose& p) {
    std::vector<double> r(9), t(3);
    for (int i = 0; i < 3; ++i) {
        t[i] = p.translation(i);
        for (int j = 0; j < 3; ++j) r[3 * i + j] = p.rotation(i, j);
    }
    return json{{"r", r}, {"t", t}};
}

RigidPose pose_from_json(const json& j) {
    const auto r = j.at("r").get<std::vector<double>>();
    const auto t = j.at("t").get<std::vector<double>>();
    if (r.size() != 9 || t.size() != 3) throw FormatError("pose block needs 9 + 3 floats");
    RigidPose p;
    for (int i = 0; i < 3; ++i) {
        p.translation(i) = t[i];
        for (int jj = 0; jj < 3; ++jj) p.rotation(i, jj) = r[3 * i + jj];
    }
    return p;
}

} // namespace

std::vector<Annotation> read_annotations(const std::string& path) {
    std::vector<Annotation> out;
    for (const json& j : read_lines(path)) {
        Annotation ann;
        ann.image_id = j.at("image_id").get<std::string>();
        ann.image_w = j.at("w").get<int>();
        ann.image_h = j.at("h").get<int>();
        const json& kps = j.at("kps");
        if (!kps.is_array() || kps.size() != 4)
            throw FormatError("annotation needs exactly 4 keypoints: " + ann.image_id);
        for (int k = 0; k < 4; ++k) {
            ann.kps[k].x = kps[k][0].get<double>();
            ann.kps[k].y = kps[k][1].get<double>();
            ann.kps[k].visible = kps[k][2].get<int>() != 0;
        }
        out.push_back(std::move(ann));
    }
    return out;
}

void write_annotations(const std::vector<Annotation>& anns, const std::string& path) {
    std::vector<json> lines;
    lines.reserve(anns.size());
    for (const Annotation& ann : anns) {
        json kps = json::array();
        for (const auto& kp : ann.kps) kps.push_back({kp.x, kp.y, kp.visible ? 1 : 0});
        lines.push_back({{"image_id", ann.image_id},
                         {"w", ann.image_w},
                         {"h", ann.image_h},
                         {"kps", kps}});
    }
    write_lines(lines, path);
}

std::vector<Detection> read_detections(const std::string& path) {
    std::vector<Detection> out;
    for (const json& j : read_lines(path)) {
        Detection det;
        det.image_id = j.at("image_id").get<std::string>();
        det.complete = j.at("complete").get<bool>();
        det.total_score = j.at("score").get<double>();
        const json& kps = j.at("kps");
        for (int k = 0; k < 4; ++k) {
            if (kps[k].is_null()) continue;
            det.kps[k].present = true;
            det.kps[k].x = kps[k][0].get<double>();
            det.kps[k].y = kps[k][1].get<double>();
            det.kps[k].score = kps[k][2].get<float>();
        }
        out.push_back(std::move(det));
    }
    return out;
}

void write_detections(const std::vector<Detection>& dets, const std::string& path) {
    std::vector<json> lines;
    lines.reserve(dets.size());
    for (const Detection& det : dets) {
        json kps = json::array();
        for (const auto& kp : det.kps) {
            if (kp.present)
                kps.push_back({kp.x, kp.y, kp.score});
            else
                kps.push_back(nullptr);
        }
        lines.push_back({{"image_id", det.image_id},
                         {"complete", det.complete},
                         {"kps", kps},
                         {"score", det.total_score}});
    }
    write_lines(lines, path);
}

std::vector<PoseRecord> read_poses(const std::string& path) {
    std::vector<PoseRecord> out;
    for (const json& j : read_lines(path)) {
        PoseRecord rec;
        rec.image_id = j.at("image_id").get<std::string>();
        const auto t = j.at("t_w").get<std::vector<double>>();
        if (t.size() != 3) throw FormatError("pose record t_w needs 3 floats");
        rec.t_w = Vec3(t[0], t[1], t[2]);
        const auto theta = j.at("theta").get<std::vector<double>>();
        if (theta.size() != 3) throw FormatError("pose record theta needs 3 floats");
        rec.euler = {theta[0], theta[1], theta[2]};
        rec.frame = j.value("frame", std::string("world"));
        rec.reproj_err = j.value("reproj_err", 0.0);
        rec.converged = j.value("converged", true);
        out.push_back(std::move(rec));
    }
    return out;
}

void write_poses(const std::vector<PoseRecord>& poses, const std::string& path) {
    std::vector<json> lines;
    lines.reserve(poses.size());
    for (const PoseRecord& rec : poses) {
        lines.push_back({{"image_id", rec.image_id},
                         {"t_w", {rec.t_w.x(), rec.t_w.y(), rec.t_w.z()}},
                         {"theta", {rec.euler.theta_z, rec.euler.theta_x, rec.euler.theta_y}},
                         {"frame", rec.frame},
                         {"reproj_err", rec.reproj_err},
                         {"converged", rec.converged}});
    }
    write_lines(lines, path);
}

std::vector<TruePose> read_true_poses(const std::string& path) {
    std::vector<TruePose> out;
    for (const json& j : read_lines(path)) {
        TruePose tp;
        tp.image_id = j.at("image_id").get<std::string>();
        tp.pose = pose_from_json(j);
        out.push_back(std::move(tp));
    }
    return out;
}

void write_true_poses(const std::vector<TruePose>& poses, const std::string& path) {
    std::vector<json> lines;
    lines.reserve(poses.size());
    for (const TruePose& tp : poses) {
        json j = pose_to_json(tp.pose);
        j["image_id"] = tp.image_id;
        lines.push_back(std::move(j));
    }
    write_lines(lines, path);
}

CameraConfig read_camera_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open camera config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw FormatError("camera config parse error: " + std::string(e.what()));
    }
    CameraConfig config;
    config.cam.fx = j.at("fx").get<double>();
    config.cam.fy = j.at("fy").get<double>();
    config.cam.cx = j.at("cx").get<double>();
    config.cam.cy = j.at("cy").get<double>();
    if (config.cam.fx <= 0 || config.cam.fy <= 0)
        throw ValidationError("camera config: focal lengths must be positive");
    if (j.contains("dist")) {
        const auto d = j.at("dist").get<std::vector<double>>();
        if (d.size() != 4) throw FormatError("camera config: dist needs [k1,k2,p1,p2]");
        config.cam.k1 = d[0];
        config.cam.k2 = d[1];
        config.cam.p1 = d[2];
        config.cam.p2 = d[3];
    }
    if (j.contains("cam_to_world")) config.cam_to_world = pose_from_json(j.at("cam_to_world"));
    return config;
}

void write_camera_config(const CameraConfig& config, const std::string& path) {
    json j = {{"fx", config.cam.fx},
              {"fy", config.cam.fy},
              {"cx", config.cam.cx},
              {"cy", config.cam.cy},
              {"dist", {config.cam.k1, config.cam.k2, config.cam.p1, config.cam.p2}}};
    if (config.cam_to_world) j["cam_to_world"] = pose_to_json(*config.cam_to_world);
    std::ofstream f(path);
    if (!f) throw IoError("cannot open for write: " + path);
    f << j.dump(2) << "\n";
    if (!f) throw IoError("write failed: " + path);
}

} // namespace ugv
