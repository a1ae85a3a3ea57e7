#include "ugv/synth.hpp"

#include <cmath>

#include "ugv/errors.hpp"
#include "ugv/rng.hpp"

namespace ugv {

namespace {

constexpr double kPi = 3.14159265358979323846;

// Robot axes (X starboard, Y forward, Z zenith) seen from a camera that
// looks horizontally along the vehicle's forward direction: camera X = robot
// X, camera Y (down) = -robot Z, camera Z (forward) = robot Y.
Mat3 upright_alignment() {
    Mat3 a;
    a << 1, 0, 0,
         0, 0, -1,
         0, 1, 0;
    return a;
}

} // namespace

double sigma_for_mean_displacement(double mean_displacement) {
    return mean_displacement / std::sqrt(kPi / 2.0);
}

std::vector<SyntheticScene> generate_scenes(const SynthParams& params) {
    if (params.n < 1) throw ValidationError("synth: n must be >= 1");
    if (params.cam.fx <= 0 || params.cam.fy <= 0)
        throw ValidationError("synth: focal lengths must be positive");

    Rng rng(params.seed);
    const std::array<Vec3, 4> phi = robot_keypoints(params.model);
    const Mat3 tilt = rot_x(params.cam_pitch_deg * kPi / 180.0) * upright_alignment();
    const double max_tilt = params.max_tilt_deg * kPi / 180.0;

    const double mx = params.margin * params.image_w;
    const double my = params.margin * params.image_h;

    std::vector<SyntheticScene> scenes;
    scenes.reserve(params.n);
    int rejections = 0;
    while (static_cast<int>(scenes.size()) < params.n) {
        if (rejections > params.max_rejections)
            throw FeasibilityError("synth: camera/model combination keeps the vehicle out of frame");

        const double yaw = rng.uniform(-kPi, kPi);
        const double pitch = rng.uniform(-max_tilt, max_tilt);
        const double roll = rng.uniform(-max_tilt, max_tilt);
        const double dist = rng.uniform(params.min_dist, params.max_dist);
        // Aim the vehicle center at a random pixel away from the borders.
        const double u = rng.uniform(mx * 2, params.image_w - mx * 2);
        const double v = rng.uniform(my * 2, params.image_h - my * 2);

        RigidPose pose;
        pose.rotation = tilt * rot_z(yaw) * rot_x(pitch) * rot_y(roll);
        const Vec3 dir =
            Vec3((u - params.cam.cx) / params.cam.fx, (v - params.cam.cy) / params.cam.fy, 1.0)
                .normalized();
        pose.translation = dist * dir;

        bool ok = true;
        std::array<Vec2, 4> pix;
        for (int k = 0; k < 4 && ok; ++k) {
            const Vec3 q = pose.apply(phi[k]);
            if (q.z() <= 1e-6) {
                ok = false;
                break;
            }
            pix[k] = project(pose, params.cam, phi[k]);
            if (pix[k].x() < mx || pix[k].x() >= params.image_w - mx || pix[k].y() < my ||
                pix[k].y() >= params.image_h - my)
                ok = false;
        }
        if (!ok) {
            ++rejections;
            continue;
        }

        SyntheticScene scene;
        scene.image_id = "synth_" + std::to_string(scenes.size());
        scene.pose = pose;
        scene.clean_pix = pix;
        scene.annotation.image_id = scene.image_id;
        scene.annotation.image_w = params.image_w;
        scene.annotation.image_h = params.image_h;
        for (int k = 0; k < 4; ++k) {
            double x = pix[k].x(), y = pix[k].y();
            if (params.noise_sigma > 0) {
                x += params.noise_sigma * rng.normal();
                y += params.noise_sigma * rng.normal();
            }
            scene.annotation.kps[k] = {x, y, true};
        }
        scenes.push_back(std::move(scene));
    }
    return scenes;
}

} // namespace ugv
