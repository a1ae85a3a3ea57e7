#include "ugv/decoding.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numeric>
#include <tuple>

#include "ugv/encoding.hpp"
#include "ugv/errors.hpp"

namespace ugv {

namespace {

// 1D quadratic fit around a single-pixel peak; 0 when the neighborhood has no
// curvature.
double quadratic_offset(float lo, float center, float hi) {
    const double denom = static_cast<double>(lo) - 2.0 * center + hi;
    if (std::abs(denom) < 1e-12) return 0.0;
    const double off = 0.5 * (static_cast<double>(lo) - hi) / denom;
    return std::clamp(off, -0.5, 0.5);
}

float sample_bilinear(const Tensor& t, int channel, double x, double y) {
    // Continuous map coordinates; pixel (i,j) center at (j+0.5, i+0.5).
    const int w = t.width(), h = t.height();
    double fx = x - 0.5, fy = y - 0.5;
    fx = std::clamp(fx, 0.0, static_cast<double>(w - 1));
    fy = std::clamp(fy, 0.0, static_cast<double>(h - 1));
    const int x0 = static_cast<int>(fx);
    const int y0 = static_cast<int>(fy);
    const int x1 = std::min(x0 + 1, w - 1);
    const int y1 = std::min(y0 + 1, h - 1);
    const float wx = static_cast<float>(fx - x0);
    const float wy = static_cast<float>(fy - y0);
    const float top = t.at(channel, y0, x0) * (1.0f - wx) + t.at(channel, y0, x1) * wx;
    const float bot = t.at(channel, y1, x0) * (1.0f - wx) + t.at(channel, y1, x1) * wx;
    return top * (1.0f - wy) + bot * wy;
}

// Segments (p1,p2) and (p3,p4) properly intersect.
bool segments_cross(double x1, double y1, double x2, double y2,
                    double x3, double y3, double x4, double y4) {
    auto orient = [](double ax, double ay, double bx, double by, double cx, double cy) {
        const double v = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax);
        return v > 0 ? 1 : (v < 0 ? -1 : 0);
    };
    const int o1 = orient(x1, y1, x2, y2, x3, y3);
    const int o2 = orient(x1, y1, x2, y2, x4, y4);
    const int o3 = orient(x3, y3, x4, y4, x1, y1);
    const int o4 = orient(x3, y3, x4, y4, x2, y2);
    return o1 != o2 && o3 != o4 && o1 != 0 && o2 != 0 && o3 != 0 && o4 != 0;
}

bool quad_self_intersects(const std::array<Detection::Keypoint, 4>& k) {
    // Opposite edges of the 1->2->3->4 cycle crossing makes the quad
    // non-simple.
    return segments_cross(k[0].x, k[0].y, k[1].x, k[1].y, k[2].x, k[2].y, k[3].x, k[3].y) ||
           segments_cross(k[1].x, k[1].y, k[2].x, k[2].y, k[3].x, k[3].y, k[0].x, k[0].y);
}

} // namespace

std::vector<Candidate> nms_peaks(const Tensor& heatmap, int window, float peak_threshold) {
    if (heatmap.ndim() != 3 || heatmap.channels() < 4)
        throw ShapeError("nms_peaks expects a (5,mh,mw) heatmap");
    if (window < 3 || window % 2 == 0) throw ValidationError("nms window must be odd and >= 3");

    const int h = heatmap.height(), w = heatmap.width();
    const int r = window / 2;
    std::vector<Candidate> out;

    std::vector<int> comp(static_cast<size_t>(h) * w);
    std::vector<int> stack;
    for (int c = 0; c < 4; ++c) {
        const float* plane = heatmap.channel(c);
        auto val = [&](int y, int x) { return plane[static_cast<size_t>(y) * w + x]; };

        // Locally-maximal pixels: >= threshold and no strictly greater value
        // inside the window.
        std::vector<char> locmax(static_cast<size_t>(h) * w, 0);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const float v = val(y, x);
                if (v < peak_threshold) continue;
                bool ok = true;
                for (int dy = -r; dy <= r && ok; ++dy) {
                    const int yy = y + dy;
                    if (yy < 0 || yy >= h) continue;
                    for (int dx = -r; dx <= r; ++dx) {
                        const int xx = x + dx;
                        if (xx < 0 || xx >= w) continue;
                        if (val(yy, xx) > v) {
                            ok = false;
                            break;
                        }
                    }
                }
                if (ok) locmax[static_cast<size_t>(y) * w + x] = 1;
            }
        }

        // Group equal-valued locally-maximal pixels into 8-connected plateaus;
        // a plateau is a peak only if some neighbor is strictly lower, so
        // uniform maps produce nothing.
        std::fill(comp.begin(), comp.end(), -1);
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                const size_t idx = static_cast<size_t>(y) * w + x;
                if (!locmax[idx] || comp[idx] != -1) continue;
                const float v = val(y, x);
                stack.assign(1, static_cast<int>(idx));
                comp[idx] = 1;
                double sum_x = 0, sum_y = 0;
                int count = 0;
                bool has_lower = false;
                int rep_x = x, rep_y = y;
                while (!stack.empty()) {
                    const int cur = stack.back();
                    stack.pop_back();
                    const int cy = cur / w, cx = cur % w;
                    sum_x += cx;
                    sum_y += cy;
                    ++count;
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            if (dy == 0 && dx == 0) continue;
                            const int ny = cy + dy, nx = cx + dx;
                            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
                            const size_t nidx = static_cast<size_t>(ny) * w + nx;
                            const float nv = val(ny, nx);
                            if (nv < v) has_lower = true;
                            if (locmax[nidx] && nv == v && comp[nidx] == -1) {
                                comp[nidx] = 1;
                                stack.push_back(static_cast<int>(nidx));
                            }
                        }
                    }
                }
                if (!has_lower) continue;

                Candidate cand;
                cand.channel = c;
                cand.score = v;
                if (count == 1) {
                    const float l = rep_x > 0 ? val(rep_y, rep_x - 1) : v;
                    const float rr = rep_x < w - 1 ? val(rep_y, rep_x + 1) : v;
                    const float u = rep_y > 0 ? val(rep_y - 1, rep_x) : v;
                    const float d = rep_y < h - 1 ? val(rep_y + 1, rep_x) : v;
                    cand.x = rep_x + quadratic_offset(l, v, rr);
                    cand.y = rep_y + quadratic_offset(u, v, d);
                } else {
                    cand.x = sum_x / count;
                    cand.y = sum_y / count;
                }
                out.push_back(cand);
            }
        }
    }
    return out;
}

ConnectionScore score_connection(const Candidate& a, const Candidate& b, const Tensor& paf,
                                 int channel_pair, int n_samples, double alignment_threshold) {
    if (paf.ndim() != 3 || paf.channels() < 2 * channel_pair + 2)
        throw ShapeError("paf tensor too small for requested channel pair");
    const double dx = b.x - a.x, dy = b.y - a.y;
    const double len = std::hypot(dx, dy);
    if (len < 1e-9) throw DegenerateConnectionError("coincident candidates");
    const double ux = dx / len, uy = dy / len;

    double sum = 0;
    int valid = 0;
    for (int s = 0; s < n_samples; ++s) {
        const double t = n_samples == 1 ? 0.5 : static_cast<double>(s) / (n_samples - 1);
        // Candidate coordinates are pixel indices; sampling happens at the
        // corresponding pixel centers.
        const double px = a.x + t * dx + 0.5;
        const double py = a.y + t * dy + 0.5;
        const double vx = sample_bilinear(paf, 2 * channel_pair, px, py);
        const double vy = sample_bilinear(paf, 2 * channel_pair + 1, px, py);
        const double dot = vx * ux + vy * uy;
        sum += dot;
        if (dot > alignment_threshold) ++valid;
    }
    return {sum / n_samples, static_cast<double>(valid) / n_samples};
}

std::vector<Detection> assemble(const std::vector<Candidate>& candidates, const Tensor& paf,
                                const AssembleParams& params) {
    // Candidate ids bucketed per channel.
    std::array<std::vector<int>, 4> by_channel;
    for (int i = 0; i < static_cast<int>(candidates.size()); ++i)
        by_channel[candidates[i].channel].push_back(i);

    struct Edge {
        int conn;
        int src, dst; // candidate ids
        double score;
    };
    std::vector<Edge> accepted;

    for (int conn = 0; conn < 4; ++conn) {
        const auto [src_ch, dst_ch] = kConnections[conn];
        std::vector<Edge> scored;
        for (int a : by_channel[src_ch]) {
            for (int b : by_channel[dst_ch]) {
                ConnectionScore cs;
                try {
                    cs = score_connection(candidates[a], candidates[b], paf, conn,
                                          params.n_samples, params.alignment_threshold);
                } catch (const DegenerateConnectionError&) {
                    continue;
                }
                if (cs.paf_score >= params.min_paf_score &&
                    cs.valid_fraction >= params.min_valid_fraction)
                    scored.push_back({conn, a, b, cs.paf_score});
            }
        }
        std::sort(scored.begin(), scored.end(), [](const Edge& x, const Edge& y) {
            if (x.score != y.score) return x.score > y.score;
            return std::tie(x.src, x.dst) < std::tie(y.src, y.dst);
        });
        std::vector<char> src_used(candidates.size(), 0), dst_used(candidates.size(), 0);
        for (const Edge& e : scored) {
            if (src_used[e.src] || dst_used[e.dst]) continue;
            src_used[e.src] = dst_used[e.dst] = 1;
            accepted.push_back(e);
        }
    }

    // Chain accepted edges: candidates sharing an edge belong to one
    // detection. Candidates with no accepted incident edge never enter a
    // detection (false-positive rejection).
    std::vector<int> parent(candidates.size());
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int v) {
        while (parent[v] != v) {
            parent[v] = parent[parent[v]];
            v = parent[v];
        }
        return v;
    };
    for (const Edge& e : accepted) parent[find(e.src)] = find(e.dst);

    std::map<int, Detection> groups;
    std::map<int, double> edge_scores;
    for (const Edge& e : accepted) {
        const int root = find(e.src);
        Detection& det = groups[root];
        for (int id : {e.src, e.dst}) {
            const Candidate& c = candidates[id];
            auto& slot = det.kps[c.channel];
            if (!slot.present) {
                slot.present = true;
                slot.x = (c.x + 0.5) * params.scale;
                slot.y = (c.y + 0.5) * params.scale;
                slot.score = c.score;
            }
        }
        edge_scores[root] += e.score;
    }

    std::vector<Detection> out;
    for (auto& [root, det] : groups) {
        int present = 0;
        double kp_score = 0;
        for (const auto& kp : det.kps)
            if (kp.present) {
                ++present;
                kp_score += kp.score;
            }
        det.complete = present == 4;
        det.total_score = kp_score + edge_scores[root];
        if (det.complete) det.degenerate = quad_self_intersects(det.kps);
        out.push_back(std::move(det));
    }
    std::sort(out.begin(), out.end(), [](const Detection& a, const Detection& b) {
        return a.total_score > b.total_score;
    });
    if (params.single && out.size() > 1) out.resize(1);
    return out;
}

std::vector<Detection> decode_maps(const Tensor& heatmap, const Tensor& paf,
                                   const DetectParams& dp, double scale_x, double scale_y,
                                   int bound_w, int bound_h) {
    const std::vector<Candidate> cands = nms_peaks(heatmap, dp.window, dp.peak_threshold);
    AssembleParams ap = dp.assemble;
    ap.scale = 1.0; // corner-origin map coordinates; per-axis scaling below
    ap.single = dp.single || dp.assemble.single;
    std::vector<Detection> dets = assemble(cands, paf, ap);
    for (Detection& d : dets)
        for (auto& kp : d.kps)
            if (kp.present) {
                kp.x *= scale_x;
                kp.y *= scale_y;
                if (bound_w > 0 && bound_h > 0) {
                    kp.x = std::clamp(kp.x, 0.0, bound_w - 1e-6);
                    kp.y = std::clamp(kp.y, 0.0, bound_h - 1e-6);
                }
            }
    return dets;
}

std::vector<Detection> detect(const ImageBuffer& img, const ParameterStore& params,
                              const NetworkConfig& cfg, const DetectParams& dp) {
    const ImageBuffer resized = resize_bilinear(img, cfg.input_h, cfg.input_w);
    const ForwardResult fw = network_forward(image_to_chw(resized), params, cfg);

    // map px -> network-input px -> raw px, all under the half-pixel-center
    // convention (pure scaling of corner-origin coordinates).
    const double sx = cfg.output_stride * static_cast<double>(img.width) / cfg.input_w;
    const double sy = cfg.output_stride * static_cast<double>(img.height) / cfg.input_h;
    return decode_maps(fw.heatmap, fw.paf, dp, sx, sy, img.width, img.height);
}

} // namespace ugv
