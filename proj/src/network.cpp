#include "ugv/network.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "ugv/errors.hpp"
#include "ugv/parallel.hpp"
#include "ugv/rng.hpp"

namespace ugv {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

int conv_out_size(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

// Dense or depthwise convolution, (C,H,W), pad = k/2. Output channels are
// computed independently so the per-channel accumulation order is fixed
// regardless of thread count.
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b, int stride, bool depthwise) {
    const int in_c = x.channels(), in_h = x.height(), in_w = x.width();
    const int out_c = static_cast<int>(w.dims[0]);
    const int k = static_cast<int>(w.dims[2]);
    const int pad = k / 2;
    const int out_h = conv_out_size(in_h, k, stride, pad);
    const int out_w = conv_out_size(in_w, k, stride, pad);
    if (depthwise) {
        if (w.dims[1] != 1 || out_c != in_c)
            throw ShapeError("depthwise conv weight mismatch at " + std::to_string(in_c) + " channels");
    } else if (static_cast<int>(w.dims[1]) != in_c) {
        throw ShapeError("conv expects in_c=" + std::to_string(w.dims[1]) +
                         ", got " + std::to_string(in_c));
    }
    if (static_cast<int>(b.numel()) != out_c) throw ShapeError("conv bias size mismatch");

    Tensor out({static_cast<uint32_t>(out_c), static_cast<uint32_t>(out_h),
                static_cast<uint32_t>(out_w)});

    parallel_for(static_cast<size_t>(out_c), [&](size_t ocs) {
        const int oc = static_cast<int>(ocs);
        float* out_plane = out.channel(oc);
        const float bias = b.data[oc];
        for (size_t i = 0, n = static_cast<size_t>(out_h) * out_w; i < n; ++i) out_plane[i] = bias;

        const int ic_begin = depthwise ? oc : 0;
        const int ic_end = depthwise ? oc + 1 : in_c;
        for (int ic = ic_begin; ic < ic_end; ++ic) {
            const float* in_plane = x.channel(ic);
            const float* w_base = w.data.data() +
                (static_cast<size_t>(oc) * w.dims[1] + (depthwise ? 0 : ic)) * k * k;
            for (int ky = 0; ky < k; ++ky) {
                for (int kx = 0; kx < k; ++kx) {
                    const float wv = w_base[ky * k + kx];
                    // Output column range with in-bounds input columns.
                    int ox_lo = 0;
                    while (ox_lo < out_w && ox_lo * stride + kx - pad < 0) ++ox_lo;
                    int ox_hi = out_w - 1;
                    while (ox_hi >= 0 && ox_hi * stride + kx - pad >= in_w) --ox_hi;
                    for (int oy = 0; oy < out_h; ++oy) {
                        const int iy = oy * stride + ky - pad;
                        if (iy < 0 || iy >= in_h) continue;
                        const float* in_row = in_plane + static_cast<size_t>(iy) * in_w;
                        float* out_row = out_plane + static_cast<size_t>(oy) * out_w;
                        const int off = kx - pad;
                        if (stride == 1) {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                out_row[ox] += wv * in_row[ox + off];
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox)
                                out_row[ox] += wv * in_row[ox * stride + off];
                        }
                    }
                }
            }
        }
    });
    return out;
}

void relu_inplace(Tensor& x) {
    for (float& v : x.data) v = v > 0.0f ? v : 0.0f;
}

Tensor maxpool2x2(const Tensor& x) {
    const int c = x.channels(), h = x.height() / 2, w = x.width() / 2;
    Tensor out({static_cast<uint32_t>(c), static_cast<uint32_t>(h), static_cast<uint32_t>(w)});
    for (int ch = 0; ch < c; ++ch)
        for (int y = 0; y < h; ++y)
            for (int xx = 0; xx < w; ++xx) {
                const float a = x.at(ch, 2 * y, 2 * xx);
                const float b = x.at(ch, 2 * y, 2 * xx + 1);
                const float cc = x.at(ch, 2 * y + 1, 2 * xx);
                const float d = x.at(ch, 2 * y + 1, 2 * xx + 1);
                out.at(ch, y, xx) = std::max(std::max(a, b), std::max(cc, d));
            }
    return out;
}

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
    int c = 0;
    const int h = parts[0]->height(), w = parts[0]->width();
    for (const Tensor* p : parts) {
        if (p->height() != h || p->width() != w)
            throw ShapeError("concat: spatial dims disagree");
        c += p->channels();
    }
    Tensor out({static_cast<uint32_t>(c), static_cast<uint32_t>(h), static_cast<uint32_t>(w)});
    size_t offset = 0;
    for (const Tensor* p : parts) {
        std::copy(p->data.begin(), p->data.end(), out.data.begin() + offset);
        offset += p->numel();
    }
    return out;
}

Tensor crop_spatial(const Tensor& x, int h, int w) {
    if (x.height() == h && x.width() == w) return x;
    if (x.height() < h || x.width() < w) throw ShapeError("crop target exceeds tensor");
    Tensor out({x.dims[0], static_cast<uint32_t>(h), static_cast<uint32_t>(w)});
    for (int c = 0; c < x.channels(); ++c)
        for (int y = 0; y < h; ++y) {
            const float* src = x.channel(c) + static_cast<size_t>(y) * x.width();
            float* dst = out.channel(c) + static_cast<size_t>(y) * w;
            std::copy(src, src + w, dst);
        }
    return out;
}

Tensor add_tensors(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b)) throw ShapeError("sum: shapes disagree");
    Tensor out = a;
    for (size_t i = 0; i < out.data.size(); ++i) out.data[i] += b.data[i];
    return out;
}

Tensor slice_channels(const Tensor& x, int from, int count) {
    Tensor out({static_cast<uint32_t>(count), x.dims[1], x.dims[2]});
    const size_t plane = static_cast<size_t>(x.dims[1]) * x.dims[2];
    std::copy(x.data.begin() + from * plane, x.data.begin() + (from + count) * plane,
              out.data.begin());
    return out;
}

// Executes the architecture walk either against a parameter store or as a
// shape-only trace. Both modes share the same code path, so the layer list
// can never drift from the forward pass.
struct Ctx {
    const NetworkConfig& cfg;
    const ParameterStore* store = nullptr;   // null when tracing
    std::vector<LayerDef>* trace = nullptr;  // non-null when tracing

    Tensor conv(const std::string& path, const Tensor& x, int out_c, int k, int stride,
                bool depthwise) {
        const int pad = k / 2;
        const int out_h = conv_out_size(x.height(), k, stride, pad);
        const int out_w = conv_out_size(x.width(), k, stride, pad);
        if (trace) {
            LayerDef def;
            def.path = path;
            def.out_c = out_c;
            def.in_c = x.channels();
            def.k = k;
            def.stride = stride;
            def.depthwise = depthwise;
            def.out_h = out_h;
            def.out_w = out_w;
            trace->push_back(def);
            return Tensor({static_cast<uint32_t>(out_c), static_cast<uint32_t>(out_h),
                           static_cast<uint32_t>(out_w)});
        }
        const Tensor& w = fetch(path + ".weight");
        const Tensor& b = fetch(path + ".bias");
        const std::vector<uint32_t> expect = {static_cast<uint32_t>(out_c),
                                              static_cast<uint32_t>(depthwise ? 1 : x.channels()),
                                              static_cast<uint32_t>(k), static_cast<uint32_t>(k)};
        if (w.dims != expect)
            throw ParameterError("layer " + path + ".weight has dims " + dims_str(w.dims) +
                                 ", expected " + dims_str(expect));
        if (b.dims != std::vector<uint32_t>{static_cast<uint32_t>(out_c)})
            throw ParameterError("layer " + path + ".bias has dims " + dims_str(b.dims) +
                                 ", expected [" + std::to_string(out_c) + "]");
        return conv2d(x, w, b, stride, depthwise);
    }

    const Tensor& fetch(const std::string& path) const {
        if (!store->has(path)) throw ParameterError("missing parameter: " + path);
        return store->entries.at(path);
    }

    static std::string dims_str(const std::vector<uint32_t>& d) {
        std::string s = "[";
        for (size_t i = 0; i < d.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(d[i]);
        }
        return s + "]";
    }
};

Tensor ctx_basic_block(Ctx& ctx, const Tensor& x, const std::string& prefix,
                       ShuffleBlockStyle style) {
    const int c = x.channels();
    if (c % 2 != 0) throw ShapeError("basic shuffle block needs an even channel count");
    const int half = c / 2;
    const Tensor keep = slice_channels(x, 0, half);
    Tensor y = slice_channels(x, half, half);
    y = ctx.conv(prefix + ".b2.conv1", y, half, 1, 1, false);
    if (style == ShuffleBlockStyle::vanilla) relu_inplace(y); // removed in the improved block
    y = ctx.conv(prefix + ".b2.dw", y, half, 3, 1, true);
    y = ctx.conv(prefix + ".b2.conv2", y, half, 1, 1, false);
    relu_inplace(y);
    Tensor out = concat_channels({&keep, &y});
    return channel_shuffle(out, 2);
}

Tensor ctx_down_block(Ctx& ctx, const Tensor& x, const std::string& prefix, int out_c,
                      ShuffleBlockStyle style) {
    if (out_c % 2 != 0) throw ShapeError("spatial_down block needs an even output channel count");
    const int half = out_c / 2;
    Tensor y1 = ctx.conv(prefix + ".b1.dw", x, x.channels(), 3, 2, true);
    y1 = ctx.conv(prefix + ".b1.conv", y1, half, 1, 1, false);
    relu_inplace(y1);
    Tensor y2 = ctx.conv(prefix + ".b2.conv1", x, half, 1, 1, false);
    if (style == ShuffleBlockStyle::vanilla) relu_inplace(y2);
    y2 = ctx.conv(prefix + ".b2.dw", y2, half, 3, 2, true);
    y2 = ctx.conv(prefix + ".b2.conv2", y2, half, 1, 1, false);
    relu_inplace(y2);
    Tensor out = concat_channels({&y1, &y2});
    return channel_shuffle(out, 2);
}

Tensor ctx_residual_adapter(Ctx& ctx, const Tensor& x, const std::string& prefix, int out_c) {
    const int mid = std::max(out_c / 2, 4);
    Tensor m = ctx.conv(prefix + ".reduce", x, mid, 1, 1, false);
    relu_inplace(m);
    m = ctx.conv(prefix + ".dw", m, mid, 3, 1, true);
    relu_inplace(m);
    m = ctx.conv(prefix + ".expand", m, out_c, 1, 1, false);
    const Tensor shortcut = x.channels() == out_c
                                ? x
                                : ctx.conv(prefix + ".proj", x, out_c, 1, 1, false);
    const Tensor adapter = ctx.conv(prefix + ".adapter", x, out_c, 1, 1, false);
    return add_tensors(add_tensors(m, shortcut), adapter);
}

// Converts a source-level output to a target level of the next stage.
// Down paths chain spatial_down blocks; up paths are a 1x1 conv feeding DUC,
// cropped to the target size when odd sizes round up.
Tensor ctx_fuse_convert(Ctx& ctx, const Tensor& x, int stage, int from, int to,
                        int target_h, int target_w) {
    const auto& w = ctx.cfg.level_widths;
    if (from == to) return x;
    const std::string base = "fuse" + std::to_string(stage) + ".to" + std::to_string(to + 1) +
                             ".from" + std::to_string(from + 1);
    if (from < to) {
        Tensor y = x;
        for (int s = 0; s < to - from; ++s)
            y = ctx_down_block(ctx, y, base + ".down" + std::to_string(s + 1), w[from + s + 1],
                               ShuffleBlockStyle::improved);
        return y;
    }
    const int d = 1 << (from - to);
    Tensor y = ctx.conv(base + ".up.conv", x, d * d * w[to], 1, 1, false);
    y = duc_upsample(y, d);
    return crop_spatial(y, target_h, target_w);
}

Tensor ctx_backbone(Ctx& ctx, const Tensor& img) {
    const NetworkConfig& cfg = ctx.cfg;
    if (img.ndim() != 3 || img.dims[0] != 3)
        throw ShapeError("network input must be (3,H,W)");
    if (img.height() < 16 || img.width() < 16)
        throw ShapeError("network input must be at least 16x16");

    // Stem: conv stride 2 + 2x2 max pool -> level-0 resolution.
    Tensor x = ctx.conv("stem.conv", img, cfg.level_widths[0], 3, 2, false);
    relu_inplace(x);
    x = maxpool2x2(x);

    std::vector<Tensor> prev = {std::move(x)};
    std::vector<Tensor> skips; // level-0 output of every stage

    for (int stage = 1; stage <= 4; ++stage) {
        const int n_cur = cfg.levels_in_stage(stage);
        std::vector<Tensor> cur;
        cur.reserve(n_cur);
        for (int j = 0; j < n_cur; ++j) {
            // Target spatial size: halve (rounding up) per level below the top.
            int th = prev[0].height(), tw = prev[0].width();
            for (int l = 0; l < j; ++l) {
                th = (th + 1) / 2;
                tw = (tw + 1) / 2;
            }
            Tensor fused;
            bool first = true;
            for (int jp = 0; jp < static_cast<int>(prev.size()); ++jp) {
                Tensor conv = ctx_fuse_convert(ctx, prev[jp], stage, jp, j, th, tw);
                if (first) {
                    fused = std::move(conv);
                    first = false;
                } else {
                    fused = add_tensors(fused, conv);
                }
            }
            if (stage > 1) relu_inplace(fused);

            for (int k = 0; k < cfg.stage_blocks[stage - 1]; ++k) {
                const std::string prefix = "stage" + std::to_string(stage) + ".sub" +
                                           std::to_string(j + 1) + ".block" + std::to_string(k + 1);
                fused = ctx_basic_block(ctx, fused, prefix, ShuffleBlockStyle::improved);
            }
            cur.push_back(std::move(fused));
        }
        skips.push_back(cur[0]);
        prev = std::move(cur);
    }

    std::vector<const Tensor*> parts;
    for (const Tensor& s : skips) parts.push_back(&s);
    return concat_channels(parts);
}

// Two-branch multi-stage refinement with per-stage intermediate outputs.
ForwardResult ctx_refinement(Ctx& ctx, Tensor features) {
    const NetworkConfig& cfg = ctx.cfg;
    ForwardResult result;
    result.features = std::move(features);
    const Tensor& f = result.features;
    Tensor prev_heat, prev_paf;
    for (int stage = 1; stage <= cfg.refine_stages; ++stage) {
        Tensor input = stage == 1 ? f : concat_channels({&f, &prev_heat, &prev_paf});
        const std::string sp = "refine.stage" + std::to_string(stage);
        auto run_branch = [&](const std::string& branch, int out_channels) {
            Tensor t = ctx_residual_adapter(ctx, input, sp + "." + branch + ".ra1",
                                            cfg.refine_width);
            t = ctx_residual_adapter(ctx, t, sp + "." + branch + ".ra2", cfg.refine_width);
            return ctx.conv(sp + "." + branch + ".head", t, out_channels, 1, 1, false);
        };
        Tensor heat = run_branch("heat", cfg.heat_channels);
        Tensor paf = run_branch("paf", cfg.paf_channels);
        result.stages.emplace_back(heat, paf);
        prev_heat = std::move(heat);
        prev_paf = std::move(paf);
    }
    result.heatmap = result.stages.back().first;
    result.paf = result.stages.back().second;
    return result;
}

ForwardResult ctx_forward(Ctx& ctx, const Tensor& img) {
    return ctx_refinement(ctx, ctx_backbone(ctx, img));
}

json config_to_json(const NetworkConfig& cfg) {
    return json{{"variant", variant_name(cfg.variant)},
                {"stage_blocks", cfg.stage_blocks},
                {"level_widths", cfg.level_widths},
                {"refine_stages", cfg.refine_stages},
                {"refine_width", cfg.refine_width},
                {"duc_factor", cfg.duc_factor},
                {"input_h", cfg.input_h},
                {"input_w", cfg.input_w},
                {"heat_channels", cfg.heat_channels},
                {"paf_channels", cfg.paf_channels},
                {"output_stride", cfg.output_stride}};
}

NetworkConfig config_from_json(const json& j) {
    NetworkConfig cfg;
    cfg.variant = variant_from_name(j.at("variant").get<std::string>());
    cfg.stage_blocks = j.at("stage_blocks").get<std::vector<int>>();
    cfg.level_widths = j.at("level_widths").get<std::vector<int>>();
    cfg.refine_stages = j.at("refine_stages").get<int>();
    cfg.refine_width = j.value("refine_width", 32);
    cfg.duc_factor = j.value("duc_factor", 2);
    cfg.input_h = j.value("input_h", 360);
    cfg.input_w = j.value("input_w", 640);
    cfg.heat_channels = j.value("heat_channels", 5);
    cfg.paf_channels = j.value("paf_channels", 8);
    cfg.output_stride = j.value("output_stride", 4);
    cfg.validate();
    return cfg;
}

} // namespace

const char* variant_name(Variant v) {
    return v == Variant::full ? "full" : "star";
}

Variant variant_from_name(const std::string& name) {
    if (name == "full") return Variant::full;
    if (name == "star") return Variant::star;
    throw ValidationError("unknown variant: " + name);
}

NetworkConfig NetworkConfig::defaults(Variant v) {
    NetworkConfig cfg;
    cfg.variant = v;
    if (v == Variant::star) {
        cfg.level_widths = {128};
    }
    return cfg;
}

int NetworkConfig::levels_in_stage(int stage) const {
    if (variant == Variant::star) return 1;
    return std::min({stage, 3, static_cast<int>(level_widths.size())});
}

int NetworkConfig::feature_channels() const {
    return 4 * level_widths[0];
}

int NetworkConfig::refinement_input_channels(int stage) const {
    return stage == 1 ? feature_channels()
                      : feature_channels() + heat_channels + paf_channels;
}

void NetworkConfig::validate() const {
    if (stage_blocks.size() != 4) throw ValidationError("stage_blocks must have 4 entries");
    for (int b : stage_blocks)
        if (b < 1) throw ValidationError("stage block counts must be >= 1");
    if (variant == Variant::star) {
        if (level_widths.size() != 1)
            throw ValidationError("star variant has a single resolution level");
    } else {
        if (level_widths.size() != 3)
            throw ValidationError("full variant has three resolution levels");
    }
    for (int w : level_widths)
        if (w < 4 || w % 2 != 0) throw ValidationError("level widths must be even and >= 4");
    if (refine_stages < 1) throw ValidationError("refine_stages must be >= 1");
    if (refine_width < 8 || refine_width % 2 != 0)
        throw ValidationError("refine_width must be even and >= 8");
    if (duc_factor != 2) throw ValidationError("the fusion ladder assumes duc_factor == 2");
    if (heat_channels != 5 || paf_channels != 8)
        throw ValidationError("head channel counts are fixed at 5 and 8");
    if (output_stride != 4) throw ValidationError("output stride is fixed at 4");
}

const Tensor& ParameterStore::get(const std::string& path) const {
    const auto it = entries.find(path);
    if (it == entries.end()) throw ParameterError("missing parameter: " + path);
    return it->second;
}

std::vector<uint32_t> LayerDef::weight_dims() const {
    return {static_cast<uint32_t>(out_c), static_cast<uint32_t>(depthwise ? 1 : in_c),
            static_cast<uint32_t>(k), static_cast<uint32_t>(k)};
}

size_t LayerDef::param_count() const {
    return static_cast<size_t>(out_c) * (depthwise ? 1 : in_c) * k * k +
           static_cast<size_t>(out_c);
}

size_t LayerDef::flop_count() const {
    const size_t macs_per_out = static_cast<size_t>(k) * k * (depthwise ? 1 : in_c);
    return 2 * static_cast<size_t>(out_h) * out_w * out_c * macs_per_out;
}

Tensor relu(const Tensor& x) {
    Tensor out = x;
    relu_inplace(out);
    return out;
}

Tensor channel_shuffle(const Tensor& x, int groups) {
    if (x.ndim() != 3) throw ShapeError("channel_shuffle expects (C,H,W)");
    const int c = x.channels();
    if (groups < 1 || c % groups != 0)
        throw ShapeError("channel count " + std::to_string(c) + " not divisible by groups " +
                         std::to_string(groups));
    if (groups == 1) return x;
    const int per = c / groups;
    Tensor out({x.dims[0], x.dims[1], x.dims[2]});
    const size_t plane = static_cast<size_t>(x.dims[1]) * x.dims[2];
    for (int gi = 0; gi < groups; ++gi)
        for (int cj = 0; cj < per; ++cj) {
            const int src = gi * per + cj;
            const int dst = cj * groups + gi;
            std::copy(x.data.begin() + src * plane, x.data.begin() + (src + 1) * plane,
                      out.data.begin() + dst * plane);
        }
    return out;
}

Tensor duc_upsample(const Tensor& x, int d) {
    if (x.ndim() != 3) throw ShapeError("duc_upsample expects (C,H,W)");
    if (d < 1) throw ShapeError("duc factor must be >= 1");
    if (d == 1) return x;
    const int c = x.channels();
    if (c % (d * d) != 0)
        throw ShapeError("duc_upsample: channels " + std::to_string(c) +
                         " not divisible by d^2 = " + std::to_string(d * d));
    const int l = c / (d * d);
    const int h = x.height(), w = x.width();
    Tensor out({static_cast<uint32_t>(l), static_cast<uint32_t>(d * h),
                static_cast<uint32_t>(d * w)});
    for (int lc = 0; lc < l; ++lc)
        for (int a = 0; a < d; ++a)
            for (int b = 0; b < d; ++b) {
                const float* src = x.channel(lc * d * d + a * d + b);
                for (int i = 0; i < h; ++i) {
                    float* dst = out.channel(lc) +
                                 static_cast<size_t>(d * i + a) * (d * w) + b;
                    const float* row = src + static_cast<size_t>(i) * w;
                    for (int j = 0; j < w; ++j) dst[d * j] = row[j];
                }
            }
    return out;
}

namespace {

// Adapts explicit parameter structs to the ctx walk used by the backbone.
ParameterStore store_for_block(const std::string& prefix, const ShuffleBlockParams& p,
                               ShuffleBlockKind kind) {
    ParameterStore s;
    auto put = [&](const std::string& name, const ConvWeights& cw) {
        s.entries[prefix + "." + name + ".weight"] = cw.weight;
        s.entries[prefix + "." + name + ".bias"] = cw.bias;
    };
    if (kind == ShuffleBlockKind::spatial_down) {
        put("b1.dw", p.b1_dw);
        put("b1.conv", p.b1_conv);
    }
    put("b2.conv1", p.b2_conv1);
    put("b2.dw", p.b2_dw);
    put("b2.conv2", p.b2_conv2);
    return s;
}

} // namespace

Tensor shuffle_block_forward(const Tensor& x, const ShuffleBlockParams& params,
                             ShuffleBlockKind kind, ShuffleBlockStyle style) {
    const NetworkConfig cfg; // unused by the block itself
    const ParameterStore store = store_for_block("block", params, kind);
    Ctx ctx{cfg, &store, nullptr};
    if (kind == ShuffleBlockKind::basic) return ctx_basic_block(ctx, x, "block", style);
    const int out_c = static_cast<int>(params.b1_conv.weight.dims[0]) * 2;
    return ctx_down_block(ctx, x, "block", out_c, style);
}

Tensor residual_adapter_forward(const Tensor& x, const ResidualAdapterParams& params) {
    const NetworkConfig cfg;
    ParameterStore s;
    auto put = [&](const std::string& name, const ConvWeights& cw) {
        s.entries["ra." + name + ".weight"] = cw.weight;
        s.entries["ra." + name + ".bias"] = cw.bias;
    };
    put("reduce", params.reduce);
    put("dw", params.dw);
    put("expand", params.expand);
    put("adapter", params.adapter);
    if (params.proj) put("proj", *params.proj);
    Ctx ctx{cfg, &s, nullptr};
    const int out_c = static_cast<int>(params.expand.weight.dims[0]);
    return ctx_residual_adapter(ctx, x, "ra", out_c);
}

Tensor backbone_forward(const Tensor& img, const ParameterStore& params,
                        const NetworkConfig& cfg) {
    cfg.validate();
    Ctx ctx{cfg, &params, nullptr};
    return ctx_backbone(ctx, img);
}

ForwardResult refinement_forward(const Tensor& features, const ParameterStore& params,
                                 const NetworkConfig& cfg) {
    cfg.validate();
    if (features.ndim() != 3 || features.channels() != cfg.feature_channels())
        throw ShapeError("refinement input must have feature_channels() channels");
    Ctx ctx{cfg, &params, nullptr};
    return ctx_refinement(ctx, features);
}

ForwardResult network_forward(const Tensor& img, const ParameterStore& params,
                              const NetworkConfig& cfg) {
    cfg.validate();
    Ctx ctx{cfg, &params, nullptr};
    return ctx_forward(ctx, img);
}

std::vector<LayerDef> declare_layers(const NetworkConfig& cfg) {
    cfg.validate();
    std::vector<LayerDef> layers;
    Ctx ctx{cfg, nullptr, &layers};
    Tensor img({3, static_cast<uint32_t>(cfg.input_h), static_cast<uint32_t>(cfg.input_w)});
    ctx_forward(ctx, img);
    return layers;
}

ModelStats model_stats(const NetworkConfig& cfg) {
    ModelStats stats;
    for (const LayerDef& def : declare_layers(cfg)) {
        stats.param_count += def.param_count();
        stats.flop_count += def.flop_count();
    }
    return stats;
}

ParameterStore init_parameters(const NetworkConfig& cfg, uint64_t seed) {
    ParameterStore store;
    Rng rng(seed);
    for (const LayerDef& def : declare_layers(cfg)) {
        const size_t fan_in = static_cast<size_t>(def.k) * def.k * (def.depthwise ? 1 : def.in_c);
        const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
        Tensor w(def.weight_dims());
        for (float& v : w.data) v = static_cast<float>(rng.uniform(-limit, limit));
        store.entries[def.path + ".weight"] = std::move(w);
        store.entries[def.path + ".bias"] = Tensor({static_cast<uint32_t>(def.out_c)});
    }
    return store;
}

void save_parameters(const ParameterStore& store, const NetworkConfig& cfg,
                     const std::string& dir) {
    fs::create_directories(dir);
    json layers = json::object();
    for (const auto& [path, tensor] : store.entries) {
        const std::string file = path + ".ugvt";
        tensor_write_file(tensor, (fs::path(dir) / file).string());
        layers[path] = file;
    }
    const json manifest = {{"config", config_to_json(cfg)}, {"layers", layers}};
    std::ofstream f(fs::path(dir) / "manifest.json");
    if (!f) throw IoError("cannot write manifest in " + dir);
    f << manifest.dump(2) << "\n";
}

LoadedModel load_parameters(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw IoError("cannot open manifest: " + manifest_path);
    json manifest;
    try {
        f >> manifest;
    } catch (const json::exception& e) {
        throw FormatError("manifest parse error: " + std::string(e.what()));
    }

    LoadedModel model;
    model.config = config_from_json(manifest.at("config"));

    const fs::path dir = fs::path(manifest_path).parent_path();
    const json& layers = manifest.at("layers");

    std::map<std::string, std::vector<uint32_t>> expected_weights;
    for (const LayerDef& def : declare_layers(model.config)) {
        expected_weights[def.path + ".weight"] = def.weight_dims();
        expected_weights[def.path + ".bias"] = {static_cast<uint32_t>(def.out_c)};
    }

    for (const auto& [path, file] : layers.items()) {
        const auto it = expected_weights.find(path);
        if (it == expected_weights.end())
            throw ParameterError("manifest lists unknown layer: " + path);
        Tensor t = tensor_read_file((dir / file.get<std::string>()).string());
        if (t.dims != it->second)
            throw ParameterError("layer " + path + " has dims " + Ctx::dims_str(t.dims) +
                                 ", expected " + Ctx::dims_str(it->second));
        model.store.entries[path] = std::move(t);
    }
    for (const auto& [path, dims] : expected_weights)
        if (!model.store.has(path))
            throw ParameterError("manifest is missing layer: " + path);
    return model;
}

NetworkConfig config_from_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config: " + path);
    json j;
    try {
        f >> j;
    } catch (const json::exception& e) {
        throw FormatError("config parse error: " + std::string(e.what()));
    }
    return config_from_json(j);
}

} // namespace ugv
