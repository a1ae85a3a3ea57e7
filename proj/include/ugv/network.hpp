#ifndef UGV_NETWORK_HPP
#define UGV_NETWORK_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ugv/tensor.hpp"

namespace ugv {

enum class Variant { full, star };

const char* variant_name(Variant v);
Variant variant_from_name(const std::string& name);

// Architecture hyperparameters. Widths are per resolution level: level 0 is
// the output stride (4), each deeper level halves the spatial size. The full
// variant grows one level per stage up to three; the star variant keeps a
// single full-resolution subnetwork per stage. Defaults are sized to land in
// the published parameter budgets.
struct NetworkConfig {
    Variant variant = Variant::full;
    std::vector<int> stage_blocks = {2, 2, 10, 6};
    std::vector<int> level_widths = {24, 96, 480}; // star: one entry
    int refine_stages = 2;
    int refine_width = 32;
    int duc_factor = 2;
    int input_h = 360, input_w = 640;
    int heat_channels = 5;
    int paf_channels = 8;
    int output_stride = 4;

    static NetworkConfig defaults(Variant v);

    int levels_in_stage(int stage) const; // stage in 1..4
    int feature_channels() const;         // channels of the concatenated F
    int refinement_input_channels(int stage) const;
    void validate() const;
};

// Named map from layer path to tensor. Immutable after load; shareable
// across threads.
struct ParameterStore {
    std::map<std::string, Tensor> entries;

    const Tensor& get(const std::string& path) const;
    bool has(const std::string& path) const { return entries.count(path) != 0; }
};

// One convolution instance of the architecture walk.
struct LayerDef {
    std::string path; // without the .weight/.bias suffix
    int out_c = 0, in_c = 0, k = 1, stride = 1;
    bool depthwise = false;
    int out_h = 0, out_w = 0;

    std::vector<uint32_t> weight_dims() const;
    size_t param_count() const;   // weight + bias
    size_t flop_count() const;    // 2 * MACs over the output map
};

// Elementwise max(x, 0).
Tensor relu(const Tensor& x);

// Channel c at position (gi, cj) under a (g, C/g) view moves to (cj, gi)
// under the (C/g, g) view. Pure permutation of channel planes.
Tensor channel_shuffle(const Tensor& x, int groups);

// out(l, d*i + a, d*j + b) = in(l*d^2 + a*d + b, i, j)
Tensor duc_upsample(const Tensor& x, int d);

enum class ShuffleBlockKind { spatial_down, basic };
enum class ShuffleBlockStyle { improved, vanilla }; // vanilla keeps ReLU after the first 1x1

struct ConvWeights {
    Tensor weight;
    Tensor bias;
};

struct ShuffleBlockParams {
    // branch 1 is used only by the spatial_down kind
    ConvWeights b1_dw, b1_conv;
    ConvWeights b2_conv1, b2_dw, b2_conv2;
};

Tensor shuffle_block_forward(const Tensor& x, const ShuffleBlockParams& params,
                             ShuffleBlockKind kind,
                             ShuffleBlockStyle style = ShuffleBlockStyle::improved);

struct ResidualAdapterParams {
    ConvWeights reduce, dw, expand, adapter;
    std::optional<ConvWeights> proj; // shortcut projection when channels change
};

// y = mainstream bottleneck (with shortcut) + 1x1 adapter applied to x.
Tensor residual_adapter_forward(const Tensor& x, const ResidualAdapterParams& params);

struct ForwardResult {
    Tensor features;                            // F, (feature_channels, H/4, W/4)
    Tensor heatmap;                             // final stage, (5, H/4, W/4)
    Tensor paf;                                 // final stage, (8, H/4, W/4)
    std::vector<std::pair<Tensor, Tensor>> stages; // per-stage (heatmap, paf)
};

// Stem + four multi-resolution stages + skip concatenation into F.
Tensor backbone_forward(const Tensor& img, const ParameterStore& params, const NetworkConfig& cfg);

// Two-branch multi-stage refinement over F.
ForwardResult refinement_forward(const Tensor& features, const ParameterStore& params,
                                 const NetworkConfig& cfg);

// backbone + refinement.
ForwardResult network_forward(const Tensor& img, const ParameterStore& params,
                              const NetworkConfig& cfg);

// Every convolution of the architecture in execution order, with output
// sizes computed for cfg.input_h x cfg.input_w.
std::vector<LayerDef> declare_layers(const NetworkConfig& cfg);

struct ModelStats {
    size_t param_count = 0;
    size_t flop_count = 0;
};

ModelStats model_stats(const NetworkConfig& cfg);

// He-uniform weights, zero biases, deterministic under seed.
ParameterStore init_parameters(const NetworkConfig& cfg, uint64_t seed);

// Manifest JSON {"config": {...}, "layers": {"path": "file.ugvt", ...}} plus
// one tensor file per entry next to it.
void save_parameters(const ParameterStore& store, const NetworkConfig& cfg,
                     const std::string& dir);

struct LoadedModel {
    ParameterStore store;
    NetworkConfig config;
};

LoadedModel load_parameters(const std::string& manifest_path);

NetworkConfig config_from_json_file(const std::string& path);

} // namespace ugv

#endif // UGV_NETWORK_HPP
