#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "dtnet/blocks.hpp"
#include "dtnet/cgm.hpp"
#include "dtnet/fbm.hpp"

namespace dtnet {

// Which inter-branch fusion points are active: all levels, encoder levels,
// decoder levels, or the deepest encoder/decoder pair.
enum class Placement { None, I, II, III, IV };

Placement parse_placement(const std::string& s);
std::string placement_str(Placement p);

struct NetworkConfig {
    int base_width = 32;
    static constexpr int depth = 4;  // down-sampling stages per branch
    CgmVariant cgm;                  // defaults to base
    FbmVariant fbm_encoder = FbmVariant::MaskBridge;
    FbmVariant fbm_decoder = FbmVariant::DeepMaskBridge;
    Placement placement = Placement::None;
    bool side_branch = false;
    bool normalization = true;
    bool fbm_attention_rescale = false;
    // Which of the four cross-layer fusion points (1 = deepest) use the
    // configured variant; masked-off points fall back to base fusion.
    std::array<bool, 4> cgm_mask = {true, true, true, true};
    uint64_t seed = 0;

    void validate() const;
    std::string to_kv() const;
    static NetworkConfig from_kv(const std::string& text);
    bool operator==(const NetworkConfig&) const = default;
};

// Side-branch attachment used by the ablation harness to produce the
// paired with/without rows.
NetworkConfig attach_side_branch(const NetworkConfig& base,
                                 FbmVariant enc = FbmVariant::MaskBridge,
                                 FbmVariant dec = FbmVariant::DeepMaskBridge,
                                 Placement placement = Placement::I);
NetworkConfig detach_side_branch(const NetworkConfig& cfg);

struct Prediction {
    Tensor road;                 // HxWx1 in [0,1]
    std::optional<Tensor> edge;  // absent in single-task mode
};

// Dual-task encoder/decoder network: a main road-area branch with
// cross-layer fusion at every decoder level, and an optional road-edge
// side branch bridged into it at the configured placement.
class Network {
public:
    explicit Network(NetworkConfig cfg);

    struct ForwardVals {
        Graph::Val road = -1;
        Graph::Val edge = -1;
        bool has_edge = false;
        TapSink taps;
    };
    // Records the forward pass on g. Training-mode graphs update
    // normalization running statistics (single-writer contract).
    ForwardVals forward_graph(Graph& g, Graph::Val image);

    Prediction forward(const Tensor& image, bool training = false);

    // Eval-mode forward that also returns every named intermediate tap.
    Prediction forward_with_taps(const Tensor& image,
                                 std::vector<std::pair<std::string, Tensor>>& taps_out);

    const NetworkConfig& config() const { return cfg_; }
    ParamStore& params() { return store_; }
    const ParamStore& params() const { return store_; }
    size_t parameter_count() const { return store_.trainable_scalar_count(); }

    static void validate_input(const Tensor& image);

private:
    struct Encoder {
        std::optional<ResidualBlock> stem;
        std::vector<DownBlock> downs;
    };
    void build_encoder(Encoder& enc, const std::string& prefix);
    std::vector<Graph::Val> run_encoder(Graph& g, Encoder& enc, Graph::Val image, TapSink& taps,
                                        const std::string& prefix);
    bool encoder_fusion_active(int level) const;  // level 1..4
    bool decoder_fusion_active(int level) const;  // level 1..4, 1 = deepest

    NetworkConfig cfg_;
    ParamStore store_;
    std::vector<int> widths_;  // {C0, 2C0, 4C0, 8C0, 16C0}

    Encoder main_enc_, side_enc_;
    std::vector<UpBlock> main_ups_, side_ups_;
    std::vector<ResidualBlock> refines_;
    std::vector<CgmModule> cgms_;
    std::vector<FbmShallow> fbm_enc_;                 // indexed by active encoder points
    std::vector<int> fbm_enc_level_;                  // matching levels (1..4)
    std::vector<FbmShallow> fbm_dec_shallow_;
    std::vector<FbmDeep> fbm_dec_deep_;
    std::vector<int> fbm_dec_level_;
    std::optional<ConvUnit> main_head_, side_head_;
};

}  // namespace dtnet
