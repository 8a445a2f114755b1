#pragma once

#include <string>

#include "dtnet/cgm.hpp"
#include "dtnet/graph.hpp"

namespace dtnet {

// Spatial softmax of the channel-mean of squared activations: a sparse
// attention map, entries strictly positive and summing to 1 over HxW.
// Sign-insensitive by construction. Optional multiplicative rescale by
// H*W counteracts the 1/(H*W) shrinkage of masked features.
Graph::Val attention_map(Graph& g, Graph::Val x, bool rescale_by_area = false);

enum class FbmVariant { BaseConcat, BaseAdd, MaskBridge, DeepMaskBridge };

// Selector vocabulary: "base_a", "base_b", "c", "d".
FbmVariant parse_fbm_variant(const std::string& s);
std::string fbm_variant_str(FbmVariant v);

// One-way bridge injecting a side-branch feature into the main branch at
// a same-resolution fusion point. The side branch continues unmodified.
class FbmShallow {
public:
    FbmShallow(ParamStore& ps, const std::string& name, int channels, FbmVariant variant,
               uint64_t seed);
    Graph::Val forward(Graph& g, Graph::Val main, Graph::Val side) const;
    FbmVariant variant() const { return variant_; }

private:
    FbmVariant variant_;
    int channels_;
    Param *fold_w_ = nullptr, *fold_b_ = nullptr;  // 1x1: 2C -> C
};

// Decoder-only bridge: grounds the deep main feature with an encoder skip,
// then gates it by the side branch's attention map.
class FbmDeep {
public:
    FbmDeep(ParamStore& ps, const std::string& name, int channels, int skip_channels,
            bool rescale_attention, uint64_t seed);
    Graph::Val forward(Graph& g, Graph::Val d_main, Graph::Val d_side, Graph::Val e_skip) const;

private:
    int channels_;
    int skip_channels_;
    bool rescale_attention_;
    Param *ground_w_, *ground_b_;  // 1x1: C + C_skip -> C
    Param *fold_w_, *fold_b_;      // 1x1: 2C -> C
};

}  // namespace dtnet
