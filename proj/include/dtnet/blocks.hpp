#pragma once

#include <optional>
#include <string>

#include "dtnet/graph.hpp"

namespace dtnet {

struct BlockSpec {
    int in_channels = 1;
    int out_channels = 1;
    bool normalization = true;
};

// Convolution with optional per-channel normalization behind it.
struct ConvUnit {
    Param* w = nullptr;
    Param* b = nullptr;
    Param* gamma = nullptr;
    Param* beta = nullptr;
    Param* run_mean = nullptr;
    Param* run_var = nullptr;
    int stride = 1;

    static ConvUnit make(ParamStore& ps, const std::string& name, int k, int cin, int cout,
                         int stride, bool norm, uint64_t seed);
    Graph::Val apply(Graph& g, Graph::Val x) const;
};

// Two 3x3 convolutions plus shortcut (identity when widths match, else
// projected), rectifier on the sum. Spatial size is preserved.
class ResidualBlock {
public:
    ResidualBlock(ParamStore& ps, const std::string& name, BlockSpec spec, uint64_t seed);
    Graph::Val forward(Graph& g, Graph::Val x) const;
    const BlockSpec& spec() const { return spec_; }

private:
    BlockSpec spec_;
    ConvUnit main1_, main2_;
    std::optional<ConvUnit> shortcut_;
};

// Residual block whose first main convolution and 1x1 shortcut run at
// stride 2; output is ceil(H/2) x ceil(W/2).
class DownBlock {
public:
    DownBlock(ParamStore& ps, const std::string& name, BlockSpec spec, uint64_t seed);
    Graph::Val forward(Graph& g, Graph::Val x) const;
    const BlockSpec& spec() const { return spec_; }

private:
    BlockSpec spec_;
    ConvUnit main1_, main2_, shortcut_;
};

// Bilinear 2x upsample on both paths, convolutions behind it; output is
// 2H x 2W.
class UpBlock {
public:
    UpBlock(ParamStore& ps, const std::string& name, BlockSpec spec, uint64_t seed);
    Graph::Val forward(Graph& g, Graph::Val x) const;
    const BlockSpec& spec() const { return spec_; }

private:
    BlockSpec spec_;
    ConvUnit main1_, main2_, shortcut_;
};

}  // namespace dtnet
