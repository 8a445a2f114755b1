#include "dtnet/blocks.hpp"

#include <stdexcept>

namespace dtnet {

ConvUnit ConvUnit::make(ParamStore& ps, const std::string& name, int k, int cin, int cout,
                        int stride, bool norm, uint64_t seed) {
    ConvUnit u;
    u.w = &ps.create(name + ".w", {k, k, cin, cout}, seed, k * k * cin);
    u.b = &ps.create_const(name + ".b", {cout}, 0.0, true);
    u.stride = stride;
    if (norm) {
        u.gamma = &ps.create_const(name + ".norm.gamma", {cout}, 1.0, true);
        u.beta = &ps.create_const(name + ".norm.beta", {cout}, 0.0, true);
        u.run_mean = &ps.create_const(name + ".norm.run_mean", {cout}, 0.0, false);
        u.run_var = &ps.create_const(name + ".norm.run_var", {cout}, 1.0, false);
    }
    return u;
}

Graph::Val ConvUnit::apply(Graph& g, Graph::Val x) const {
    Graph::Val y = g.conv(x, *w, *b, stride);
    if (gamma) y = g.channel_norm(y, *gamma, *beta, *run_mean, *run_var);
    return y;
}

static void check_in_channels(const Tensor& x, const BlockSpec& spec, const char* what) {
    if (x.c != spec.in_channels)
        throw std::invalid_argument(std::string(what) + ": input has " + std::to_string(x.c) +
                                    " channels, spec expects " +
                                    std::to_string(spec.in_channels));
}

ResidualBlock::ResidualBlock(ParamStore& ps, const std::string& name, BlockSpec spec,
                             uint64_t seed)
    : spec_(spec),
      main1_(ConvUnit::make(ps, name + ".conv1", 3, spec.in_channels, spec.out_channels, 1,
                            spec.normalization, seed)),
      main2_(ConvUnit::make(ps, name + ".conv2", 3, spec.out_channels, spec.out_channels, 1,
                            spec.normalization, seed)) {
    if (spec.in_channels != spec.out_channels)
        shortcut_ = ConvUnit::make(ps, name + ".proj", 1, spec.in_channels, spec.out_channels, 1,
                                   spec.normalization, seed);
}

Graph::Val ResidualBlock::forward(Graph& g, Graph::Val x) const {
    check_in_channels(g.value(x), spec_, "residual_block");
    Graph::Val h = g.relu(main1_.apply(g, x));
    h = main2_.apply(g, h);
    Graph::Val sc = shortcut_ ? shortcut_->apply(g, x) : x;
    return g.relu(g.add(h, sc));
}

DownBlock::DownBlock(ParamStore& ps, const std::string& name, BlockSpec spec, uint64_t seed)
    : spec_(spec),
      main1_(ConvUnit::make(ps, name + ".conv1", 3, spec.in_channels, spec.out_channels, 2,
                            spec.normalization, seed)),
      main2_(ConvUnit::make(ps, name + ".conv2", 3, spec.out_channels, spec.out_channels, 1,
                            spec.normalization, seed)),
      shortcut_(ConvUnit::make(ps, name + ".proj", 1, spec.in_channels, spec.out_channels, 2,
                               spec.normalization, seed)) {}

Graph::Val DownBlock::forward(Graph& g, Graph::Val x) const {
    const Tensor& xt = g.value(x);
    if (xt.h < 2 || xt.w < 2)
        throw std::invalid_argument("down_block: degenerate spatial size " + xt.shape_str());
    check_in_channels(xt, spec_, "down_block");
    Graph::Val h = g.relu(main1_.apply(g, x));
    h = main2_.apply(g, h);
    Graph::Val sc = shortcut_.apply(g, x);
    return g.relu(g.add(h, sc));
}

UpBlock::UpBlock(ParamStore& ps, const std::string& name, BlockSpec spec, uint64_t seed)
    : spec_(spec),
      main1_(ConvUnit::make(ps, name + ".conv1", 3, spec.in_channels, spec.out_channels, 1,
                            spec.normalization, seed)),
      main2_(ConvUnit::make(ps, name + ".conv2", 3, spec.out_channels, spec.out_channels, 1,
                            spec.normalization, seed)),
      shortcut_(ConvUnit::make(ps, name + ".proj", 1, spec.in_channels, spec.out_channels, 1,
                               spec.normalization, seed)) {}

Graph::Val UpBlock::forward(Graph& g, Graph::Val x) const {
    check_in_channels(g.value(x), spec_, "up_block");
    Graph::Val up = g.upsample2x(x);
    Graph::Val h = g.relu(main1_.apply(g, up));
    h = main2_.apply(g, h);
    Graph::Val sc = shortcut_.apply(g, up);
    return g.relu(g.add(h, sc));
}

}  // namespace dtnet
