#include "dtnet/fbm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtnet {

Graph::Val attention_map(Graph& g, Graph::Val xv, bool rescale_by_area) {
    const Tensor& x = g.value(xv);
    const int n = x.h * x.w;
    std::vector<Real> s(static_cast<size_t>(n), 0.0);
    for (int p = 0; p < n; ++p) {
        const Real* r = x.v.data() + size_t(p) * x.c;
        Real acc = 0.0;
        for (int ci = 0; ci < x.c; ++ci) acc += r[ci] * r[ci];
        s[size_t(p)] = acc / x.c;
    }
    const Real smax = *std::max_element(s.begin(), s.end());
    Tensor y(x.h, x.w, 1);
    Real z = 0.0;
    for (int p = 0; p < n; ++p) {
        y.v[size_t(p)] = std::exp(s[size_t(p)] - smax);
        z += y.v[size_t(p)];
    }
    const Real scale = rescale_by_area ? Real(n) : 1.0;
    for (int p = 0; p < n; ++p) y.v[size_t(p)] = scale * (y.v[size_t(p)] / z);

    Graph::Val res = g.make_node(std::move(y), nullptr);
    g.install_backprop(res, [xv, res, scale](Graph& gg) {
        Tensor& dx = gg.grad_ref(xv);
        if (dx.size() == 0) return;
        const Tensor& x = gg.value(xv);
        const Tensor& y = gg.value(res);
        const Tensor& dy = gg.grad(res);
        const int n = x.h * x.w;
        // softmax jacobian: ds_p = q_p * (g_p - sum_q g_q q_q), q = y/scale
        Real dot = 0.0;
        for (int p = 0; p < n; ++p) dot += dy.v[size_t(p)] * (y.v[size_t(p)] / scale);
        for (int p = 0; p < n; ++p) {
            const Real q = y.v[size_t(p)] / scale;
            const Real ds = scale * q * (dy.v[size_t(p)] - dot);
            const Real* r = x.v.data() + size_t(p) * x.c;
            Real* d = dx.v.data() + size_t(p) * x.c;
            for (int ci = 0; ci < x.c; ++ci) d[ci] += ds * 2.0 * r[ci] / x.c;
        }
    });
    return res;
}

FbmVariant parse_fbm_variant(const std::string& s) {
    if (s == "base_a") return FbmVariant::BaseConcat;
    if (s == "base_b") return FbmVariant::BaseAdd;
    if (s == "c") return FbmVariant::MaskBridge;
    if (s == "d") return FbmVariant::DeepMaskBridge;
    throw std::invalid_argument("unknown fbm variant '" + s + "' (base_a|base_b|c|d)");
}

std::string fbm_variant_str(FbmVariant v) {
    switch (v) {
        case FbmVariant::BaseConcat: return "base_a";
        case FbmVariant::BaseAdd: return "base_b";
        case FbmVariant::MaskBridge: return "c";
        case FbmVariant::DeepMaskBridge: return "d";
    }
    throw std::logic_error("bad fbm variant");
}

FbmShallow::FbmShallow(ParamStore& ps, const std::string& name, int channels, FbmVariant variant,
                       uint64_t seed)
    : variant_(variant), channels_(channels) {
    if (variant == FbmVariant::DeepMaskBridge)
        throw std::invalid_argument("fbm: deep mask bridge is decoder-only (use FbmDeep)");
    if (variant != FbmVariant::BaseAdd) {
        fold_w_ = &ps.create(name + ".fold.w", {1, 1, 2 * channels, channels}, seed, 2 * channels);
        fold_b_ = &ps.create_const(name + ".fold.b", {channels}, 0.0, true);
    }
}

static void check_same(const Tensor& a, const Tensor& b, int channels, const char* what) {
    if (!a.same_shape(b))
        throw std::invalid_argument(std::string(what) + ": shape mismatch " + a.shape_str() +
                                    " vs " + b.shape_str());
    if (a.c != channels)
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(channels) +
                                    " channels, got " + std::to_string(a.c));
}

Graph::Val FbmShallow::forward(Graph& g, Graph::Val main, Graph::Val side) const {
    check_same(g.value(main), g.value(side), channels_, "fbm_shallow");
    switch (variant_) {
        case FbmVariant::BaseConcat:
            return g.conv(g.concat(main, side), *fold_w_, *fold_b_, 1);
        case FbmVariant::BaseAdd:
            return g.add(main, side);
        case FbmVariant::MaskBridge: {
            Graph::Val enhanced = g.mul_mask(main, salience_map(g, side));
            return g.conv(g.concat(enhanced, main), *fold_w_, *fold_b_, 1);
        }
        default:
            throw std::logic_error("bad shallow fbm variant");
    }
}

FbmDeep::FbmDeep(ParamStore& ps, const std::string& name, int channels, int skip_channels,
                 bool rescale_attention, uint64_t seed)
    : channels_(channels), skip_channels_(skip_channels), rescale_attention_(rescale_attention) {
    ground_w_ = &ps.create(name + ".ground.w", {1, 1, channels + skip_channels, channels}, seed,
                           channels + skip_channels);
    ground_b_ = &ps.create_const(name + ".ground.b", {channels}, 0.0, true);
    fold_w_ = &ps.create(name + ".fold.w", {1, 1, 2 * channels, channels}, seed, 2 * channels);
    fold_b_ = &ps.create_const(name + ".fold.b", {channels}, 0.0, true);
}

Graph::Val FbmDeep::forward(Graph& g, Graph::Val d_main, Graph::Val d_side,
                            Graph::Val e_skip) const {
    const Tensor& dm = g.value(d_main);
    const Tensor& ds = g.value(d_side);
    const Tensor& es = g.value(e_skip);
    check_same(dm, ds, channels_, "fbm_deep");
    if (es.h != dm.h || es.w != dm.w)
        throw std::invalid_argument("fbm_deep: encoder skip spatial mismatch " + es.shape_str() +
                                    " vs " + dm.shape_str());
    if (es.c != skip_channels_)
        throw std::invalid_argument("fbm_deep: encoder skip has " + std::to_string(es.c) +
                                    " channels, expected " + std::to_string(skip_channels_));
    Graph::Val grounded = g.conv(g.concat(d_main, e_skip), *ground_w_, *ground_b_, 1);
    Graph::Val mask = attention_map(g, d_side, rescale_attention_);
    Graph::Val enhanced = g.mul_mask(grounded, mask);
    return g.conv(g.concat(enhanced, d_main), *fold_w_, *fold_b_, 1);
}

}  // namespace dtnet
