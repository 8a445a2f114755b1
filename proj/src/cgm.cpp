#include "dtnet/cgm.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dtnet {

Graph::Val salience_map(Graph& g, Graph::Val xv) {
    const Tensor& x = g.value(xv);
    const int n = x.h * x.w;
    Tensor mean(x.h, x.w, 1);
    for (int p = 0; p < n; ++p) {
        const Real* r = x.v.data() + size_t(p) * x.c;
        Real s = 0.0;
        for (int ci = 0; ci < x.c; ++ci) s += r[ci];
        mean.v[size_t(p)] = s / x.c;
    }
    Real max1 = -1e300, max2 = -1e300;
    int argmax = 0;
    for (int p = 0; p < n; ++p) {
        const Real m = mean.v[size_t(p)];
        if (m > max1) {
            max2 = max1;
            max1 = m;
            argmax = p;
        } else if (m > max2) {
            max2 = m;
        }
    }
    g.track_margin(std::fabs(max1));                    // branch at zero
    if (n > 1) g.track_margin(std::fabs(max1 - max2));  // argmax tie
    g.track_margin(std::fabs(max1 - kSalienceEps));     // denominator switch

    const bool zero_case = !(max1 > 0.0);
    const bool eps_clamped = max1 < kSalienceEps;
    const Real denom = std::max(max1, kSalienceEps);
    Tensor out(x.h, x.w, 1);
    if (!zero_case) {
        for (int p = 0; p < n; ++p) out.v[size_t(p)] = mean.v[size_t(p)] / denom;
    }
    Graph::Val res = g.make_node(std::move(out), nullptr);
    if (!zero_case) {
        g.install_backprop(res, [xv, res, argmax, denom, eps_clamped](Graph& gg) {
            Tensor& dx = gg.grad_ref(xv);
            if (dx.size() == 0) return;
            const Tensor& x = gg.value(xv);
            const Tensor& y = gg.value(res);
            const Tensor& dy = gg.grad(res);
            const int n = x.h * x.w;
            // d(out_p)/d(mean_q) = [p==q]/denom - [q==argmax] * out_p/denom
            Real dot = 0.0;
            if (!eps_clamped)
                for (int p = 0; p < n; ++p) dot += dy.v[size_t(p)] * y.v[size_t(p)];
            for (int p = 0; p < n; ++p) {
                Real dm = dy.v[size_t(p)] / denom;
                if (!eps_clamped && p == argmax) dm -= dot / denom;
                const Real dxi = dm / x.c;
                Real* r = dx.v.data() + size_t(p) * x.c;
                for (int ci = 0; ci < x.c; ++ci) r[ci] += dxi;
            }
        });
    }
    return res;
}

CgmVariant CgmVariant::parse(const std::string& s) {
    if (s == "base") return {DecoderEnhance::None, EncoderEnhance::None};
    if (s == "a") return {DecoderEnhance::Conv, EncoderEnhance::Multiply};
    if (s == "b") return {DecoderEnhance::Conv, EncoderEnhance::SalienceMask};
    if (s == "c") return {DecoderEnhance::NonSalientMask, EncoderEnhance::Multiply};
    if (s == "d") return {DecoderEnhance::NonSalientMask, EncoderEnhance::SalienceMask};
    throw std::invalid_argument("unknown cgm variant '" + s + "' (base|a|b|c|d)");
}

std::string CgmVariant::str() const {
    if (is_base()) return "base";
    if (decoder == DecoderEnhance::Conv) return encoder == EncoderEnhance::Multiply ? "a" : "b";
    return encoder == EncoderEnhance::Multiply ? "c" : "d";
}

CgmModule::CgmModule(ParamStore& ps, const std::string& name, int channels, CgmVariant variant,
                     uint64_t seed)
    : variant_(variant), channels_(channels) {
    if ((variant.decoder == DecoderEnhance::None) != (variant.encoder == EncoderEnhance::None))
        throw std::invalid_argument("cgm: decoder and encoder strategies must be set together");
    if (variant.decoder == DecoderEnhance::Conv) {
        conv_a1_w_ = &ps.create(name + ".spatial1.w", {3, 3, 2 * channels, channels}, seed,
                                9 * 2 * channels);
        conv_a1_b_ = &ps.create_const(name + ".spatial1.b", {channels}, 0.0, true);
        conv_a2_w_ =
            &ps.create(name + ".spatial2.w", {3, 3, channels, channels}, seed, 9 * channels);
        conv_a2_b_ = &ps.create_const(name + ".spatial2.b", {channels}, 0.0, true);
    }
    fuse_w_ = &ps.create(name + ".fuse.w", {1, 1, 2 * channels, channels}, seed, 2 * channels);
    fuse_b_ = &ps.create_const(name + ".fuse.b", {channels}, 0.0, true);
}

static void check_pair(const Tensor& e, const Tensor& d, int channels, const char* what) {
    if (!e.same_shape(d))
        throw std::invalid_argument(std::string(what) + ": encoder/decoder shape mismatch " +
                                    e.shape_str() + " vs " + d.shape_str());
    if (e.c != channels)
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(channels) +
                                    " channels, got " + std::to_string(e.c));
}

Graph::Val CgmModule::enhance_decoder(Graph& g, Graph::Val e, Graph::Val d) const {
    check_pair(g.value(e), g.value(d), channels_, "cgm.enhance_decoder");
    if (variant_.decoder == DecoderEnhance::Conv) {
        Graph::Val h = g.conv(g.concat(e, d), *conv_a1_w_, *conv_a1_b_, 1);
        Graph::Val s = g.conv(g.relu(h), *conv_a2_w_, *conv_a2_b_, 1);
        return g.add(d, s);
    }
    if (variant_.decoder == DecoderEnhance::NonSalientMask) {
        Graph::Val mask = g.affine(salience_map(g, d), -1.0, 1.0);
        return g.add(d, g.mul_mask(e, mask));
    }
    throw std::logic_error("cgm.enhance_decoder called on base variant");
}

Graph::Val CgmModule::enhance_encoder(Graph& g, Graph::Val e, Graph::Val d) const {
    check_pair(g.value(e), g.value(d), channels_, "cgm.enhance_encoder");
    if (variant_.encoder == EncoderEnhance::Multiply) return g.mul(e, d);
    if (variant_.encoder == EncoderEnhance::SalienceMask)
        return g.mul_mask(e, salience_map(g, d));
    throw std::logic_error("cgm.enhance_encoder called on base variant");
}

Graph::Val CgmModule::forward(Graph& g, Graph::Val e, Graph::Val d, TapSink* taps,
                              const std::string& tap_prefix) const {
    check_pair(g.value(e), g.value(d), channels_, "cgm.forward");
    if (taps) {
        taps->put(tap_prefix + ".e_in", e);
        taps->put(tap_prefix + ".d_in", d);
    }
    if (variant_.is_base()) {
        Graph::Val out = g.conv(g.concat(d, e), *fuse_w_, *fuse_b_, 1);
        if (taps) taps->put(tap_prefix + ".out", out);
        return out;
    }
    Graph::Val de = enhance_decoder(g, e, d);
    Graph::Val ee = enhance_encoder(g, e, d);
    if (taps) {
        taps->put(tap_prefix + ".d_enh", de);
        taps->put(tap_prefix + ".e_enh", ee);
    }
    Graph::Val out = g.conv(g.concat(de, ee), *fuse_w_, *fuse_b_, 1);
    if (taps) taps->put(tap_prefix + ".out", out);
    return out;
}

}  // namespace dtnet
