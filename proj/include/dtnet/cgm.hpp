#pragma once

#include <string>
#include <vector>

#include "dtnet/graph.hpp"

namespace dtnet {

// Named taps on intermediate features, filled during forward when a sink
// is supplied (heat-map export).
struct TapSink {
    std::vector<std::pair<std::string, Graph::Val>> taps;
    void put(const std::string& name, Graph::Val v) { taps.emplace_back(name, v); }
};

// Channel-mean salience map normalized by its spatial maximum; all-zero
// when the map has no positive entry. Output is HxWx1 and lands in [0,1]
// for non-negative inputs. Exactly scale invariant: p(a*x) == p(x) for
// a > 0 (the epsilon only guards the near-zero denominator).
Graph::Val salience_map(Graph& g, Graph::Val x);

constexpr Real kSalienceEps = 1e-6;

// Decoder enhancement adds spatial information to the decoder feature;
// encoder enhancement reinforces semantic content of the encoder feature.
enum class DecoderEnhance { None, Conv, NonSalientMask };      // strategies A, B
enum class EncoderEnhance { None, Multiply, SalienceMask };    // strategies C, D

struct CgmVariant {
    DecoderEnhance decoder = DecoderEnhance::None;
    EncoderEnhance encoder = EncoderEnhance::None;

    bool is_base() const {
        return decoder == DecoderEnhance::None && encoder == EncoderEnhance::None;
    }
    // Selector vocabulary: "base", "a", "b", "c", "d".
    static CgmVariant parse(const std::string& s);
    std::string str() const;
    bool operator==(const CgmVariant&) const = default;
};

// Cross-layer fusion of one encoder/decoder feature pair at a fixed width.
// The two enhanced streams are concatenated and folded back to the input
// width by a 1x1 convolution, so every variant (including base) is a
// drop-in replacement for the others.
class CgmModule {
public:
    CgmModule(ParamStore& ps, const std::string& name, int channels, CgmVariant variant,
              uint64_t seed);

    Graph::Val enhance_decoder(Graph& g, Graph::Val e, Graph::Val d) const;
    Graph::Val enhance_encoder(Graph& g, Graph::Val e, Graph::Val d) const;
    Graph::Val forward(Graph& g, Graph::Val e, Graph::Val d, TapSink* taps = nullptr,
                       const std::string& tap_prefix = "") const;

    const CgmVariant& variant() const { return variant_; }
    int channels() const { return channels_; }

private:
    CgmVariant variant_;
    int channels_;
    Param *conv_a1_w_ = nullptr, *conv_a1_b_ = nullptr;  // strategy A: 2C -> C
    Param *conv_a2_w_ = nullptr, *conv_a2_b_ = nullptr;  // strategy A: C -> C
    Param *fuse_w_ = nullptr, *fuse_b_ = nullptr;        // 1x1: 2C -> C
};

}  // namespace dtnet
