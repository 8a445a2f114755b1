#include "dtnet/network.hpp"

#include <sstream>
#include <stdexcept>

namespace dtnet {

Placement parse_placement(const std::string& s) {
    if (s == "none" || s == "None") return Placement::None;
    if (s == "I" || s == "i") return Placement::I;
    if (s == "II" || s == "ii") return Placement::II;
    if (s == "III" || s == "iii") return Placement::III;
    if (s == "IV" || s == "iv") return Placement::IV;
    throw std::invalid_argument("unknown placement '" + s + "' (none|I|II|III|IV)");
}

std::string placement_str(Placement p) {
    switch (p) {
        case Placement::None: return "none";
        case Placement::I: return "I";
        case Placement::II: return "II";
        case Placement::III: return "III";
        case Placement::IV: return "IV";
    }
    throw std::logic_error("bad placement");
}

void NetworkConfig::validate() const {
    if (base_width < 1) throw std::invalid_argument("config: base_width must be >= 1");
    if (!side_branch && placement != Placement::None)
        throw std::invalid_argument(
            "config: inter-branch fusion (placement " + placement_str(placement) +
            ") requires the side branch");
    if (fbm_encoder == FbmVariant::DeepMaskBridge)
        throw std::invalid_argument("config: deep mask bridge is only legal at decoder positions");
}

std::string NetworkConfig::to_kv() const {
    std::ostringstream os;
    os << "base_width=" << base_width << "\n";
    os << "cgm=" << cgm.str() << "\n";
    os << "fbm_encoder=" << fbm_variant_str(fbm_encoder) << "\n";
    os << "fbm_decoder=" << fbm_variant_str(fbm_decoder) << "\n";
    os << "placement=" << placement_str(placement) << "\n";
    os << "side_branch=" << (side_branch ? 1 : 0) << "\n";
    os << "normalization=" << (normalization ? 1 : 0) << "\n";
    os << "fbm_attention_rescale=" << (fbm_attention_rescale ? 1 : 0) << "\n";
    os << "cgm_mask=";
    for (bool b : cgm_mask) os << (b ? '1' : '0');
    os << "\n";
    os << "seed=" << seed << "\n";
    return os.str();
}

NetworkConfig NetworkConfig::from_kv(const std::string& text) {
    NetworkConfig cfg;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config: bad line '" + line + "'");
        const std::string key = line.substr(0, eq);
        const std::string val = line.substr(eq + 1);
        if (key == "base_width")
            cfg.base_width = std::stoi(val);
        else if (key == "cgm")
            cfg.cgm = CgmVariant::parse(val);
        else if (key == "fbm_encoder")
            cfg.fbm_encoder = parse_fbm_variant(val);
        else if (key == "fbm_decoder")
            cfg.fbm_decoder = parse_fbm_variant(val);
        else if (key == "placement")
            cfg.placement = parse_placement(val);
        else if (key == "side_branch")
            cfg.side_branch = val == "1";
        else if (key == "normalization")
            cfg.normalization = val == "1";
        else if (key == "fbm_attention_rescale")
            cfg.fbm_attention_rescale = val == "1";
        else if (key == "cgm_mask") {
            if (val.size() != 4) throw std::invalid_argument("config: cgm_mask needs 4 flags");
            for (int i = 0; i < 4; ++i) cfg.cgm_mask[size_t(i)] = val[size_t(i)] == '1';
        } else if (key == "seed")
            cfg.seed = std::stoull(val);
        else
            throw std::invalid_argument("config: unknown key '" + key + "'");
    }
    return cfg;
}

NetworkConfig attach_side_branch(const NetworkConfig& base, FbmVariant enc, FbmVariant dec,
                                 Placement placement) {
    if (base.side_branch)
        throw std::invalid_argument("attach_side_branch: side branch already present");
    NetworkConfig cfg = base;
    cfg.side_branch = true;
    cfg.fbm_encoder = enc;
    cfg.fbm_decoder = dec;
    cfg.placement = placement;
    cfg.validate();
    return cfg;
}

NetworkConfig detach_side_branch(const NetworkConfig& cfg) {
    NetworkConfig out = cfg;
    out.side_branch = false;
    out.placement = Placement::None;
    out.fbm_encoder = NetworkConfig{}.fbm_encoder;
    out.fbm_decoder = NetworkConfig{}.fbm_decoder;
    return out;
}

// ---------------------------------------------------------------------------

bool Network::encoder_fusion_active(int level) const {
    if (!cfg_.side_branch) return false;
    switch (cfg_.placement) {
        case Placement::I:
        case Placement::II: return true;
        case Placement::IV: return level == 4;  // deepest encoder pair
        default: return false;
    }
}

bool Network::decoder_fusion_active(int level) const {
    if (!cfg_.side_branch) return false;
    switch (cfg_.placement) {
        case Placement::I:
        case Placement::III: return true;
        case Placement::IV: return level == 1;  // deepest decoder pair
        default: return false;
    }
}

void Network::build_encoder(Encoder& enc, const std::string& prefix) {
    enc.stem.emplace(store_, prefix + ".stem", BlockSpec{3, widths_[0], cfg_.normalization},
                     cfg_.seed);
    for (int i = 1; i <= NetworkConfig::depth; ++i)
        enc.downs.emplace_back(store_, prefix + ".down" + std::to_string(i),
                               BlockSpec{widths_[size_t(i - 1)], widths_[size_t(i)],
                                         cfg_.normalization},
                               cfg_.seed);
}

Network::Network(NetworkConfig cfg) : cfg_(cfg) {
    cfg_.validate();
    const int c0 = cfg_.base_width;
    widths_ = {c0, 2 * c0, 4 * c0, 8 * c0, 16 * c0};

    build_encoder(main_enc_, "main");
    for (int lvl = 1; lvl <= 4; ++lvl) {
        const int w = widths_[size_t(4 - lvl)];
        main_ups_.emplace_back(store_, "main.up" + std::to_string(lvl),
                               BlockSpec{2 * w, w, cfg_.normalization}, cfg_.seed);
        const CgmVariant v = cfg_.cgm_mask[size_t(lvl - 1)] ? cfg_.cgm : CgmVariant{};
        cgms_.emplace_back(store_, "main.cgm" + std::to_string(lvl), w, v, cfg_.seed);
        refines_.emplace_back(store_, "main.refine" + std::to_string(lvl),
                              BlockSpec{w, w, cfg_.normalization}, cfg_.seed);
    }
    main_head_ = ConvUnit::make(store_, "main.head", 1, widths_[0], 1, 1, false, cfg_.seed);

    if (cfg_.side_branch) {
        build_encoder(side_enc_, "side");
        for (int lvl = 1; lvl <= 4; ++lvl) {
            const int w = widths_[size_t(4 - lvl)];
            side_ups_.emplace_back(store_, "side.up" + std::to_string(lvl),
                                   BlockSpec{2 * w, w, cfg_.normalization}, cfg_.seed);
        }
        side_head_ = ConvUnit::make(store_, "side.head", 1, widths_[0], 1, 1, false, cfg_.seed);

        for (int lvl = 1; lvl <= 4; ++lvl) {
            if (encoder_fusion_active(lvl)) {
                fbm_enc_.emplace_back(store_, "fbm_enc" + std::to_string(lvl),
                                      widths_[size_t(lvl)], cfg_.fbm_encoder, cfg_.seed);
                fbm_enc_level_.push_back(lvl);
            }
        }
        for (int lvl = 1; lvl <= 4; ++lvl) {
            if (!decoder_fusion_active(lvl)) continue;
            const int w = widths_[size_t(4 - lvl)];
            if (cfg_.fbm_decoder == FbmVariant::DeepMaskBridge) {
                fbm_dec_deep_.emplace_back(store_, "fbm_dec" + std::to_string(lvl), w, w,
                                           cfg_.fbm_attention_rescale, cfg_.seed);
            } else {
                fbm_dec_shallow_.emplace_back(store_, "fbm_dec" + std::to_string(lvl), w,
                                              cfg_.fbm_decoder, cfg_.seed);
            }
            fbm_dec_level_.push_back(lvl);
        }
    }
}

void Network::validate_input(const Tensor& image) {
    if (image.c != 3)
        throw std::invalid_argument("forward: expected 3-channel image, got " +
                                    std::to_string(image.c));
    if (image.h < 16 || image.w < 16 || image.h % 16 != 0 || image.w % 16 != 0)
        throw std::invalid_argument("forward: spatial size " + image.shape_str() +
                                    " must be divisible by 16");
    if (!image.all_finite()) throw std::invalid_argument("forward: non-finite input values");
}

std::vector<Graph::Val> Network::run_encoder(Graph& g, Encoder& enc, Graph::Val image,
                                             TapSink& taps, const std::string& prefix) {
    std::vector<Graph::Val> feats;
    feats.push_back(enc.stem->forward(g, image));
    taps.put(prefix + "stem", feats.back());
    for (int i = 1; i <= NetworkConfig::depth; ++i) {
        feats.push_back(enc.downs[size_t(i - 1)].forward(g, feats.back()));
        taps.put(prefix + "enc" + std::to_string(i), feats.back());
    }
    return feats;
}

Network::ForwardVals Network::forward_graph(Graph& g, Graph::Val image) {
    validate_input(g.value(image));
    ForwardVals out;
    TapSink& taps = out.taps;

    std::vector<Graph::Val> main_feats = run_encoder(g, main_enc_, image, taps, "");
    std::vector<Graph::Val> side_feats;
    if (cfg_.side_branch) side_feats = run_encoder(g, side_enc_, image, taps, "side_");

    // inter-branch fusion along the encoders (one-way: side -> main)
    size_t enc_fbm_idx = 0;
    for (int lvl = 1; lvl <= 4; ++lvl) {
        if (!encoder_fusion_active(lvl)) continue;
        main_feats[size_t(lvl)] = fbm_enc_[enc_fbm_idx].forward(g, main_feats[size_t(lvl)],
                                                                side_feats[size_t(lvl)]);
        taps.put("enc" + std::to_string(lvl) + "_fused", main_feats[size_t(lvl)]);
        ++enc_fbm_idx;
    }

    Graph::Val d = main_feats[4];
    Graph::Val ds = cfg_.side_branch ? side_feats[4] : Graph::Val(-1);
    size_t dec_fbm_idx = 0;
    for (int lvl = 1; lvl <= 4; ++lvl) {
        const std::string tag = std::to_string(lvl);
        d = main_ups_[size_t(lvl - 1)].forward(g, d);
        taps.put("dec" + tag + "_up", d);
        Graph::Val skip = main_feats[size_t(4 - lvl)];
        d = cgms_[size_t(lvl - 1)].forward(g, skip, d, &taps, "cgm" + tag);
        d = refines_[size_t(lvl - 1)].forward(g, d);
        if (cfg_.side_branch) {
            ds = side_ups_[size_t(lvl - 1)].forward(g, ds);
            taps.put("side_dec" + tag, ds);
        }
        if (decoder_fusion_active(lvl)) {
            if (cfg_.fbm_decoder == FbmVariant::DeepMaskBridge)
                d = fbm_dec_deep_[dec_fbm_idx].forward(g, d, ds, skip);
            else
                d = fbm_dec_shallow_[dec_fbm_idx].forward(g, d, ds);
            ++dec_fbm_idx;
        }
        taps.put("dec" + tag, d);
    }

    out.road = g.sigmoid(main_head_->apply(g, d));
    taps.put("road_prob", out.road);
    if (cfg_.side_branch) {
        out.edge = g.sigmoid(side_head_->apply(g, ds));
        out.has_edge = true;
        taps.put("edge_prob", out.edge);
    }
    return out;
}

Prediction Network::forward(const Tensor& image, bool training) {
    Graph g(false, training);
    ForwardVals vals = forward_graph(g, g.input(image));
    Prediction pred;
    pred.road = g.value(vals.road);
    if (vals.has_edge) pred.edge = g.value(vals.edge);
    return pred;
}

Prediction Network::forward_with_taps(const Tensor& image,
                                      std::vector<std::pair<std::string, Tensor>>& taps_out) {
    Graph g(false, false);
    ForwardVals vals = forward_graph(g, g.input(image));
    taps_out.clear();
    for (const auto& [name, v] : vals.taps.taps) taps_out.emplace_back(name, g.value(v));
    Prediction pred;
    pred.road = g.value(vals.road);
    if (vals.has_edge) pred.edge = g.value(vals.edge);
    return pred;
}

}  // namespace dtnet
