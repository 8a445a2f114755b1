// Acceptance suite: nine verification gates covering gradients, shape
// sweeps, mask invariants, loss and metric point values, training sanity,
// the synthetic experiment, pipeline geometry and determinism. One
// [PASS]/[FAIL] line per criterion; exit status is the failure count.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "dtnet/trainer.hpp"

using namespace dtnet;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------------- 1
Outcome criterion_gradients() {
    auto entries = run_gradient_suite(20240817, 1e-4);
    double worst = 0.0;
    std::string worst_name;
    bool ok = true;
    for (const auto& e : entries) {
        if (!e.ok) ok = false;
        if (e.max_rel > worst) {
            worst = e.max_rel;
            worst_name = e.name;
        }
    }
    std::ostringstream d;
    d << entries.size() << " checks, worst rel " << worst << " (" << worst_name << ")";
    return {ok && entries.size() == 15, d.str()};
}

// ---------------------------------------------------------------------- 2
Outcome criterion_shape_sweep() {
    const char* cgms[] = {"base", "a", "b", "c", "d"};
    const FbmVariant encs[] = {FbmVariant::BaseConcat, FbmVariant::BaseAdd,
                               FbmVariant::MaskBridge};
    const FbmVariant decs[] = {FbmVariant::BaseConcat, FbmVariant::BaseAdd,
                               FbmVariant::MaskBridge, FbmVariant::DeepMaskBridge};
    const Placement pls[] = {Placement::None, Placement::I, Placement::II, Placement::III,
                             Placement::IV};
    Tensor image(32, 32, 3);
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<Real> u01(0.0, 1.0);
    for (Real& e : image.v) e = u01(rng);

    int combos = 0;
    for (const char* cv : cgms)
        for (FbmVariant ev : encs)
            for (FbmVariant dv : decs)
                for (Placement pl : pls) {
                    NetworkConfig cfg;
                    cfg.base_width = 2;
                    cfg.cgm = CgmVariant::parse(cv);
                    cfg.fbm_encoder = ev;
                    cfg.fbm_decoder = dv;
                    cfg.placement = pl;
                    cfg.side_branch = true;
                    cfg.seed = uint64_t(1000 + combos);
                    Network net(cfg);
                    Prediction p = net.forward(image);
                    if (p.road.h != 32 || p.road.w != 32 || !p.edge || p.edge->h != 32)
                        return {false, "bad output shape for cgm=" + std::string(cv)};
                    for (Real e : p.road.v)
                        if (!(e >= 0.0 && e <= 1.0))
                            return {false, "road value out of [0,1] for cgm=" + std::string(cv)};
                    for (Real e : p.edge->v)
                        if (!(e >= 0.0 && e <= 1.0))
                            return {false, "edge value out of [0,1] for cgm=" + std::string(cv)};
                    ++combos;
                }
    return {combos == 300, std::to_string(combos) + " combinations forwarded"};
}

// ---------------------------------------------------------------------- 3
Outcome criterion_mask_invariants() {
    std::mt19937_64 rng(99);
    const int kMaps = 1000;
    for (int i = 0; i < kMaps; ++i) {
        const int h = 2 + int(rng() % 9);
        const int w = 2 + int(rng() % 9);
        const int channels[] = {1, 2, 4, 8};
        const int c = channels[rng() % 4];

        // dyadic values keep x -> 3x exact; power-of-two channel counts
        // keep the channel mean exact
        Tensor pos(h, w, c), signed_map(h, w, c);
        for (size_t k = 0; k < pos.size(); ++k) {
            pos.v[k] = Real(rng() % 2049) / 1024.0;
            signed_map.v[k] = Real(int64_t(rng() % 4097) - 2048) / 1024.0;
        }
        pos.v[rng() % pos.size()] = 1.0;  // non-zero guarantee

        Graph g(false);
        Tensor p = g.value(salience_map(g, g.input(pos)));
        Real mx = -1.0;
        for (Real e : p.v) {
            if (!(e >= 0.0 && e <= 1.0)) return {false, "salience out of [0,1] at map " + std::to_string(i)};
            mx = std::max(mx, e);
        }
        if (std::fabs(mx - 1.0) > 2e-6)
            return {false, "salience max deviates from 1 at map " + std::to_string(i)};

        for (Real alpha : {0.5, 3.0}) {
            Tensor scaled = pos;
            for (Real& e : scaled.v) e *= alpha;
            Tensor ps = g.value(salience_map(g, g.input(scaled)));
            if (!bitwise_equal(ps, p))
                return {false, "salience scale invariance broken (alpha=" +
                                   std::to_string(alpha) + ") at map " + std::to_string(i)};
        }

        Tensor q = g.value(attention_map(g, g.input(signed_map)));
        Real sum = 0.0;
        for (Real e : q.v) {
            if (!(e > 0.0)) return {false, "attention entry not positive at map " + std::to_string(i)};
            sum += e;
        }
        if (std::fabs(sum - 1.0) > 1e-12)
            return {false, "attention sum deviates at map " + std::to_string(i)};
        Tensor negated = signed_map;
        for (Real& e : negated.v) e = -e;
        if (!bitwise_equal(g.value(attention_map(g, g.input(negated))), q))
            return {false, "attention sign sensitivity at map " + std::to_string(i)};
    }
    return {true, std::to_string(kMaps) + " maps checked"};
}

// ---------------------------------------------------------------------- 4
Outcome criterion_loss_points() {
    std::ostringstream d;
    // bce(0.5, t) = ln 2 +- 1e-9
    Tensor half(4, 4, 1);
    half.fill(0.5);
    Tensor t(4, 4, 1);
    std::mt19937_64 rng(5);
    for (Real& e : t.v) e = (rng() & 1) ? 1.0 : 0.0;
    if (std::fabs(bce_value(half, t) - std::log(2.0)) > 1e-9)
        return {false, "bce(0.5) != ln 2"};

    // focal(gamma=0, lambda=0.5) == 0.5 * bce exactly
    Tensor p(4, 4, 1);
    std::uniform_real_distribution<Real> up(0.05, 0.95);
    for (Real& e : p.v) e = up(rng);
    if (focal_value(p, t, 0.5, 0.0) != 0.5 * bce_value(p, t))
        return {false, "focal(gamma=0,lambda=0.5) != bce/2"};

    // focal single-pixel hand value
    Tensor p1(1, 1, 1), t1(1, 1, 1);
    p1.v[0] = 0.9;
    t1.v[0] = 1.0;
    if (std::fabs(focal_value(p1, t1, 0.75, 2.0) - 7.902e-4) > 1e-7)
        return {false, "focal hand value off"};

    // iou(p = t) <= 1e-9
    if (iou_value(t, t, 1e-6) > 1e-9) return {false, "iou at optimum not ~0"};

    // hybrid of perfect predictions <= 1e-5
    LossParams lp;
    std::vector<LossItem> batch = {{&t, &t, &t, &t}};
    const Real perfect = hybrid_value(batch, lp);
    if (perfect > 1e-5) return {false, "perfect hybrid " + std::to_string(perfect)};

    d << "all point values hit";
    return {true, d.str()};
}

// ---------------------------------------------------------------------- 5
Outcome criterion_metrics_oracle() {
    std::mt19937_64 rng(31);
    std::vector<Tensor> preds, targets;
    int64_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (int i = 0; i < 100; ++i) {
        Tensor p(16, 16, 1), t(16, 16, 1);
        std::uniform_real_distribution<Real> u01(0.0, 1.0);
        for (Real& e : p.v) e = u01(rng);
        for (Real& e : t.v) e = (rng() & 1) ? 1.0 : 0.0;
        // brute-force pixel loop, no shared code with the library path
        for (int y = 0; y < 16; ++y)
            for (int x = 0; x < 16; ++x) {
                const bool pr = p.at(y, x, 0) >= 0.5;
                const bool po = t.at(y, x, 0) >= 0.5;
                tp += pr && po;
                fp += pr && !po;
                fn += !pr && po;
                tn += !pr && !po;
            }
        preds.push_back(std::move(p));
        targets.push_back(std::move(t));
    }
    MetricReport micro = evaluate_set(preds, targets, AverageMode::Micro);
    const double iou = double(tp) / double(tp + fp + fn);
    const double prec = double(tp) / double(tp + fp);
    const double rec = double(tp) / double(tp + fn);
    const double f1 = 2.0 * prec * rec / (prec + rec);
    if (micro.iou != iou || micro.precision != prec || micro.recall != rec || micro.f1 != f1)
        return {false, "micro metrics differ from the pixel-loop oracle"};
    if (std::fabs(micro.f1 - 2.0 * micro.precision * micro.recall /
                                 (micro.precision + micro.recall)) > 1e-12)
        return {false, "F1 identity violated"};
    if (std::fabs(micro.iou - micro.f1 / (2.0 - micro.f1)) > 1e-12)
        return {false, "IOU identity violated"};
    return {true, "100 pairs, exact match + identities"};
}

// ---------------------------------------------------------------------- 6
RunConfig full_dtnet_run(uint64_t seed) {
    RunConfig cfg;
    cfg.network.base_width = 8;
    cfg.network.cgm = CgmVariant::parse("a");
    cfg.network.fbm_encoder = FbmVariant::MaskBridge;
    cfg.network.fbm_decoder = FbmVariant::DeepMaskBridge;
    cfg.network.placement = Placement::I;
    cfg.network.side_branch = true;
    cfg.seed = seed;
    cfg.verbose = false;
    return cfg;
}

Outcome criterion_overfit(const std::string& out_dir) {
    RunConfig cfg = full_dtnet_run(606);
    cfg.out_dir = (fs::path(out_dir) / "overfit_run").string();
    cfg.data.synth = {4, 1, 64};
    cfg.batch_size = 4;
    cfg.epochs = 500;  // one step per epoch with a full batch
    cfg.max_steps = 500;
    cfg.stop_at_loss = 0.02;  // past the 0.05 gate, for a solid train-split fit
    cfg.eval_every = 0;
    TrainResult r = train(cfg);
    Real best = 1e30;
    int64_t at = -1;
    for (size_t i = 0; i < r.step_losses.size(); ++i)
        if (r.step_losses[i] < best) {
            best = r.step_losses[i];
            at = int64_t(i) + 1;
        }

    // evaluating the fitted model on its own training split
    int64_t step = 0;
    auto net = load_checkpoint(r.checkpoint_dir, &step);
    auto train_split = load_split(cfg, "train");
    MetricReport on_train =
        evaluate_model(*net, train_split, cfg.eval_threshold, AverageMode::Macro);

    std::ostringstream d;
    d << "best L_sum " << best << " at step " << at << " of " << r.steps << ", train IOU "
      << on_train.iou;
    return {best < 0.05 && r.steps <= 500 && on_train.iou >= 0.95, d.str()};
}

// ---------------------------------------------------------------------- 7
Outcome criterion_synthetic_experiment(const std::string& out_dir) {
    const int kEpochs = 8;
    const uint64_t kSeeds[3] = {901, 902, 903};

    auto run_config = [&](bool full, uint64_t seed) {
        RunConfig cfg = full ? full_dtnet_run(seed) : RunConfig{};
        if (!full) {
            cfg.network.base_width = 8;
            cfg.seed = seed;
            cfg.verbose = false;
        }
        cfg.data.synth = {200, 50, 64};
        cfg.batch_size = 8;
        cfg.epochs = kEpochs;
        cfg.eval_every = 0;
        return cfg;
    };

    std::vector<double> full_iou, base_iou;
    for (uint64_t seed : kSeeds) {
        TrainResult rf = train(run_config(true, seed));
        full_iou.push_back(rf.final_macro.iou);
        std::printf("  [c7] seed %llu full iou %.4f\n", (unsigned long long)seed,
                    rf.final_macro.iou);
        std::fflush(stdout);
        TrainResult rb = train(run_config(false, seed));
        base_iou.push_back(rb.final_macro.iou);
        std::printf("  [c7] seed %llu baseline iou %.4f\n", (unsigned long long)seed,
                    rb.final_macro.iou);
        std::fflush(stdout);
    }
    auto median = [](std::vector<double> v) {
        std::sort(v.begin(), v.end());
        return v[v.size() / 2];
    };
    const double med_full = median(full_iou);
    const double med_base = median(base_iou);

    // ablation reports on a reduced budget (no accuracy assertion here,
    // only completeness of the emitted tables)
    RunConfig grid_base = run_config(true, 905);
    grid_base.epochs = 2;
    AblationResult cgm_grid = ablate(make_cgm_grid(grid_base));
    AblationResult fbm_grid = ablate(make_fbm_grid(grid_base));
    write_text_file((fs::path(out_dir) / "cgm_table.txt").string(), cgm_grid.table_text);
    write_text_file((fs::path(out_dir) / "cgm_series.csv").string(), cgm_grid.csv_text);
    write_text_file((fs::path(out_dir) / "fbm_table.txt").string(), fbm_grid.table_text);
    write_text_file((fs::path(out_dir) / "fbm_series.csv").string(), fbm_grid.csv_text);

    bool grids_complete = cgm_grid.rows.size() == 5 && fbm_grid.rows.size() == 13;
    for (const AblationRow& row : cgm_grid.rows) grids_complete &= !row.failed;
    for (const AblationRow& row : fbm_grid.rows) grids_complete &= !row.failed;

    std::ostringstream d;
    d << "median full " << med_full << ", median baseline " << med_base << ", grids "
      << (grids_complete ? "complete" : "incomplete");
    return {med_full >= 0.80 && med_full >= med_base && grids_complete, d.str()};
}

// ---------------------------------------------------------------------- 8
RasterPair standin_raster(int h, int w, uint64_t seed) {
    RasterPair r;
    r.image = ImageU8(h, w, 3);
    r.mask = ImageU8(h, w, 1);
    std::mt19937_64 rng(seed);
    for (size_t i = 0; i < r.image.pixels.size(); ++i) r.image.pixels[i] = uint8_t(rng());
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            r.mask.at(y, x, 0) = ((x / 37 + y / 53) % 7 == 0) ? 255 : 0;
    return r;
}

Outcome criterion_pipeline_recipes() {
    // Munich geometry: 5616x3744 source, 512 crops resized to 256
    {
        RasterPair src = standin_raster(3744, 5616, 1);
        TileSpec spec;
        spec.crop_size = 512;
        spec.resize_to = 256;
        spec.strategy = TileSpec::Strategy::Random;
        spec.count = 8;
        spec.seed = 2;
        auto tiles = tile(src, spec);
        auto tiles2 = tile(src, spec);
        if (tiles.size() != 8) return {false, "munich: wrong tile count"};
        for (size_t i = 0; i < tiles.size(); ++i) {
            const Tile& t = tiles[i];
            if (t.data.image.h != 256 || t.data.image.w != 256 || t.data.mask.h != 256)
                return {false, "munich: wrong tile size"};
            for (uint8_t m : t.data.mask.pixels)
                if (m != 0 && m != 255) return {false, "munich: non-binary resized mask"};
            if (t.offset_y != tiles2[i].offset_y || t.offset_x != tiles2[i].offset_x ||
                t.data.image.pixels != tiles2[i].data.image.pixels)
                return {false, "munich: tiling not deterministic"};
        }
    }
    // Massachusetts geometry: 1500x1500 source, 256 crops, no resize
    {
        RasterPair src = standin_raster(1500, 1500, 3);
        TileSpec spec;
        spec.crop_size = 256;
        spec.strategy = TileSpec::Strategy::Random;
        spec.count = 6;
        spec.seed = 4;
        for (const Tile& t : tile(src, spec))
            if (t.data.image.h != 256 || t.data.image.w != 256)
                return {false, "massachusetts: wrong tile size"};
    }
    // LoveDA geometry: whole 1024x1024 raster resized to 512
    {
        RasterPair src = standin_raster(1024, 1024, 5);
        TileSpec spec;
        spec.crop_size = 1024;
        spec.resize_to = 512;
        spec.strategy = TileSpec::Strategy::Grid;
        auto tiles = tile(src, spec);
        if (tiles.size() != 1 || tiles[0].data.image.h != 512 || tiles[0].data.image.w != 512)
            return {false, "loveda: wrong geometry"};
    }
    // exhaustive alignment on 64x64 rasters
    {
        RasterPair src = standin_raster(64, 64, 6);
        TileSpec spec;
        spec.crop_size = 16;
        spec.strategy = TileSpec::Strategy::Random;
        spec.count = 40;
        spec.seed = 7;
        for (const Tile& t : tile(src, spec))
            for (int y = 0; y < 16; ++y)
                for (int x = 0; x < 16; ++x) {
                    if (t.data.mask.at(y, x, 0) != src.mask.at(t.offset_y + y, t.offset_x + x, 0))
                        return {false, "alignment: mask mismatch"};
                    for (int c = 0; c < 3; ++c)
                        if (t.data.image.at(y, x, c) !=
                            src.image.at(t.offset_y + y, t.offset_x + x, c))
                            return {false, "alignment: image mismatch"};
                }
    }
    return {true, "munich 512->256, massachusetts 256, loveda 1024->512, alignment exhaustive"};
}

// ---------------------------------------------------------------------- 9
Outcome criterion_determinism(const std::string& out_dir) {
    // (a) bitwise-identical initial parameters
    NetworkConfig ncfg = full_dtnet_run(42).network;
    ncfg.seed = 42;
    Network n1(ncfg), n2(ncfg);
    auto i1 = n1.params().all().begin();
    auto i2 = n2.params().all().begin();
    for (; i1 != n1.params().all().end(); ++i1, ++i2)
        if (i1->value != i2->value) return {false, "initial parameters differ"};

    // (b) identical metric histories
    RunConfig cfg = full_dtnet_run(77);
    cfg.data.synth = {12, 6, 32};
    cfg.network.base_width = 4;
    cfg.batch_size = 4;
    cfg.epochs = 3;
    cfg.eval_every = 1;
    TrainResult a = train(cfg);
    TrainResult b = train(cfg);
    if (a.step_losses != b.step_losses) return {false, "step losses differ between runs"};
    for (size_t i = 0; i < a.history.size(); ++i) {
        if (a.history[i].train_loss != b.history[i].train_loss ||
            a.history[i].test.iou != b.history[i].test.iou ||
            a.history[i].test.f1 != b.history[i].test.f1)
            return {false, "metric history differs between runs"};
    }

    // (c) checkpoint round trip: evaluation unchanged, exactly
    cfg.out_dir = (fs::path(out_dir) / "det_run").string();
    TrainResult c = train(cfg);
    auto test_set = load_split(cfg, "test");
    int64_t step = 0;
    auto net = load_checkpoint(c.checkpoint_dir, &step);
    MetricReport reloaded = evaluate_model(*net, test_set, cfg.eval_threshold, AverageMode::Macro);
    MetricReport again = evaluate_model(*net, test_set, cfg.eval_threshold, AverageMode::Macro);
    if (step != c.steps) return {false, "step counter not preserved"};
    if (reloaded.iou != c.final_macro.iou || reloaded.f1 != c.final_macro.f1 ||
        reloaded.recall != c.final_macro.recall ||
        reloaded.precision != c.final_macro.precision)
        return {false, "round-trip evaluation differs"};
    if (reloaded.iou != again.iou) return {false, "repeated evaluation differs"};
    return {true, "params, histories and round-trip evaluations identical"};
}

}  // namespace

int main(int argc, char** argv) {
    int only = 0;
    std::string out_dir = "acceptance_out";
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) only = std::atoi(argv[++i]);
        if (std::strcmp(argv[i], "--out") == 0 && i + 1 < argc) out_dir = argv[++i];
    }
    fs::create_directories(out_dir);

    struct Entry {
        int id;
        const char* name;
        std::function<Outcome()> run;
    };
    const std::vector<Entry> entries = {
        {1, "gradient suite (blocks, fusion variants, losses)", criterion_gradients},
        {2, "shape/range sweep over 300 configurations", criterion_shape_sweep},
        {3, "salience/attention mask invariants on 1000 maps", criterion_mask_invariants},
        {4, "loss point checks", criterion_loss_points},
        {5, "metrics against the brute-force oracle", criterion_metrics_oracle},
        {6, "overfit sanity within 500 steps", [&] { return criterion_overfit(out_dir); }},
        {7, "synthetic experiment and ablation reports",
         [&] { return criterion_synthetic_experiment(out_dir); }},
        {8, "pipeline recipe geometry", criterion_pipeline_recipes},
        {9, "seed determinism and checkpoint round trip",
         [&] { return criterion_determinism(out_dir); }},
    };

    int failures = 0;
    for (const Entry& e : entries) {
        if (only != 0 && e.id != only) continue;
        auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = e.run();
        } catch (const std::exception& ex) {
            o = {false, std::string("exception: ") + ex.what()};
        }
        std::printf("[%s] criterion %d: %s (%.1fs) - %s\n", o.pass ? "PASS" : "FAIL", e.id,
                    e.name, seconds_since(t0), o.detail.c_str());
        std::fflush(stdout);
        if (!o.pass) ++failures;
    }
    return failures;
}
