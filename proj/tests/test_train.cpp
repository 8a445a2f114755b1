#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "dtnet/trainer.hpp"
#include "gradcheck.hpp"

using namespace dtnet;
using namespace dtnet::testutil;

namespace {

RunConfig tiny_run(uint64_t seed) {
    RunConfig cfg;
    cfg.network.base_width = 4;
    cfg.network.cgm = CgmVariant::parse("a");
    cfg.network.fbm_encoder = FbmVariant::MaskBridge;
    cfg.network.fbm_decoder = FbmVariant::DeepMaskBridge;
    cfg.network.placement = Placement::I;
    cfg.network.side_branch = true;
    cfg.data.synth = {6, 3, 32};
    cfg.batch_size = 3;
    cfg.epochs = 2;
    cfg.eval_every = 1;
    cfg.seed = seed;
    cfg.verbose = false;
    return cfg;
}

std::filesystem::path temp_dir(const char* tag) {
    auto p = std::filesystem::temp_directory_path() / (std::string("dtnet_train_") + tag);
    std::filesystem::remove_all(p);
    return p;
}

}  // namespace

TEST_CASE("training runs, logs history and is seed-deterministic") {
    TrainResult a = train(tiny_run(5));
    TrainResult b = train(tiny_run(5));
    REQUIRE(a.history.size() == 2);
    REQUIRE(a.step_losses.size() == b.step_losses.size());
    for (size_t i = 0; i < a.step_losses.size(); ++i) CHECK(a.step_losses[i] == b.step_losses[i]);
    for (size_t i = 0; i < a.history.size(); ++i) {
        CHECK(a.history[i].train_loss == b.history[i].train_loss);
        CHECK(a.history[i].test.iou == b.history[i].test.iou);
    }
    TrainResult c = train(tiny_run(6));
    CHECK(a.step_losses[0] != c.step_losses[0]);
}

TEST_CASE("single-task run trains without the focal term") {
    RunConfig cfg = tiny_run(7);
    cfg.network = NetworkConfig{};
    cfg.network.base_width = 4;
    cfg.network.seed = 7;
    TrainResult r = train(cfg);
    CHECK(r.steps == 4);
    for (Real l : r.step_losses) CHECK(std::isfinite(l));
}

TEST_CASE("loss dives on a tiny overfit problem") {
    RunConfig cfg = tiny_run(11);
    cfg.data.synth = {2, 1, 32};
    cfg.batch_size = 2;
    cfg.epochs = 120;
    cfg.eval_every = 0;
    cfg.optimizer.learning_rate = 3e-3;
    TrainResult r = train(cfg);
    const Real first = r.step_losses.front();
    Real best = 1e30;
    for (Real l : r.step_losses) best = std::min(best, l);
    CHECK(best < 0.35 * first);
}

TEST_CASE("divergence aborts with a diagnostic") {
    RunConfig cfg = tiny_run(13);
    cfg.loss.a1 = std::nan("");
    CHECK_THROWS_AS(train(cfg), TrainingDiverged);
}

TEST_CASE("training writes checkpoint, history and metric files") {
    auto dir = temp_dir("out");
    RunConfig cfg = tiny_run(17);
    cfg.out_dir = dir.string();
    TrainResult r = train(cfg);
    CHECK(std::filesystem::exists(dir / "history.csv"));
    CHECK(std::filesystem::exists(dir / "metrics.txt"));
    CHECK(std::filesystem::exists(dir / "metrics.kv"));
    CHECK(std::filesystem::exists(dir / "checkpoint" / "config.txt"));
    CHECK(std::filesystem::exists(dir / "checkpoint" / "params.bin"));
    CHECK(std::filesystem::exists(dir / "checkpoint" / "step.txt"));

    // checkpoint round trip: evaluation before and after save/load agree exactly
    int64_t step = 0;
    auto net = load_checkpoint(r.checkpoint_dir, &step);
    CHECK(step == r.steps);
    auto test_set = load_split(cfg, "test");
    MetricReport reloaded = evaluate_model(*net, test_set, cfg.eval_threshold, AverageMode::Macro);
    CHECK(reloaded.iou == r.final_macro.iou);
    CHECK(reloaded.f1 == r.final_macro.f1);
    CHECK(reloaded.precision == r.final_macro.precision);
    CHECK(reloaded.recall == r.final_macro.recall);

    // tampering with a shape is rejected
    auto bad = std::make_unique<Network>([&] {
        NetworkConfig c = read_checkpoint_config(r.checkpoint_dir);
        c.base_width *= 2;
        return c;
    }());
    CHECK_THROWS_AS(load_checkpoint_params(r.checkpoint_dir, *bad), std::runtime_error);
    std::filesystem::remove_all(dir);
}

TEST_CASE("heatmap export: count, degenerate map, recomputation oracle") {
    auto dir = temp_dir("heat");
    RunConfig cfg = tiny_run(19);
    NetworkConfig net_cfg = cfg.network;
    net_cfg.seed = 19;
    Network net(net_cfg);
    Sample sample = synth_generate(1, 32, 3)[0];

    auto files = export_heatmaps(net, sample,
                                 {"cgm1.d_in", "cgm1.e_in", "cgm1.d_enh", "cgm1.e_enh"},
                                 dir.string());
    CHECK(files.size() == 4);
    for (const std::string& f : files) CHECK(std::filesystem::exists(f));

    // independent recomputation of one exported map
    std::vector<std::pair<std::string, Tensor>> taps;
    net.forward_with_taps(sample.image, taps);
    const Tensor* feat = nullptr;
    for (auto& [name, t] : taps)
        if (name == "cgm1.d_in") feat = &t;
    REQUIRE(feat != nullptr);
    std::vector<double> mean(size_t(feat->h) * feat->w, 0.0);
    for (int p = 0; p < feat->h * feat->w; ++p) {
        double acc = 0.0;
        for (int c = 0; c < feat->c; ++c) acc += feat->v[size_t(p) * feat->c + c];
        mean[size_t(p)] = acc / feat->c;
    }
    const double lo = *std::min_element(mean.begin(), mean.end());
    const double hi = *std::max_element(mean.begin(), mean.end());
    ImageU8 img = read_png(files[0]);
    REQUIRE(img.pixels.size() == mean.size());
    for (size_t i = 0; i < mean.size(); ++i)
        CHECK(img.pixels[i] == uint8_t(std::lround(255.0 * (mean[i] - lo) / (hi - lo))));

    CHECK_THROWS_AS(export_heatmaps(net, sample, {"not_a_layer"}, dir.string()),
                    std::invalid_argument);

    // constant feature map -> uniform mid-gray image
    Network net2(net_cfg);
    Param* head_w = net2.params().find("main.head.w");
    REQUIRE(head_w != nullptr);
    std::fill(head_w->value.begin(), head_w->value.end(), 0.0);
    auto const_files = export_heatmaps(net2, sample, {"road_prob"}, dir.string());
    ImageU8 flat = read_png(const_files[0]);
    for (uint8_t px : flat.pixels) CHECK(px == 128);

    std::filesystem::remove_all(dir);
}

TEST_CASE("tap names cover encoder, fusion and prediction layers") {
    NetworkConfig cfg = tiny_run(23).network;
    cfg.seed = 23;
    Network net(cfg);
    auto names = list_tap_names(net);
    auto has = [&](const char* n) {
        return std::find(names.begin(), names.end(), n) != names.end();
    };
    CHECK(has("stem"));
    CHECK(has("enc4"));
    CHECK(has("side_enc4"));
    CHECK(has("cgm1.d_in"));
    CHECK(has("cgm4.out"));
    CHECK(has("dec4"));
    CHECK(has("road_prob"));
    CHECK(has("edge_prob"));
}

TEST_CASE("gradient suite covers blocks, fusion modules and losses") {
    auto entries = run_gradient_suite(123);
    REQUIRE(entries.size() == size_t(3 + 5 + 4 + 3));
    for (const auto& e : entries) {
        CAPTURE(e.name);
        CAPTURE(e.max_rel);
        CHECK(e.ok);
    }
}

TEST_CASE("degenerate ablation grid equals a single train run") {
    RunConfig base = tiny_run(29);
    auto result = ablate({{"solo", base}});
    REQUIRE(result.rows.size() == 1);
    CHECK_FALSE(result.rows[0].failed);
    TrainResult direct = train(base);
    CHECK(result.rows[0].report.iou == direct.final_macro.iou);
    CHECK(result.rows[0].report.f1 == direct.final_macro.f1);
    CHECK(result.table_text.find("solo") != std::string::npos);
    CHECK(result.csv_text.find("config,iou,f1,recall,precision,status") != std::string::npos);
}

TEST_CASE("ablation grids have the expected row sets") {
    RunConfig base = tiny_run(31);
    auto cgm_grid = make_cgm_grid(base);
    REQUIRE(cgm_grid.size() == 5);
    CHECK(cgm_grid[0].name == "cgm=base");
    for (const auto& d : cgm_grid) CHECK_FALSE(d.cfg.network.side_branch);

    auto fbm_grid = make_fbm_grid(base);
    REQUIRE(fbm_grid.size() == 13);  // 3 variants x 4 placements + proposed pairing
    CHECK(fbm_grid.back().name == "fbm=c,d placement=I");
    for (const auto& d : fbm_grid) {
        CHECK(d.cfg.network.side_branch);
        Network net(d.cfg.network);  // every delta must be buildable
    }

    auto span_grid = make_span_grid(base);
    REQUIRE(span_grid.size() == 4);
    CHECK(span_grid[0].name == "layers=1");
    CHECK(span_grid[3].name == "layers=1-4");
    CHECK(span_grid[1].cfg.network.cgm_mask == std::array<bool, 4>{true, true, false, false});
}

TEST_CASE("a failing grid entry is recorded and the rest continue") {
    RunConfig good = tiny_run(37);
    RunConfig bad = good;
    bad.loss.a1 = std::nan("");
    auto result = ablate({{"bad", bad}, {"good", good}});
    REQUIRE(result.rows.size() == 2);
    CHECK(result.rows[0].failed);
    CHECK_FALSE(result.rows[1].failed);
    CHECK(result.table_text.find("FAILED") != std::string::npos);
}
