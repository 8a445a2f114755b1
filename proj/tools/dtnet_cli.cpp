// Command-line front end: dataset synthesis and preparation, training,
// evaluation, ablation grids, feature heat-map export and the
// finite-difference gradient suite.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "dtnet/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace dtnet;

namespace {

// RunConfig <-> JSON, field names mirror the struct.
RunConfig run_config_from_json(const json& j) {
    RunConfig cfg;
    if (j.contains("network")) {
        const json& n = j.at("network");
        if (n.contains("base_width")) cfg.network.base_width = n.at("base_width").get<int>();
        if (n.contains("cgm")) cfg.network.cgm = CgmVariant::parse(n.at("cgm").get<std::string>());
        if (n.contains("fbm_encoder"))
            cfg.network.fbm_encoder = parse_fbm_variant(n.at("fbm_encoder").get<std::string>());
        if (n.contains("fbm_decoder"))
            cfg.network.fbm_decoder = parse_fbm_variant(n.at("fbm_decoder").get<std::string>());
        if (n.contains("placement"))
            cfg.network.placement = parse_placement(n.at("placement").get<std::string>());
        if (n.contains("side_branch")) cfg.network.side_branch = n.at("side_branch").get<bool>();
        if (n.contains("normalization"))
            cfg.network.normalization = n.at("normalization").get<bool>();
        if (n.contains("fbm_attention_rescale"))
            cfg.network.fbm_attention_rescale = n.at("fbm_attention_rescale").get<bool>();
        if (n.contains("cgm_mask")) {
            auto mask = n.at("cgm_mask").get<std::vector<bool>>();
            if (mask.size() != 4) throw std::invalid_argument("config: cgm_mask needs 4 flags");
            for (int i = 0; i < 4; ++i) cfg.network.cgm_mask[size_t(i)] = mask[size_t(i)];
        }
    }
    if (j.contains("loss")) {
        const json& l = j.at("loss");
        if (l.contains("a1")) cfg.loss.a1 = l.at("a1").get<Real>();
        if (l.contains("a2")) cfg.loss.a2 = l.at("a2").get<Real>();
        if (l.contains("a3")) cfg.loss.a3 = l.at("a3").get<Real>();
        if (l.contains("lambda")) cfg.loss.lambda = l.at("lambda").get<Real>();
        if (l.contains("gamma")) cfg.loss.gamma = l.at("gamma").get<Real>();
        if (l.contains("stabilizer")) cfg.loss.stabilizer = l.at("stabilizer").get<Real>();
        if (l.contains("iou_log_form")) cfg.loss.iou_log_form = l.at("iou_log_form").get<bool>();
    }
    if (j.contains("optimizer")) {
        const json& o = j.at("optimizer");
        if (o.contains("kind")) cfg.optimizer.kind = o.at("kind").get<std::string>();
        if (o.contains("learning_rate"))
            cfg.optimizer.learning_rate = o.at("learning_rate").get<Real>();
        if (o.contains("schedule")) cfg.optimizer.schedule = o.at("schedule").get<std::string>();
    }
    if (j.contains("data")) {
        const json& d = j.at("data");
        if (d.contains("use_synthetic")) cfg.data.use_synthetic = d.at("use_synthetic").get<bool>();
        if (d.contains("manifest_root")) {
            cfg.data.manifest_root = d.at("manifest_root").get<std::string>();
            if (!d.contains("use_synthetic")) cfg.data.use_synthetic = false;
        }
        if (d.contains("synth")) {
            const json& s = d.at("synth");
            if (s.contains("n_train")) cfg.data.synth.n_train = s.at("n_train").get<int>();
            if (s.contains("n_test")) cfg.data.synth.n_test = s.at("n_test").get<int>();
            if (s.contains("size")) cfg.data.synth.size = s.at("size").get<int>();
        }
    }
    if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int>();
    if (j.contains("epochs")) cfg.epochs = j.at("epochs").get<int>();
    if (j.contains("max_steps")) cfg.max_steps = j.at("max_steps").get<int64_t>();
    if (j.contains("stop_at_loss")) cfg.stop_at_loss = j.at("stop_at_loss").get<Real>();
    if (j.contains("eval_threshold")) cfg.eval_threshold = j.at("eval_threshold").get<Real>();
    if (j.contains("eval_every")) cfg.eval_every = j.at("eval_every").get<int>();
    if (j.contains("out_dir")) cfg.out_dir = j.at("out_dir").get<std::string>();
    if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
    return cfg;
}

json run_config_to_json(const RunConfig& cfg) {
    json j;
    j["network"] = {{"base_width", cfg.network.base_width},
                    {"cgm", cfg.network.cgm.str()},
                    {"fbm_encoder", fbm_variant_str(cfg.network.fbm_encoder)},
                    {"fbm_decoder", fbm_variant_str(cfg.network.fbm_decoder)},
                    {"placement", placement_str(cfg.network.placement)},
                    {"side_branch", cfg.network.side_branch},
                    {"normalization", cfg.network.normalization},
                    {"fbm_attention_rescale", cfg.network.fbm_attention_rescale},
                    {"cgm_mask", std::vector<bool>(cfg.network.cgm_mask.begin(),
                                                   cfg.network.cgm_mask.end())}};
    j["loss"] = {{"a1", cfg.loss.a1},           {"a2", cfg.loss.a2},
                 {"a3", cfg.loss.a3},           {"lambda", cfg.loss.lambda},
                 {"gamma", cfg.loss.gamma},     {"stabilizer", cfg.loss.stabilizer},
                 {"iou_log_form", cfg.loss.iou_log_form}};
    j["optimizer"] = {{"kind", cfg.optimizer.kind},
                      {"learning_rate", cfg.optimizer.learning_rate},
                      {"schedule", cfg.optimizer.schedule}};
    j["data"] = {{"use_synthetic", cfg.data.use_synthetic},
                 {"manifest_root", cfg.data.manifest_root},
                 {"synth",
                  {{"n_train", cfg.data.synth.n_train},
                   {"n_test", cfg.data.synth.n_test},
                   {"size", cfg.data.synth.size}}}};
    j["batch_size"] = cfg.batch_size;
    j["epochs"] = cfg.epochs;
    j["max_steps"] = cfg.max_steps;
    j["stop_at_loss"] = cfg.stop_at_loss;
    j["eval_threshold"] = cfg.eval_threshold;
    j["eval_every"] = cfg.eval_every;
    j["out_dir"] = cfg.out_dir;
    j["seed"] = cfg.seed;
    return j;
}

// Every RunConfig field is reachable by flag; a --config JSON file
// supplies defaults and flags override it.
struct RunFlags {
    std::string config_path;
    CLI::App* cmd = nullptr;

    void attach(CLI::App* app, RunConfig& cfg, bool seed_required) {
        cmd = app;
        app->add_option("--config", config_path, "JSON config file (flags override it)");
        app->add_option("--base-width", cfg.network.base_width, "stem channel width");
        app->add_option_function<std::string>(
            "--cgm", [&cfg](const std::string& s) { cfg.network.cgm = CgmVariant::parse(s); },
            "cross-layer fusion variant: base|a|b|c|d");
        app->add_option_function<std::string>(
            "--fbm-encoder",
            [&cfg](const std::string& s) { cfg.network.fbm_encoder = parse_fbm_variant(s); },
            "encoder bridge variant: base_a|base_b|c");
        app->add_option_function<std::string>(
            "--fbm-decoder",
            [&cfg](const std::string& s) { cfg.network.fbm_decoder = parse_fbm_variant(s); },
            "decoder bridge variant: base_a|base_b|c|d");
        app->add_option_function<std::string>(
            "--placement",
            [&cfg](const std::string& s) { cfg.network.placement = parse_placement(s); },
            "fusion placement: none|I|II|III|IV");
        app->add_flag("--side-branch,!--no-side-branch", cfg.network.side_branch,
                      "enable the edge-detection side branch");
        app->add_flag("--normalization,!--no-normalization", cfg.network.normalization,
                      "per-channel normalization inside blocks");
        app->add_flag("--fbm-attention-rescale", cfg.network.fbm_attention_rescale,
                      "rescale the deep-bridge attention map by H*W");
        app->add_option("--a1", cfg.loss.a1, "area cross-entropy weight");
        app->add_option("--a2", cfg.loss.a2, "area soft-Jaccard weight");
        app->add_option("--a3", cfg.loss.a3, "edge focal weight");
        app->add_option("--lambda", cfg.loss.lambda, "focal positive/negative balance");
        app->add_option("--gamma", cfg.loss.gamma, "focal focusing exponent");
        app->add_option("--stabilizer", cfg.loss.stabilizer, "soft-Jaccard stabilizer");
        app->add_flag("--iou-log-form", cfg.loss.iou_log_form, "minimize -ln(J) instead of 1-J");
        app->add_option("--optimizer", cfg.optimizer.kind, "adam|sgd");
        app->add_option("--lr", cfg.optimizer.learning_rate, "learning rate");
        app->add_option("--schedule", cfg.optimizer.schedule, "none|cosine");
        app->add_option("--batch-size", cfg.batch_size, "minibatch size");
        app->add_option("--epochs", cfg.epochs, "training epochs");
        app->add_option("--max-steps", cfg.max_steps, "stop after this many steps (0 = off)");
        app->add_option("--stop-at-loss", cfg.stop_at_loss,
                        "early-stop once a batch loss drops below (0 = off)");
        app->add_option("--eval-threshold", cfg.eval_threshold, "binarization threshold");
        app->add_option("--eval-every", cfg.eval_every, "epochs between test evaluations");
        app->add_option("--data-root", cfg.data.manifest_root,
                        "dataset root (switches off synthetic data)");
        app->add_option("--synth-train", cfg.data.synth.n_train, "synthetic training samples");
        app->add_option("--synth-test", cfg.data.synth.n_test, "synthetic test samples");
        app->add_option("--synth-size", cfg.data.synth.size, "synthetic sample size");
        app->add_option("--out", cfg.out_dir, "output directory");
        auto* seed = app->add_option("--seed", cfg.seed, "master seed");
        if (seed_required) seed->required();
    }

    // Re-parse order: JSON config first, then flags on top.
    RunConfig finalize(CLI::App& app, int argc, char** argv, RunConfig flag_cfg) {
        if (config_path.empty()) {
            if (!flag_cfg.data.manifest_root.empty()) flag_cfg.data.use_synthetic = false;
            return flag_cfg;
        }
        std::ifstream in(config_path);
        if (!in) throw std::runtime_error("cannot open config " + config_path);
        json j = json::parse(in);
        RunConfig cfg = run_config_from_json(j);
        // replay the command line over the file-provided defaults
        RunFlags replay;
        CLI::App app2{"replay"};
        app2.allow_extras();
        auto* sub = app2.add_subcommand(cmd->get_name());
        sub->allow_extras();
        replay.attach(sub, cfg, false);
        app2.parse(argc, argv);
        if (!cfg.data.manifest_root.empty() && sub->count("--data-root")) {
            cfg.data.use_synthetic = false;
        }
        return cfg;
    }
};

int cmd_synth(int n, int size, uint64_t seed, double train_fraction, const std::string& out) {
    auto samples = synth_generate(n, size, seed);
    const int n_train = int(std::llround(train_fraction * n));
    std::vector<Sample> train(samples.begin(), samples.begin() + n_train);
    std::vector<Sample> test(samples.begin() + n_train, samples.end());
    if (!train.empty()) save_dataset(out, "train", train);
    if (!test.empty()) save_dataset(out, "test", test);
    std::printf("wrote %zu train / %zu test samples under %s\n", train.size(), test.size(),
                out.c_str());
    return 0;
}

int cmd_prep(const std::string& input_manifest, const std::string& recipe_name, int crop,
             int resize, int count, int edge_width, double train_fraction, uint64_t seed,
             const std::string& out) {
    PrepRecipe recipe;
    recipe.tile.crop_size = crop;
    recipe.tile.resize_to = resize;
    recipe.tile.strategy =
        count > 0 ? TileSpec::Strategy::Random : TileSpec::Strategy::Grid;
    recipe.tile.count = count;
    recipe.tile.seed = seed;
    recipe.edge_width = edge_width;
    recipe.train_fraction = train_fraction;
    recipe.split_seed = mix_seed(seed, 0x5715);
    if (recipe_name == "munich") {
        recipe.tile.crop_size = 512;
        recipe.tile.resize_to = 256;
        recipe.tile.strategy = TileSpec::Strategy::Random;
        if (count <= 0) recipe.tile.count = 27;
    } else if (recipe_name == "massachusetts") {
        recipe.tile.crop_size = 256;
        recipe.tile.resize_to = 0;
        recipe.tile.strategy = TileSpec::Strategy::Random;
        if (count <= 0) recipe.tile.count = 6;
    } else if (recipe_name == "loveda") {
        recipe.tile.crop_size = 1024;
        recipe.tile.resize_to = 512;
        recipe.tile.strategy = TileSpec::Strategy::Grid;
        recipe.tile.count = 0;
    } else if (!recipe_name.empty()) {
        throw std::invalid_argument("unknown recipe '" + recipe_name +
                                    "' (munich|massachusetts|loveda)");
    }

    // input manifest: one "image.png mask.png" pair per line
    std::ifstream in(input_manifest);
    if (!in) throw std::runtime_error("cannot open raster manifest " + input_manifest);
    const fs::path base = fs::path(input_manifest).parent_path();
    std::vector<RasterPair> rasters;
    std::string img, msk;
    while (in >> img >> msk) {
        RasterPair r;
        r.image = read_png((base / img).string());
        r.mask = read_png((base / msk).string());
        rasters.push_back(std::move(r));
    }
    PrepResult res = prep_dataset(rasters, recipe, out);
    std::printf("prepared %d train / %d test tiles under %s\n", res.train_count, res.test_count,
                out.c_str());
    return 0;
}

int cmd_eval(const std::string& checkpoint_dir, const std::string& data_root,
             const std::string& split, Real threshold, const std::string& mode_name,
             const std::string& out) {
    auto net = load_checkpoint(checkpoint_dir);
    auto samples = load_samples(load_manifest(data_root, split));
    const AverageMode mode = mode_name == "micro" ? AverageMode::Micro : AverageMode::Macro;
    MetricReport r = evaluate_model(*net, samples, threshold, mode);
    std::string table = report_header("split") + "\n" + report_row(split, r) + "\n";
    std::fputs(table.c_str(), stdout);
    if (!out.empty()) {
        write_text_file((fs::path(out) / "metrics.txt").string(), table);
        write_text_file((fs::path(out) / "metrics.kv").string(), report_kv(r, split + "."));
    }
    return 0;
}

int cmd_heatmaps(const std::string& checkpoint_dir, const std::string& data_root,
                 const std::string& split, int index, std::vector<std::string> layers,
                 bool list_only, const std::string& out) {
    auto net = load_checkpoint(checkpoint_dir);
    if (list_only) {
        for (const std::string& n : list_tap_names(*net)) std::printf("%s\n", n.c_str());
        return 0;
    }
    auto samples = load_samples(load_manifest(data_root, split));
    if (index < 0 || size_t(index) >= samples.size())
        throw std::invalid_argument("sample index out of range");
    auto files = export_heatmaps(*net, samples[size_t(index)], layers, out);
    for (const std::string& f : files) std::printf("%s\n", f.c_str());
    return 0;
}

int cmd_gradcheck(uint64_t seed) {
    auto entries = run_gradient_suite(seed);
    bool all_ok = true;
    for (const auto& e : entries) {
        std::printf("%-16s max_rel %.3e  small_abs %.3e  %s\n", e.name.c_str(), e.max_rel,
                    e.max_abs_small, e.ok ? "ok" : "FAIL");
        all_ok = all_ok && e.ok;
    }
    std::printf("gradient suite: %s\n", all_ok ? "PASS" : "FAIL");
    return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"dual-task road segmentation laboratory"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
    int synth_n = 250, synth_size = 64;
    uint64_t synth_seed = 0;
    double synth_frac = 0.8;
    std::string synth_out = "dataset";
    synth->add_option("--n", synth_n, "total samples");
    synth->add_option("--size", synth_size, "sample size (multiple of 16)");
    synth->add_option("--seed", synth_seed, "generator seed")->required();
    synth->add_option("--train-fraction", synth_frac, "train share of samples");
    synth->add_option("--out", synth_out, "dataset root")->required();

    // prep
    auto* prep = app.add_subcommand("prep", "tile and resize rasters into a dataset");
    std::string prep_manifest, prep_recipe, prep_out = "dataset";
    int prep_crop = 256, prep_resize = 0, prep_count = 0, prep_edge = 2;
    double prep_frac = 0.9;
    uint64_t prep_seed = 0;
    prep->add_option("--rasters", prep_manifest, "manifest of 'image.png mask.png' pairs")
        ->required();
    prep->add_option("--recipe", prep_recipe, "named recipe: munich|massachusetts|loveda");
    prep->add_option("--crop", prep_crop, "crop size");
    prep->add_option("--resize", prep_resize, "resize target (0 = none)");
    prep->add_option("--count", prep_count, "random crops per raster (0 = grid)");
    prep->add_option("--edge-width", prep_edge, "edge label width");
    prep->add_option("--train-fraction", prep_frac, "train share of tiles");
    prep->add_option("--seed", prep_seed, "tiling/split seed");
    prep->add_option("--out", prep_out, "dataset root")->required();

    // train
    auto* train_cmd = app.add_subcommand("train", "train a network");
    RunConfig train_cfg;
    RunFlags train_flags;
    train_flags.attach(train_cmd, train_cfg, /*seed_required=*/true);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint on a dataset split");
    std::string eval_ckpt, eval_root, eval_split = "test", eval_mode = "macro", eval_out;
    Real eval_thr = 0.5;
    eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
    eval_cmd->add_option("--data-root", eval_root, "dataset root")->required();
    eval_cmd->add_option("--split", eval_split, "train|test");
    eval_cmd->add_option("--threshold", eval_thr, "binarization threshold");
    eval_cmd->add_option("--mode", eval_mode, "macro|micro");
    eval_cmd->add_option("--out", eval_out, "write metrics files here");

    // ablate
    auto* ablate_cmd = app.add_subcommand("ablate", "run an ablation grid");
    RunConfig ablate_cfg;
    ablate_cfg.epochs = 6;
    ablate_cfg.eval_every = 0;
    RunFlags ablate_flags;
    std::string grid_name = "cgm";
    ablate_cmd->add_option("--grid", grid_name, "cgm|fbm|span");
    ablate_flags.attach(ablate_cmd, ablate_cfg, /*seed_required=*/true);

    // heatmaps
    auto* heat = app.add_subcommand("heatmaps", "export feature heat maps");
    std::string heat_ckpt, heat_root, heat_split = "test", heat_out = "heatmaps";
    std::vector<std::string> heat_layers;
    int heat_index = 0;
    bool heat_list = false;
    heat->add_option("--checkpoint", heat_ckpt, "checkpoint directory")->required();
    heat->add_option("--data-root", heat_root, "dataset root");
    heat->add_option("--split", heat_split, "train|test");
    heat->add_option("--index", heat_index, "sample index");
    heat->add_option("--layers", heat_layers, "tap names (see --list)")->delimiter(',');
    heat->add_flag("--list", heat_list, "list available tap names and exit");
    heat->add_option("--out", heat_out, "output directory");

    // gradcheck
    auto* grad = app.add_subcommand("gradcheck", "run the finite-difference gradient suite");
    uint64_t grad_seed = 1;
    grad->add_option("--seed", grad_seed, "suite seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(synth_n, synth_size, synth_seed, synth_frac, synth_out);
        if (prep->parsed())
            return cmd_prep(prep_manifest, prep_recipe, prep_crop, prep_resize, prep_count,
                            prep_edge, prep_frac, prep_seed, prep_out);
        if (train_cmd->parsed()) {
            RunConfig cfg = train_flags.finalize(app, argc, argv, train_cfg);
            if (cfg.out_dir.empty()) cfg.out_dir = "run";
            write_text_file((fs::path(cfg.out_dir) / "run_config.json").string(),
                            run_config_to_json(cfg).dump(2) + "\n");
            TrainResult r = train(cfg);
            std::printf("%s\n", report_header("split").c_str());
            std::printf("%s\n", report_row("test (macro)", r.final_macro).c_str());
            std::printf("checkpoint: %s\n", r.checkpoint_dir.c_str());
            return 0;
        }
        if (eval_cmd->parsed())
            return cmd_eval(eval_ckpt, eval_root, eval_split, eval_thr, eval_mode, eval_out);
        if (ablate_cmd->parsed()) {
            RunConfig cfg = ablate_flags.finalize(app, argc, argv, ablate_cfg);
            std::string out_dir = cfg.out_dir.empty() ? "ablation" : cfg.out_dir;
            cfg.out_dir.clear();
            std::vector<AblationDelta> grid;
            if (grid_name == "cgm")
                grid = make_cgm_grid(cfg);
            else if (grid_name == "fbm")
                grid = make_fbm_grid(cfg);
            else if (grid_name == "span")
                grid = make_span_grid(cfg);
            else
                throw std::invalid_argument("unknown grid '" + grid_name + "' (cgm|fbm|span)");
            AblationResult res = ablate(grid);
            std::fputs(res.table_text.c_str(), stdout);
            write_text_file((fs::path(out_dir) / (grid_name + "_table.txt")).string(),
                            res.table_text);
            write_text_file((fs::path(out_dir) / (grid_name + "_series.csv")).string(),
                            res.csv_text);
            return 0;
        }
        if (heat->parsed())
            return cmd_heatmaps(heat_ckpt, heat_root, heat_split, heat_index, heat_layers,
                                heat_list, heat_out);
        if (grad->parsed()) return cmd_gradcheck(grad_seed);
    } catch (const std::exception& ex) {
        std::fprintf(stderr, "error: %s\n", ex.what());
        return 1;
    }
    return 0;
}
