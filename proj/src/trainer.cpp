#include "dtnet/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace fs = std::filesystem;

namespace dtnet {

namespace {

constexpr uint64_t kTagNet = 0x6e657477;      // network init
constexpr uint64_t kTagShuffle = 0x73687566;  // epoch shuffles
constexpr uint64_t kTagTrain = 0x74726169;    // synthetic train split
constexpr uint64_t kTagTest = 0x74657374;     // synthetic test split

struct Adam {
    Real lr;
    Real beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    int64_t t = 0;

    void step(ParamStore& store, Real lr_now) {
        ++t;
        const Real bc1 = 1.0 - std::pow(beta1, Real(t));
        const Real bc2 = 1.0 - std::pow(beta2, Real(t));
        for (Param& p : store.all()) {
            if (!p.trainable) continue;
            for (size_t i = 0; i < p.value.size(); ++i) {
                const Real g = p.grad[i];
                p.adam_m[i] = beta1 * p.adam_m[i] + (1.0 - beta1) * g;
                p.adam_v[i] = beta2 * p.adam_v[i] + (1.0 - beta2) * g * g;
                p.value[i] -=
                    lr_now * (p.adam_m[i] / bc1) / (std::sqrt(p.adam_v[i] / bc2) + eps);
            }
        }
    }
};

void sgd_step(ParamStore& store, Real lr) {
    for (Param& p : store.all()) {
        if (!p.trainable) continue;
        for (size_t i = 0; i < p.value.size(); ++i) p.value[i] -= lr * p.grad[i];
    }
}

Real scheduled_lr(const OptimizerConfig& opt, int64_t step, int64_t planned_steps) {
    if (opt.schedule == "none") return opt.learning_rate;
    if (opt.schedule == "cosine") {
        const Real frac = planned_steps > 0 ? Real(step) / Real(planned_steps) : 0.0;
        return opt.learning_rate * 0.5 * (1.0 + std::cos(M_PI * std::min(frac, 1.0)));
    }
    throw std::invalid_argument("optimizer: unknown schedule '" + opt.schedule + "'");
}

}  // namespace

std::vector<Sample> load_split(const RunConfig& cfg, const std::string& split) {
    if (cfg.data.use_synthetic) {
        const SyntheticSpec& s = cfg.data.synth;
        const bool is_train = split == "train";
        return synth_generate(is_train ? s.n_train : s.n_test, s.size,
                              mix_seed(cfg.seed, is_train ? kTagTrain : kTagTest));
    }
    return load_samples(load_manifest(cfg.data.manifest_root, split));
}

MetricReport evaluate_model(Network& net, const std::vector<Sample>& samples, Real threshold,
                            AverageMode mode) {
    std::vector<Tensor> preds, targets;
    preds.reserve(samples.size());
    targets.reserve(samples.size());
    for (const Sample& s : samples) {
        preds.push_back(net.forward(s.image).road);
        targets.push_back(s.area_mask);
    }
    return evaluate_set(preds, targets, mode, threshold);
}

void write_text_file(const std::string& path, const std::string& content) {
    fs::create_directories(fs::path(path).parent_path());
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << content;
}

TrainResult train(const RunConfig& cfg) {
    if (cfg.epochs < 1) throw std::invalid_argument("train: epochs must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch size must be >= 1");
    if (cfg.optimizer.kind != "adam" && cfg.optimizer.kind != "sgd")
        throw std::invalid_argument("train: unknown optimizer '" + cfg.optimizer.kind + "'");

    std::vector<Sample> train_set = load_split(cfg, "train");
    std::vector<Sample> test_set = load_split(cfg, "test");
    if (train_set.empty()) throw std::runtime_error("train: empty training set");

    NetworkConfig net_cfg = cfg.network;
    net_cfg.seed = mix_seed(cfg.seed, kTagNet);
    Network net(net_cfg);

    const int64_t steps_per_epoch =
        int64_t((train_set.size() + size_t(cfg.batch_size) - 1) / size_t(cfg.batch_size));
    const int64_t planned_steps = cfg.max_steps > 0
                                      ? std::min<int64_t>(cfg.max_steps,
                                                          steps_per_epoch * cfg.epochs)
                                      : steps_per_epoch * cfg.epochs;

    Adam adam{cfg.optimizer.learning_rate};
    std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, kTagShuffle));
    std::vector<size_t> order(train_set.size());
    std::iota(order.begin(), order.end(), size_t(0));

    TrainResult result;
    int64_t step = 0;
    bool stop = false;
    for (int epoch = 1; epoch <= cfg.epochs && !stop; ++epoch) {
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        Real epoch_loss = 0.0;
        int64_t epoch_steps = 0;

        for (size_t start = 0; start < order.size() && !stop; start += size_t(cfg.batch_size)) {
            const size_t end = std::min(order.size(), start + size_t(cfg.batch_size));
            const Real inv_n = 1.0 / Real(end - start);
            net.params().zero_grads();
            Real batch_loss = 0.0;
            for (size_t k = start; k < end; ++k) {
                const Sample& s = train_set[order[k]];
                Graph g(true, /*training=*/true);
                Network::ForwardVals vals = net.forward_graph(g, g.input(s.image));
                Graph::Val loss =
                    sample_loss_op(g, vals.road, s.area_mask, vals.edge,
                                   vals.has_edge ? &s.edge_mask : nullptr, cfg.loss);
                batch_loss += g.value(loss).v[0] * inv_n;
                g.backward(loss, inv_n);
            }
            if (!std::isfinite(batch_loss))
                throw TrainingDiverged("training diverged at step " + std::to_string(step + 1) +
                                       ": loss=" + std::to_string(batch_loss));
            const Real lr_now = scheduled_lr(cfg.optimizer, step, planned_steps);
            if (cfg.optimizer.kind == "adam")
                adam.step(net.params(), lr_now);
            else
                sgd_step(net.params(), lr_now);
            ++step;
            ++epoch_steps;
            epoch_loss += batch_loss;
            result.step_losses.push_back(batch_loss);
            if (cfg.max_steps > 0 && step >= cfg.max_steps) stop = true;
            if (cfg.stop_at_loss > 0.0 && batch_loss < cfg.stop_at_loss) stop = true;
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = epoch_steps > 0 ? epoch_loss / Real(epoch_steps) : 0.0;
        const bool last = stop || epoch == cfg.epochs;
        if (!test_set.empty() &&
            ((cfg.eval_every > 0 && epoch % cfg.eval_every == 0) || last)) {
            rec.evaluated = true;
            rec.test = evaluate_model(net, test_set, cfg.eval_threshold, AverageMode::Macro);
        }
        result.history.push_back(rec);
        if (cfg.verbose) {
            if (rec.evaluated)
                std::printf("epoch %3d  loss %.5f  test_iou %.4f\n", epoch, rec.train_loss,
                            rec.test.iou);
            else
                std::printf("epoch %3d  loss %.5f\n", epoch, rec.train_loss);
            std::fflush(stdout);
        }
    }
    result.steps = step;
    if (!test_set.empty()) {
        result.final_macro = evaluate_model(net, test_set, cfg.eval_threshold, AverageMode::Macro);
        result.final_micro = evaluate_model(net, test_set, cfg.eval_threshold, AverageMode::Micro);
    }

    if (!cfg.out_dir.empty()) {
        fs::create_directories(cfg.out_dir);
        result.checkpoint_dir = (fs::path(cfg.out_dir) / "checkpoint").string();
        save_checkpoint(result.checkpoint_dir, net, step);

        std::ostringstream hist;
        hist << "epoch,train_loss,test_iou,test_f1,test_recall,test_precision\n";
        for (const EpochRecord& r : result.history) {
            hist << r.epoch << "," << r.train_loss;
            if (r.evaluated)
                hist << "," << 100.0 * r.test.iou << "," << 100.0 * r.test.f1 << ","
                     << 100.0 * r.test.recall << "," << 100.0 * r.test.precision;
            else
                hist << ",,,,";
            hist << "\n";
        }
        write_text_file((fs::path(cfg.out_dir) / "history.csv").string(), hist.str());

        std::ostringstream table;
        table << report_header("split") << "\n"
              << report_row("test (macro)", result.final_macro) << "\n"
              << report_row("test (micro)", result.final_micro) << "\n";
        write_text_file((fs::path(cfg.out_dir) / "metrics.txt").string(), table.str());
        write_text_file((fs::path(cfg.out_dir) / "metrics.kv").string(),
                        report_kv(result.final_macro, "test.macro.") +
                            report_kv(result.final_micro, "test.micro."));
    }
    return result;
}

// ---------------------------------------------------------------------------
// heat maps

std::vector<std::string> list_tap_names(Network& net, int input_size) {
    std::vector<std::pair<std::string, Tensor>> taps;
    Tensor probe(input_size, input_size, 3);
    net.forward_with_taps(probe, taps);
    std::vector<std::string> names;
    names.reserve(taps.size());
    for (const auto& [name, t] : taps) names.push_back(name);
    return names;
}

std::vector<std::string> export_heatmaps(Network& net, const Sample& sample,
                                         const std::vector<std::string>& layers,
                                         const std::string& out_dir) {
    if (layers.empty()) throw std::invalid_argument("export_heatmaps: no layers requested");
    std::vector<std::pair<std::string, Tensor>> taps;
    net.forward_with_taps(sample.image, taps);

    fs::create_directories(out_dir);
    std::vector<std::string> written;
    for (const std::string& layer : layers) {
        const Tensor* feat = nullptr;
        for (const auto& [name, t] : taps)
            if (name == layer) {
                feat = &t;
                break;
            }
        if (!feat) {
            std::string available;
            for (const auto& [name, t] : taps) available += name + " ";
            throw std::invalid_argument("export_heatmaps: unknown layer '" + layer +
                                        "'; available: " + available);
        }
        // channel mean, then min-max normalization to 8-bit gray
        Tensor mean(feat->h, feat->w, 1);
        for (int p = 0; p < feat->h * feat->w; ++p) {
            Real acc = 0.0;
            for (int ci = 0; ci < feat->c; ++ci) acc += feat->v[size_t(p) * feat->c + ci];
            mean.v[size_t(p)] = acc / feat->c;
        }
        const Real lo = mean.min_value();
        const Real hi = mean.max_value();
        ImageU8 img(mean.h, mean.w, 1);
        if (hi - lo < 1e-12) {
            std::fill(img.pixels.begin(), img.pixels.end(), uint8_t(128));
        } else {
            for (size_t i = 0; i < mean.size(); ++i)
                img.pixels[i] =
                    uint8_t(std::lround(255.0 * (mean.v[i] - lo) / (hi - lo)));
        }
        const std::string path = (fs::path(out_dir) / (layer + ".png")).string();
        write_png(path, img);
        written.push_back(path);
    }
    return written;
}

// ---------------------------------------------------------------------------
// finite-difference suite

namespace {

struct FdProbe {
    std::vector<Real*> coords;
    std::vector<Real> analytic;
};

GradCheckEntry fd_entry(const std::string& name, const std::function<double()>& eval,
                        const FdProbe& probe, double rel_tol) {
    GradCheckEntry e;
    e.name = name;
    const double step = 1e-5;
    for (size_t i = 0; i < probe.coords.size(); ++i) {
        Real* p = probe.coords[i];
        const Real saved = *p;
        *p = saved + step;
        const double f_plus = eval();
        *p = saved - step;
        const double f_minus = eval();
        *p = saved;
        const double fd = (f_plus - f_minus) / (2.0 * step);
        const double a = probe.analytic[i];
        const double mag = std::max(std::fabs(a), std::fabs(fd));
        if (mag >= 1e-3)
            e.max_rel = std::max(e.max_rel, std::fabs(a - fd) / mag);
        else
            e.max_abs_small = std::max(e.max_abs_small, std::fabs(a - fd));
    }
    e.ok = e.max_rel <= rel_tol && e.max_abs_small <= 1e-7;
    return e;
}

Tensor suite_tensor(int h, int w, int c, uint64_t seed, Real lo, Real hi) {
    Tensor t(h, w, c);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<Real> dist(lo, hi);
    for (Real& x : t.v) x = dist(rng);
    return t;
}

Tensor suite_binary(int h, int w, uint64_t seed) {
    Tensor t(h, w, 1);
    std::mt19937_64 rng(seed);
    for (Real& e : t.v) e = (rng() & 1) ? 1.0 : 0.0;
    return t;
}

size_t probe_stride_index(size_t n, size_t idx, size_t max_probes) {
    return idx * n / std::min(n, max_probes);
}

void push_param_probes(FdProbe& probe, ParamStore& store, size_t per_param) {
    for (Param& p : store.all()) {
        const size_t k = std::min(per_param, p.size());
        for (size_t i = 0; i < k; ++i) {
            const size_t idx = probe_stride_index(p.size(), i, per_param);
            probe.coords.push_back(&p.value[idx]);
            probe.analytic.push_back(p.grad[idx]);
        }
    }
}

}  // namespace

std::vector<GradCheckEntry> run_gradient_suite(uint64_t seed, double rel_tol) {
    std::vector<GradCheckEntry> out;

    // the three residual building blocks, normalization disabled
    auto check_block = [&](const std::string& name, auto make_block, int h, int w, int cin) {
        for (uint64_t attempt = 0;; ++attempt) {
            ParamStore ps;
            auto block = make_block(ps, seed + attempt);
            Tensor x = suite_tensor(h, w, cin, mix_seed(seed, attempt + 7), -1.0, 1.0);

            Graph g(true);
            Graph::Val xi = g.input(x, true);
            Graph::Val y = block.forward(g, xi);
            const Tensor& yt = g.value(y);
            Tensor proj = suite_tensor(yt.h, yt.w, yt.c, mix_seed(seed, 0x11), 0.1, 1.0);
            Graph::Val loss = g.sum(g.mul(y, g.input(proj)));
            if (g.kink_margin() <= 1e-3) continue;
            g.backward(loss);

            FdProbe probe;
            for (size_t i = 0; i < x.size(); ++i) {
                probe.coords.push_back(&x.v[i]);
                probe.analytic.push_back(g.grad(xi).v[i]);
            }
            push_param_probes(probe, ps, 12);
            auto eval = [&]() {
                Graph ge(false);
                Graph::Val o = block.forward(ge, ge.input(x));
                return ge.value(ge.sum(ge.mul(o, ge.input(proj)))).v[0];
            };
            out.push_back(fd_entry(name, eval, probe, rel_tol));
            return;
        }
    };
    check_block(
        "residual_block",
        [](ParamStore& ps, uint64_t s) { return ResidualBlock(ps, "b", {3, 5, false}, s); }, 4, 4,
        3);
    check_block(
        "down_block",
        [](ParamStore& ps, uint64_t s) { return DownBlock(ps, "b", {2, 4, false}, s); }, 6, 6, 2);
    check_block("up_block",
                [](ParamStore& ps, uint64_t s) { return UpBlock(ps, "b", {2, 3, false}, s); }, 3,
                3, 2);

    // all five cross-layer fusion variants
    for (const char* variant : {"base", "a", "b", "c", "d"}) {
        for (uint64_t attempt = 0;; ++attempt) {
            ParamStore ps;
            CgmModule cgm(ps, "cgm", 3, CgmVariant::parse(variant), seed + attempt);
            Tensor e = suite_tensor(4, 4, 3, mix_seed(seed, attempt + 100), 0.05, 1.0);
            Tensor d = suite_tensor(4, 4, 3, mix_seed(seed, attempt + 200), 0.05, 1.0);
            Tensor proj = suite_tensor(4, 4, 3, mix_seed(seed, 0x22), 0.1, 1.0);

            Graph g(true);
            Graph::Val ei = g.input(e, true);
            Graph::Val di = g.input(d, true);
            Graph::Val loss = g.sum(g.mul(cgm.forward(g, ei, di), g.input(proj)));
            if (g.kink_margin() <= 1e-3) continue;
            g.backward(loss);

            FdProbe probe;
            for (size_t i = 0; i < e.size(); ++i) {
                probe.coords.push_back(&e.v[i]);
                probe.analytic.push_back(g.grad(ei).v[i]);
            }
            for (size_t i = 0; i < d.size(); ++i) {
                probe.coords.push_back(&d.v[i]);
                probe.analytic.push_back(g.grad(di).v[i]);
            }
            push_param_probes(probe, ps, 10);
            auto eval = [&]() {
                Graph ge(false);
                return ge
                    .value(ge.sum(ge.mul(cgm.forward(ge, ge.input(e), ge.input(d)),
                                         ge.input(proj))))
                    .v[0];
            };
            out.push_back(fd_entry(std::string("cgm_") + variant, eval, probe, rel_tol));
            break;
        }
    }

    // the three shallow bridge variants
    for (FbmVariant v : {FbmVariant::BaseConcat, FbmVariant::BaseAdd, FbmVariant::MaskBridge}) {
        for (uint64_t attempt = 0;; ++attempt) {
            ParamStore ps;
            FbmShallow fbm(ps, "fbm", 2, v, seed + attempt);
            Tensor main = suite_tensor(4, 4, 2, mix_seed(seed, attempt + 300), -1.0, 1.0);
            Tensor side = suite_tensor(4, 4, 2, mix_seed(seed, attempt + 400), 0.05, 1.0);
            Tensor proj = suite_tensor(4, 4, 2, mix_seed(seed, 0x33), 0.1, 1.0);

            Graph g(true);
            Graph::Val mi = g.input(main, true);
            Graph::Val si = g.input(side, true);
            Graph::Val loss = g.sum(g.mul(fbm.forward(g, mi, si), g.input(proj)));
            if (g.kink_margin() <= 1e-3) continue;
            g.backward(loss);

            FdProbe probe;
            for (size_t i = 0; i < main.size(); ++i) {
                probe.coords.push_back(&main.v[i]);
                probe.analytic.push_back(g.grad(mi).v[i]);
            }
            for (size_t i = 0; i < side.size(); ++i) {
                probe.coords.push_back(&side.v[i]);
                probe.analytic.push_back(g.grad(si).v[i]);
            }
            push_param_probes(probe, ps, 10);
            auto eval = [&]() {
                Graph ge(false);
                return ge
                    .value(ge.sum(
                        ge.mul(fbm.forward(ge, ge.input(main), ge.input(side)), ge.input(proj))))
                    .v[0];
            };
            out.push_back(fd_entry("fbm_" + fbm_variant_str(v), eval, probe, rel_tol));
            break;
        }
    }

    // the deep bridge, probing all three inputs
    {
        ParamStore ps;
        FbmDeep fbm(ps, "deep", 2, 2, false, seed);
        Tensor d_main = suite_tensor(4, 4, 2, mix_seed(seed, 500), -1.0, 1.0);
        Tensor d_side = suite_tensor(4, 4, 2, mix_seed(seed, 600), -1.0, 1.0);
        Tensor e_skip = suite_tensor(4, 4, 2, mix_seed(seed, 700), -1.0, 1.0);
        Tensor proj = suite_tensor(4, 4, 2, mix_seed(seed, 0x44), 0.1, 1.0);

        Graph g(true);
        Graph::Val a = g.input(d_main, true);
        Graph::Val b = g.input(d_side, true);
        Graph::Val c = g.input(e_skip, true);
        g.backward(g.sum(g.mul(fbm.forward(g, a, b, c), g.input(proj))));

        FdProbe probe;
        auto push = [&](Tensor& t, Graph::Val v) {
            for (size_t i = 0; i < t.size(); ++i) {
                probe.coords.push_back(&t.v[i]);
                probe.analytic.push_back(g.grad(v).v[i]);
            }
        };
        push(d_main, a);
        push(d_side, b);
        push(e_skip, c);
        push_param_probes(probe, ps, 10);
        auto eval = [&]() {
            Graph ge(false);
            return ge
                .value(ge.sum(ge.mul(
                    fbm.forward(ge, ge.input(d_main), ge.input(d_side), ge.input(e_skip)),
                    ge.input(proj))))
                .v[0];
        };
        out.push_back(fd_entry("fbm_d", eval, probe, rel_tol));
    }

    // the three losses
    {
        LossParams lp;
        Tensor p = suite_tensor(4, 4, 1, mix_seed(seed, 800), 0.1, 0.9);
        Tensor t = suite_binary(4, 4, mix_seed(seed, 900));

        auto loss_entry = [&](const std::string& name, auto make_op, auto eval_fn) {
            Graph g(true);
            Graph::Val pv = g.input(p, true);
            g.backward(make_op(g, pv));
            FdProbe probe;
            for (size_t i = 0; i < p.size(); ++i) {
                probe.coords.push_back(&p.v[i]);
                probe.analytic.push_back(g.grad(pv).v[i]);
            }
            out.push_back(fd_entry(name, eval_fn, probe, rel_tol));
        };
        loss_entry(
            "loss_ce", [&](Graph& g, Graph::Val pv) { return bce_op(g, pv, t); },
            [&]() { return bce_value(p, t); });
        loss_entry(
            "loss_iou",
            [&](Graph& g, Graph::Val pv) { return iou_op(g, pv, t, lp.stabilizer, false); },
            [&]() { return iou_value(p, t, lp.stabilizer, false); });
        loss_entry(
            "loss_focal",
            [&](Graph& g, Graph::Val pv) { return focal_op(g, pv, t, lp.lambda, lp.gamma); },
            [&]() { return focal_value(p, t, lp.lambda, lp.gamma); });
    }

    return out;
}

// ---------------------------------------------------------------------------
// ablation harness

AblationResult ablate(const std::vector<AblationDelta>& grid) {
    if (grid.empty()) throw std::invalid_argument("ablate: empty grid");
    AblationResult result;
    std::ostringstream table, csv;
    table << report_header("config") << "\n";
    csv << "config,iou,f1,recall,precision,status\n";
    for (const AblationDelta& delta : grid) {
        AblationRow row;
        row.name = delta.name;
        try {
            TrainResult r = train(delta.cfg);
            row.report = r.final_macro;
        } catch (const std::exception& ex) {
            row.failed = true;
            row.error = ex.what();
        }
        if (row.failed) {
            char buf[256];
            std::snprintf(buf, sizeof(buf), "%-36s FAILED: %s", row.name.c_str(),
                          row.error.c_str());
            table << buf << "\n";
            csv << row.name << ",,,,,FAILED\n";
        } else {
            table << report_row(row.name, row.report) << "\n";
            csv << row.name << "," << 100.0 * row.report.iou << "," << 100.0 * row.report.f1
                << "," << 100.0 * row.report.recall << "," << 100.0 * row.report.precision
                << ",ok\n";
        }
        std::printf("[ablate] %s %s\n", row.name.c_str(), row.failed ? "FAILED" : "done");
        std::fflush(stdout);
        result.rows.push_back(std::move(row));
    }
    result.table_text = table.str();
    result.csv_text = csv.str();
    return result;
}

std::vector<AblationDelta> make_cgm_grid(const RunConfig& base) {
    std::vector<AblationDelta> grid;
    for (const char* v : {"base", "a", "b", "c", "d"}) {
        RunConfig cfg = base;
        cfg.network.side_branch = false;
        cfg.network.placement = Placement::None;
        cfg.network.cgm = CgmVariant::parse(v);
        cfg.verbose = false;
        cfg.out_dir.clear();
        grid.push_back({std::string("cgm=") + v, cfg});
    }
    return grid;
}

std::vector<AblationDelta> make_fbm_grid(const RunConfig& base) {
    std::vector<AblationDelta> grid;
    const Placement places[] = {Placement::I, Placement::II, Placement::III, Placement::IV};
    for (FbmVariant v : {FbmVariant::BaseConcat, FbmVariant::BaseAdd, FbmVariant::MaskBridge}) {
        for (Placement pl : places) {
            RunConfig cfg = base;
            cfg.network.side_branch = true;
            cfg.network.placement = pl;
            cfg.network.fbm_encoder = v;
            cfg.network.fbm_decoder = v;
            cfg.verbose = false;
            cfg.out_dir.clear();
            grid.push_back(
                {"fbm=" + fbm_variant_str(v) + " placement=" + placement_str(pl), cfg});
        }
    }
    // the proposed pairing: mask bridge along the encoders, deep mask
    // bridge along the decoders, fused everywhere
    RunConfig cfg = base;
    cfg.network.side_branch = true;
    cfg.network.placement = Placement::I;
    cfg.network.fbm_encoder = FbmVariant::MaskBridge;
    cfg.network.fbm_decoder = FbmVariant::DeepMaskBridge;
    cfg.verbose = false;
    cfg.out_dir.clear();
    grid.push_back({"fbm=c,d placement=I", cfg});
    return grid;
}

std::vector<AblationDelta> make_span_grid(const RunConfig& base) {
    std::vector<AblationDelta> grid;
    CgmVariant variant = base.network.cgm.is_base() ? CgmVariant::parse("a") : base.network.cgm;
    for (int span = 1; span <= 4; ++span) {
        RunConfig cfg = base;
        cfg.network.cgm = variant;
        cfg.network.cgm_mask = {false, false, false, false};
        for (int i = 0; i < span; ++i) cfg.network.cgm_mask[size_t(i)] = true;  // deepest first
        cfg.verbose = false;
        cfg.out_dir.clear();
        std::string name = "layers=1";
        if (span > 1) name += "-" + std::to_string(span);
        grid.push_back({name, cfg});
    }
    return grid;
}

}  // namespace dtnet
