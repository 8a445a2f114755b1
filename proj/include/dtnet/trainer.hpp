#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "dtnet/checkpoint.hpp"
#include "dtnet/data.hpp"
#include "dtnet/losses.hpp"
#include "dtnet/metrics.hpp"
#include "dtnet/network.hpp"

namespace dtnet {

struct OptimizerConfig {
    std::string kind = "adam";      // adam | sgd
    Real learning_rate = 1e-3;
    std::string schedule = "none";  // none | cosine
};

struct SyntheticSpec {
    int n_train = 200;
    int n_test = 50;
    int size = 64;
};

struct DataSource {
    bool use_synthetic = true;
    SyntheticSpec synth;
    std::string manifest_root;  // used when use_synthetic is false
};

// One experiment: everything a run needs, reproducible from `seed` alone.
// The master seed derives the network init, data generation and shuffle
// streams (NetworkConfig::seed is overwritten accordingly).
struct RunConfig {
    NetworkConfig network;
    LossParams loss;
    OptimizerConfig optimizer;
    int batch_size = 8;
    int epochs = 50;
    int64_t max_steps = 0;  // 0 = run every epoch to completion
    Real stop_at_loss = 0.0;  // early-stop once a batch loss drops below (0 = off)
    DataSource data;
    Real eval_threshold = 0.5;
    int eval_every = 1;  // epochs between test evaluations (0 = only final)
    std::string out_dir;  // empty = keep everything in memory
    uint64_t seed = 0;
    bool verbose = true;
};

struct EpochRecord {
    int epoch = 0;
    Real train_loss = 0.0;
    bool evaluated = false;
    MetricReport test;  // macro
};

struct TrainResult {
    std::vector<EpochRecord> history;
    std::vector<Real> step_losses;
    MetricReport final_macro;
    MetricReport final_micro;
    int64_t steps = 0;
    std::string checkpoint_dir;  // empty unless out_dir was set
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

TrainResult train(const RunConfig& cfg);

MetricReport evaluate_model(Network& net, const std::vector<Sample>& samples, Real threshold,
                            AverageMode mode);

std::vector<Sample> load_split(const RunConfig& cfg, const std::string& split);

// --- heat-map export -------------------------------------------------------

// Channel-mean of each selected tap, min-max normalized to 8-bit gray
// (mid-gray for constant maps). Returns the written file paths.
std::vector<std::string> export_heatmaps(Network& net, const Sample& sample,
                                         const std::vector<std::string>& layers,
                                         const std::string& out_dir);

std::vector<std::string> list_tap_names(Network& net, int input_size = 32);

// --- finite-difference suite ------------------------------------------------

struct GradCheckEntry {
    std::string name;
    double max_rel = 0.0;
    double max_abs_small = 0.0;
    bool ok = false;
};

// Checks analytic gradients of the three blocks, all five cross-layer
// fusion variants, all four bridge variants and the three losses against
// central finite differences (step 1e-5, normalization disabled).
std::vector<GradCheckEntry> run_gradient_suite(uint64_t seed, double rel_tol = 1e-4);

// --- ablation harness -------------------------------------------------------

struct AblationDelta {
    std::string name;
    RunConfig cfg;
};

struct AblationRow {
    std::string name;
    bool failed = false;
    std::string error;
    MetricReport report;  // macro, final test
};

struct AblationResult {
    std::vector<AblationRow> rows;
    std::string table_text;
    std::string csv_text;
};

AblationResult ablate(const std::vector<AblationDelta>& grid);

// Canned grids mirroring the experimental protocol: cross-layer variants
// on the single-task network, bridge variants x placements on the
// dual-task network, and the fusion-span sweep.
std::vector<AblationDelta> make_cgm_grid(const RunConfig& base);
std::vector<AblationDelta> make_fbm_grid(const RunConfig& base);
std::vector<AblationDelta> make_span_grid(const RunConfig& base);

void write_text_file(const std::string& path, const std::string& content);

}  // namespace dtnet
