#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "evitram/autoencoder.hpp"
#include "evitram/cluster.hpp"
#include "evitram/config.hpp"
#include "evitram/dataset.hpp"
#include "evitram/evidence.hpp"
#include "evitram/evitram.hpp"
#include "evitram/rng.hpp"

namespace evitram {

struct EvidenceSpec {
    EvidenceQuality quality = EvidenceQuality::real;
    int width = 0;
    // Group construction for real / random_index evidence:
    //   "mod"      -> group = label % width
    //   "identity" -> group = label (width must cover every label)
    std::string mapping = "mod";
};

struct DatasetSpec {
    std::string kind = "synthetic";  // synthetic | idx | csv
    SyntheticSpec synth;
    std::string csv_path;
    std::string idx_images;
    std::string idx_labels;
    int subsample = 0;  // 0 = all samples; otherwise stratified subsample size
};

struct ExperimentConfig {
    std::string config_id = "experiment";
    DatasetSpec dataset;
    DenoisingAEConfig ae;
    std::vector<EvidenceSpec> evidence;  // at most 3 sources
    TransferConfig transfer;
    int evidence_epochs = 5;
    KMeansConfig clustering;  // .seed is ignored; run streams supply seeds
    int runs = 4;
    std::uint64_t master_seed = 1;
    std::string out_dir = "out";
    int workers = 1;
    bool save_artifacts = true;
};

void validate(const ExperimentConfig& cfg);

// Strict construction from a parsed key = value config; rejects unknown keys.
ExperimentConfig experiment_from_config(const ConfigMap& cfg);

// Sorted key = value text reproducing cfg exactly (echoed into out_dir).
std::string resolved_config_text(const ExperimentConfig& cfg);

// Deterministic seed split: every run owns an independent stream, and each
// pipeline component draws from a fixed child of that stream, so adding
// evidence sources never perturbs the other components.
inline constexpr std::uint64_t kStreamPretrain = 0;
inline constexpr std::uint64_t kStreamBaselineKMeans = 1;
inline constexpr std::uint64_t kStreamEvidenceBase = 2;  // source j uses 2 + j
inline constexpr std::uint64_t kStreamTransfer = 16;
inline constexpr std::uint64_t kStreamPostKMeans = 17;
inline constexpr std::uint64_t kStreamDataset = 31;  // subsampling, shared by runs

inline Rng run_stream(std::uint64_t master_seed, int run) {
    return Rng(master_seed).child(static_cast<std::uint64_t>(run));
}

struct RunMetrics {
    int run = 0;
    bool ok = false;
    std::string error;  // stage-tagged diagnostic when !ok
    bool has_labels = false;
    bool has_post = false;
    double baseline_acc = 0.0;
    double baseline_nmi = 0.0;
    double post_acc = 0.0;
    double post_nmi = 0.0;
    double baseline_mse = 0.0;
    double post_mse = 0.0;
};

struct MetricsReport {
    std::string config_id;
    std::vector<RunMetrics> runs;
    int ok_runs = 0;
    bool has_labels = false;
    bool has_post = false;
    // Arithmetic means over successful runs.
    double mean_baseline_acc = 0.0;
    double mean_baseline_nmi = 0.0;
    double mean_post_acc = 0.0;
    double mean_post_nmi = 0.0;
    double mean_acc_delta = 0.0;
    double mean_nmi_delta = 0.0;
};

// Builds one evidence source for a dataset of n samples. Real and
// random-index evidence require ground-truth labels (this is the only
// non-metric consumer of labels; training code never sees them).
EvidenceSource build_evidence(const EvidenceSpec& spec, const Labels* labels, int n, Rng& rng);

// Full pipeline per run: pretrain, baseline k-means on the latent codes,
// evidence construction + encoders, transfer, post k-means, metrics.
// Persists checkpoints, traces, evidence files, metrics.csv, and the
// resolved config under cfg.out_dir. A failing run is recorded and the
// remaining runs continue.
MetricsReport run_experiment(const ExperimentConfig& cfg);

struct GridCell {
    std::string name;
    std::vector<EvidenceSpec> evidence;
};

// Cells parsed from cell.<name>.evidence.<j>.* keys, sorted by name.
std::vector<GridCell> grid_cells_from_config(const ConfigMap& cfg);

// One experiment per cell (evidence list swapped in, out_dir/<name>,
// config_id = <name>); failed cells are marked and do not stop the grid.
// Writes a consolidated grid.csv of per-cell means.
std::vector<MetricsReport> run_grid(const ExperimentConfig& base,
                                    const std::vector<GridCell>& cells);

// Shared CSV helpers (6-decimal fixed format, empty cells for absent values).
std::string format_metric(double value);
void write_metrics_csv(const std::string& path, const MetricsReport& report);
void write_trace_csv(const std::string& path, const TransferTrace& trace);
void write_pretrain_trace_csv(const std::string& path, const std::vector<double>& l_ae);

}  // namespace evitram
