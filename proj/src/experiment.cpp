#include "evitram/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

#include "evitram/checkpoint.hpp"
#include "evitram/metrics.hpp"

namespace evitram {

namespace fs = std::filesystem;

void validate(const ExperimentConfig& cfg) {
    if (cfg.config_id.empty()) throw config_error("experiment: config_id must not be empty");
    if (cfg.runs < 1) throw config_error("experiment: runs must be at least 1");
    if (cfg.workers < 1) throw config_error("experiment: workers must be at least 1");
    if (cfg.evidence.size() > 3)
        throw config_error("experiment: at most 3 evidence sources are supported, got " +
                           std::to_string(cfg.evidence.size()));
    if (cfg.evidence_epochs < 0)
        throw config_error("experiment: evidence_encoder epochs must be non-negative");
    for (const EvidenceSpec& e : cfg.evidence) {
        if (e.width < 1) throw config_error("evidence: width must be positive");
        if (e.mapping != "mod" && e.mapping != "identity")
            throw config_error("evidence: unknown mapping '" + e.mapping +
                               "' (expected mod or identity)");
    }
    if (cfg.dataset.kind != "synthetic" && cfg.dataset.kind != "idx" &&
        cfg.dataset.kind != "csv")
        throw config_error("dataset: unknown kind '" + cfg.dataset.kind + "'");
    if (cfg.dataset.kind == "synthetic") validate(cfg.dataset.synth);
    if (cfg.dataset.kind == "csv" && cfg.dataset.csv_path.empty())
        throw config_error("dataset: csv kind requires dataset.csv");
    if (cfg.dataset.kind == "idx" &&
        (cfg.dataset.idx_images.empty() || cfg.dataset.idx_labels.empty()))
        throw config_error("dataset: idx kind requires dataset.images and dataset.labels");
    // input_width is taken from the dataset at run time; substitute a
    // placeholder so the rest of the autoencoder config is still checked.
    DenoisingAEConfig ae_check = cfg.ae;
    if (ae_check.input_width == 0) ae_check.input_width = 1;
    validate(ae_check);
    validate(cfg.transfer);
    validate(cfg.clustering);
}

namespace {

OptimizerConfig optimizer_from_config(const ConfigMap& cfg, const std::string& section,
                                      const OptimizerConfig& defaults) {
    OptimizerConfig opt = defaults;
    opt.kind = optimizer_kind_from_name(
        cfg.get_string(section + ".optimizer", optimizer_kind_name(defaults.kind)));
    opt.learning_rate = cfg.get_double(section + ".learning_rate", defaults.learning_rate);
    opt.momentum = cfg.get_double(section + ".momentum", defaults.momentum);
    opt.batch_size = static_cast<int>(cfg.get_int(section + ".batch_size", defaults.batch_size));
    return opt;
}

std::vector<EvidenceSpec> evidence_from_keys(const ConfigMap& cfg, const std::string& prefix) {
    std::vector<EvidenceSpec> out;
    for (int j = 0; j < 8; ++j) {
        const std::string base = prefix + "." + std::to_string(j);
        if (!cfg.has(base + ".quality")) {
            // Indices must be contiguous from 0; any later index is an error
            // caught by ensure_all_consumed on the leftover keys.
            break;
        }
        EvidenceSpec spec;
        spec.quality = evidence_quality_from_name(cfg.require_string(base + ".quality"));
        spec.width = static_cast<int>(cfg.get_int(base + ".width", 0));
        spec.mapping = cfg.get_string(base + ".mapping", "mod");
        out.push_back(spec);
    }
    return out;
}

}  // namespace

ExperimentConfig experiment_from_config(const ConfigMap& cfg) {
    ExperimentConfig out;
    out.config_id = cfg.get_string("config_id", out.config_id);
    out.runs = static_cast<int>(cfg.get_int("runs", out.runs));
    out.master_seed = cfg.get_u64("seed", out.master_seed);
    out.out_dir = cfg.get_string("out", out.out_dir);
    out.workers = static_cast<int>(cfg.get_int("workers", out.workers));
    out.save_artifacts = cfg.get_bool("save_artifacts", out.save_artifacts);

    out.dataset.kind = cfg.get_string("dataset.kind", out.dataset.kind);
    out.dataset.csv_path = cfg.get_string("dataset.csv", "");
    out.dataset.idx_images = cfg.get_string("dataset.images", "");
    out.dataset.idx_labels = cfg.get_string("dataset.labels", "");
    out.dataset.subsample = static_cast<int>(cfg.get_int("dataset.subsample", 0));

    SyntheticSpec& synth = out.dataset.synth;
    synth.n_samples = static_cast<int>(cfg.get_int("synth.n_samples", synth.n_samples));
    synth.dims = static_cast<int>(cfg.get_int("synth.dims", synth.dims));
    synth.n_clusters = static_cast<int>(cfg.get_int("synth.n_clusters", synth.n_clusters));
    synth.n_supergroups =
        static_cast<int>(cfg.get_int("synth.n_supergroups", synth.n_supergroups));
    synth.cluster_std = cfg.get_double("synth.cluster_std", synth.cluster_std);
    synth.separation = cfg.get_double("synth.separation", synth.separation);
    synth.seed = cfg.get_u64("synth.seed", out.master_seed);

    DenoisingAEConfig& ae = out.ae;
    ae.hidden_widths = cfg.get_int_list("ae.hidden_widths", ae.hidden_widths);
    ae.latent_width = static_cast<int>(cfg.get_int("ae.latent_width", ae.latent_width));
    ae.corruption_rate = cfg.get_double("ae.corruption_rate", ae.corruption_rate);
    ae.epochs = static_cast<int>(cfg.get_int("ae.epochs", ae.epochs));
    ae.optimizer = optimizer_from_config(cfg, "ae", ae.optimizer);
    // input_width is filled from the dataset at run time.

    out.evidence = evidence_from_keys(cfg, "evidence");
    out.evidence_epochs =
        static_cast<int>(cfg.get_int("evidence_encoder.epochs", out.evidence_epochs));

    TransferConfig& tr = out.transfer;
    tr.lambda = cfg.get_double("transfer.lambda", tr.lambda);
    tr.epochs = static_cast<int>(cfg.get_int("transfer.epochs", tr.epochs));
    tr.mode = transfer_mode_from_name(
        cfg.get_string("transfer.mode", transfer_mode_name(tr.mode)));
    tr.disjoint_lr_ratio = cfg.get_double("transfer.disjoint_lr_ratio", tr.disjoint_lr_ratio);
    tr.corrupt_inputs = cfg.get_bool("transfer.corrupt_inputs", tr.corrupt_inputs);
    tr.optimizer = optimizer_from_config(cfg, "transfer", tr.optimizer);

    KMeansConfig& km = out.clustering;
    km.k = static_cast<int>(cfg.get_int("kmeans.k", out.dataset.kind == "synthetic"
                                                        ? out.dataset.synth.n_clusters
                                                        : km.k));
    km.restarts = static_cast<int>(cfg.get_int("kmeans.restarts", km.restarts));
    km.max_iters = static_cast<int>(cfg.get_int("kmeans.max_iters", km.max_iters));
    km.tol = cfg.get_double("kmeans.tol", km.tol);

    cfg.ensure_all_consumed();
    validate(out);
    return out;
}

namespace {

std::string format_double_key(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

}  // namespace

std::string resolved_config_text(const ExperimentConfig& cfg) {
    std::map<std::string, std::string> kv;
    kv["config_id"] = cfg.config_id;
    kv["runs"] = std::to_string(cfg.runs);
    kv["seed"] = std::to_string(cfg.master_seed);
    kv["out"] = cfg.out_dir;
    kv["workers"] = std::to_string(cfg.workers);
    kv["save_artifacts"] = cfg.save_artifacts ? "true" : "false";

    kv["dataset.kind"] = cfg.dataset.kind;
    if (!cfg.dataset.csv_path.empty()) kv["dataset.csv"] = cfg.dataset.csv_path;
    if (!cfg.dataset.idx_images.empty()) kv["dataset.images"] = cfg.dataset.idx_images;
    if (!cfg.dataset.idx_labels.empty()) kv["dataset.labels"] = cfg.dataset.idx_labels;
    kv["dataset.subsample"] = std::to_string(cfg.dataset.subsample);
    if (cfg.dataset.kind == "synthetic") {
        kv["synth.n_samples"] = std::to_string(cfg.dataset.synth.n_samples);
        kv["synth.dims"] = std::to_string(cfg.dataset.synth.dims);
        kv["synth.n_clusters"] = std::to_string(cfg.dataset.synth.n_clusters);
        kv["synth.n_supergroups"] = std::to_string(cfg.dataset.synth.n_supergroups);
        kv["synth.cluster_std"] = format_double_key(cfg.dataset.synth.cluster_std);
        kv["synth.separation"] = format_double_key(cfg.dataset.synth.separation);
        kv["synth.seed"] = std::to_string(cfg.dataset.synth.seed);
    }

    std::string hidden;
    for (size_t i = 0; i < cfg.ae.hidden_widths.size(); ++i)
        hidden += (i ? "," : "") + std::to_string(cfg.ae.hidden_widths[i]);
    kv["ae.hidden_widths"] = hidden;
    kv["ae.latent_width"] = std::to_string(cfg.ae.latent_width);
    kv["ae.corruption_rate"] = format_double_key(cfg.ae.corruption_rate);
    kv["ae.epochs"] = std::to_string(cfg.ae.epochs);
    kv["ae.optimizer"] = optimizer_kind_name(cfg.ae.optimizer.kind);
    kv["ae.learning_rate"] = format_double_key(cfg.ae.optimizer.learning_rate);
    kv["ae.momentum"] = format_double_key(cfg.ae.optimizer.momentum);
    kv["ae.batch_size"] = std::to_string(cfg.ae.optimizer.batch_size);

    for (size_t j = 0; j < cfg.evidence.size(); ++j) {
        const std::string base = "evidence." + std::to_string(j);
        kv[base + ".quality"] = evidence_quality_name(cfg.evidence[j].quality);
        kv[base + ".width"] = std::to_string(cfg.evidence[j].width);
        kv[base + ".mapping"] = cfg.evidence[j].mapping;
    }
    kv["evidence_encoder.epochs"] = std::to_string(cfg.evidence_epochs);

    kv["transfer.lambda"] = format_double_key(cfg.transfer.lambda);
    kv["transfer.epochs"] = std::to_string(cfg.transfer.epochs);
    kv["transfer.mode"] = transfer_mode_name(cfg.transfer.mode);
    kv["transfer.disjoint_lr_ratio"] = format_double_key(cfg.transfer.disjoint_lr_ratio);
    kv["transfer.corrupt_inputs"] = cfg.transfer.corrupt_inputs ? "true" : "false";
    kv["transfer.optimizer"] = optimizer_kind_name(cfg.transfer.optimizer.kind);
    kv["transfer.learning_rate"] = format_double_key(cfg.transfer.optimizer.learning_rate);
    kv["transfer.momentum"] = format_double_key(cfg.transfer.optimizer.momentum);
    kv["transfer.batch_size"] = std::to_string(cfg.transfer.optimizer.batch_size);

    kv["kmeans.k"] = std::to_string(cfg.clustering.k);
    kv["kmeans.restarts"] = std::to_string(cfg.clustering.restarts);
    kv["kmeans.max_iters"] = std::to_string(cfg.clustering.max_iters);
    kv["kmeans.tol"] = format_double_key(cfg.clustering.tol);

    std::string text;
    for (const auto& [key, value] : kv) text += key + " = " + value + "\n";
    return text;
}

EvidenceSource build_evidence(const EvidenceSpec& spec, const Labels* labels, int n, Rng& rng) {
    if (spec.quality == EvidenceQuality::white_noise)
        return white_noise_evidence(n, spec.width, rng);

    if (labels == nullptr)
        throw data_error("evidence: " + evidence_quality_name(spec.quality) +
                         " evidence requires ground-truth labels");
    if (static_cast<int>(labels->size()) != n)
        throw data_error("evidence: label count " + std::to_string(labels->size()) +
                         " does not match sample count " + std::to_string(n));

    std::function<int(int)> mapping;
    if (spec.mapping == "mod") {
        mapping = [w = spec.width](int y) { return y % w; };
    } else if (spec.mapping == "identity") {
        mapping = [](int y) { return y; };
    } else {
        throw config_error("evidence: unknown mapping '" + spec.mapping + "'");
    }

    EvidenceSource real = derive_evidence(*labels, mapping, spec.width);
    if (spec.quality == EvidenceQuality::real) return real;
    return random_index_evidence(real, rng);
}

namespace {

Dataset load_experiment_dataset(const ExperimentConfig& cfg) {
    Dataset data;
    if (cfg.dataset.kind == "synthetic") {
        data = generate_synthetic(cfg.dataset.synth).data;
    } else if (cfg.dataset.kind == "idx") {
        data = load_idx(cfg.dataset.idx_images, cfg.dataset.idx_labels);
    } else {
        data = load_csv(cfg.dataset.csv_path);
    }
    if (cfg.dataset.subsample > 0) {
        Rng sub_rng = Rng(cfg.master_seed).child(kStreamDataset);
        data = subsample_stratified(data, cfg.dataset.subsample, sub_rng);
    }
    return data;
}

RunMetrics execute_run(const ExperimentConfig& cfg, const Dataset& data, int run) {
    RunMetrics m;
    m.run = run;
    m.has_labels = data.true_labels.has_value();
    const std::string run_dir = cfg.out_dir + "/run_" + std::to_string(run);
    const Rng stream = run_stream(cfg.master_seed, run);
    const int n = static_cast<int>(data.features.rows());

    std::string stage = "setup";
    try {
        if (cfg.save_artifacts) fs::create_directories(run_dir);

        stage = "pretrain";
        DenoisingAEConfig ae_cfg = cfg.ae;
        ae_cfg.input_width = static_cast<int>(data.features.cols());
        Rng pre_rng = stream.child(kStreamPretrain);
        PretrainResult pre = pretrain(data.features, ae_cfg, pre_rng);
        if (cfg.save_artifacts) {
            save_checkpoint(run_dir + "/pretrain.ckpt", pre.model);
            write_pretrain_trace_csv(run_dir + "/pretrain_trace.csv", pre.trace);
        }

        stage = "baseline-cluster";
        KMeansConfig km = cfg.clustering;
        km.seed = stream.derive_seed(kStreamBaselineKMeans);
        const ClusteringResult baseline = kmeans(encode(pre.model, data.features), km);
        m.baseline_mse = reconstruction_mse(pre.model, data.features);
        if (m.has_labels) {
            m.baseline_acc = acc(baseline.assignments, *data.true_labels);
            m.baseline_nmi = nmi(baseline.assignments, *data.true_labels);
        }

        if (!cfg.evidence.empty()) {
            stage = "evidence";
            const int k = static_cast<int>(cfg.evidence.size());
            const Labels* labels = data.true_labels ? &*data.true_labels : nullptr;
            std::vector<Matrix> zv;
            zv.reserve(static_cast<size_t>(k));
            for (int j = 0; j < k; ++j) {
                Rng ev_rng = stream.child(kStreamEvidenceBase + static_cast<std::uint64_t>(j));
                const EvidenceSource v =
                    build_evidence(cfg.evidence[static_cast<size_t>(j)], labels, n, ev_rng);
                const EvidenceEncoder enc = train_evidence_encoder(
                    v, ae_cfg.latent_width, cfg.evidence_epochs, ev_rng);
                zv.push_back(latent_evidence(enc, v));
                if (cfg.save_artifacts)
                    save_evidence_file(run_dir + "/evidence_" + std::to_string(j) + ".txt", v);
            }

            stage = "transfer";
            Rng tr_rng = stream.child(kStreamTransfer);
            EviTramModel model = attach_heads(pre.model, k, tr_rng);
            model.zv = std::move(zv);
            const TransferTrace trace = transfer(model, data.features, cfg.transfer, tr_rng);
            if (cfg.save_artifacts) {
                save_checkpoint(run_dir + "/evitram.ckpt", model);
                write_trace_csv(run_dir + "/transfer_trace.csv", trace);
            }

            stage = "post-cluster";
            KMeansConfig km_post = cfg.clustering;
            km_post.seed = stream.derive_seed(kStreamPostKMeans);
            const ClusteringResult post = kmeans(encode(model.base, data.features), km_post);
            m.post_mse = reconstruction_mse(model.base, data.features);
            m.has_post = true;
            if (m.has_labels) {
                m.post_acc = acc(post.assignments, *data.true_labels);
                m.post_nmi = nmi(post.assignments, *data.true_labels);
            }
        }
        m.ok = true;
    } catch (const std::exception& e) {
        m.ok = false;
        m.error = stage + ": " + e.what();
    }
    return m;
}

void finalize_report(MetricsReport& report) {
    int ok = 0;
    for (const RunMetrics& r : report.runs) {
        if (!r.ok) continue;
        ++ok;
        report.has_labels = report.has_labels || r.has_labels;
        report.has_post = report.has_post || r.has_post;
        report.mean_baseline_acc += r.baseline_acc;
        report.mean_baseline_nmi += r.baseline_nmi;
        report.mean_post_acc += r.post_acc;
        report.mean_post_nmi += r.post_nmi;
    }
    report.ok_runs = ok;
    if (ok > 0) {
        report.mean_baseline_acc /= ok;
        report.mean_baseline_nmi /= ok;
        report.mean_post_acc /= ok;
        report.mean_post_nmi /= ok;
        if (report.has_post) {
            report.mean_acc_delta = report.mean_post_acc - report.mean_baseline_acc;
            report.mean_nmi_delta = report.mean_post_nmi - report.mean_baseline_nmi;
        }
    }
}

}  // namespace

std::string format_metric(double value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6f", value);
    return buf;
}

void write_metrics_csv(const std::string& path, const MetricsReport& report) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write metrics CSV '" + path + "'");
    out << "config_id,run,acc,nmi,acc_delta,nmi_delta\n";

    auto baseline_row = [&](const std::string& run_label, double a, double v, bool labeled) {
        out << report.config_id << "/baseline," << run_label << ",";
        if (labeled) out << format_metric(a) << "," << format_metric(v);
        else out << ",";
        out << ",,\n";
    };
    auto post_row = [&](const std::string& run_label, double a, double v, double da, double dv,
                        bool labeled) {
        out << report.config_id << "," << run_label << ",";
        if (labeled)
            out << format_metric(a) << "," << format_metric(v) << "," << format_metric(da)
                << "," << format_metric(dv);
        else
            out << ",,,";
        out << "\n";
    };

    for (const RunMetrics& r : report.runs) {
        if (!r.ok) continue;
        const std::string run_label = std::to_string(r.run);
        baseline_row(run_label, r.baseline_acc, r.baseline_nmi, r.has_labels);
        if (r.has_post)
            post_row(run_label, r.post_acc, r.post_nmi, r.post_acc - r.baseline_acc,
                     r.post_nmi - r.baseline_nmi, r.has_labels);
    }
    if (report.ok_runs > 0) {
        baseline_row("mean", report.mean_baseline_acc, report.mean_baseline_nmi,
                     report.has_labels);
        if (report.has_post)
            post_row("mean", report.mean_post_acc, report.mean_post_nmi,
                     report.mean_acc_delta, report.mean_nmi_delta, report.has_labels);
    }
    if (!out) throw data_error("failed writing metrics CSV '" + path + "'");
}

void write_trace_csv(const std::string& path, const TransferTrace& trace) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write trace CSV '" + path + "'");
    out << "epoch,l_ae,l_h,l_total\n";
    for (size_t e = 0; e < trace.l_total.size(); ++e)
        out << e << "," << format_metric(trace.l_ae[e]) << "," << format_metric(trace.l_h[e])
            << "," << format_metric(trace.l_total[e]) << "\n";
    if (!out) throw data_error("failed writing trace CSV '" + path + "'");
}

void write_pretrain_trace_csv(const std::string& path, const std::vector<double>& l_ae) {
    TransferTrace trace;
    trace.l_ae = l_ae;
    trace.l_h.assign(l_ae.size(), 0.0);
    trace.l_total = l_ae;
    write_trace_csv(path, trace);
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
    validate(cfg);
    fs::create_directories(cfg.out_dir);
    {
        std::ofstream echo(cfg.out_dir + "/resolved.cfg");
        if (!echo) throw data_error("cannot write resolved config in '" + cfg.out_dir + "'");
        echo << resolved_config_text(cfg);
    }

    const Dataset data = load_experiment_dataset(cfg);

    MetricsReport report;
    report.config_id = cfg.config_id;
    report.runs.resize(static_cast<size_t>(cfg.runs));

    std::atomic<int> next{0};
    auto work = [&]() {
        for (;;) {
            const int idx = next.fetch_add(1);
            if (idx >= cfg.runs) return;
            report.runs[static_cast<size_t>(idx)] = execute_run(cfg, data, idx + 1);
        }
    };
    const int workers = std::min(cfg.workers, cfg.runs);
    if (workers <= 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(workers));
        for (int w = 0; w < workers; ++w) pool.emplace_back(work);
        for (std::thread& t : pool) t.join();
    }

    finalize_report(report);
    write_metrics_csv(cfg.out_dir + "/metrics.csv", report);

    std::string errors;
    for (const RunMetrics& r : report.runs)
        if (!r.ok) errors += "run " + std::to_string(r.run) + " failed at " + r.error + "\n";
    if (!errors.empty()) {
        std::ofstream err(cfg.out_dir + "/errors.txt");
        err << errors;
    }
    return report;
}

std::vector<GridCell> grid_cells_from_config(const ConfigMap& cfg) {
    std::map<std::string, GridCell> cells;
    for (const std::string& key : cfg.keys_with_prefix("cell")) {
        const size_t name_end = key.find('.', 5);
        if (key.rfind("cell.", 0) != 0 || name_end == std::string::npos)
            throw config_error("grid: malformed cell key '" + key + "'");
        const std::string name = key.substr(5, name_end - 5);
        if (name.empty()) throw config_error("grid: empty cell name in '" + key + "'");
        cells[name].name = name;
    }
    std::vector<GridCell> out;
    for (auto& [name, cell] : cells) {
        cell.evidence = evidence_from_keys(cfg, "cell." + name + ".evidence");
        out.push_back(cell);
    }
    return out;
}

std::vector<MetricsReport> run_grid(const ExperimentConfig& base,
                                    const std::vector<GridCell>& cells) {
    if (cells.empty()) throw config_error("grid: no cells defined");
    fs::create_directories(base.out_dir);

    std::vector<MetricsReport> reports;
    std::vector<std::string> failures(cells.size());
    for (size_t c = 0; c < cells.size(); ++c) {
        ExperimentConfig cell_cfg = base;
        cell_cfg.evidence = cells[c].evidence;
        cell_cfg.config_id = cells[c].name;
        cell_cfg.out_dir = base.out_dir + "/" + cells[c].name;
        MetricsReport report;
        report.config_id = cells[c].name;
        try {
            report = run_experiment(cell_cfg);
        } catch (const std::exception& e) {
            failures[c] = e.what();
        }
        reports.push_back(std::move(report));
    }

    std::ofstream out(base.out_dir + "/grid.csv");
    if (!out) throw data_error("cannot write grid CSV in '" + base.out_dir + "'");
    out << "config_id,status,acc,nmi,acc_delta,nmi_delta\n";
    for (size_t c = 0; c < cells.size(); ++c) {
        const MetricsReport& r = reports[c];
        const bool failed = !failures[c].empty() || r.ok_runs == 0;
        out << r.config_id << "," << (failed ? "failed" : "ok") << ",";
        if (!failed && r.has_labels) {
            if (r.has_post)
                out << format_metric(r.mean_post_acc) << "," << format_metric(r.mean_post_nmi)
                    << "," << format_metric(r.mean_acc_delta) << ","
                    << format_metric(r.mean_nmi_delta);
            else
                out << format_metric(r.mean_baseline_acc) << ","
                    << format_metric(r.mean_baseline_nmi) << ",,";
        } else {
            out << ",,,";
        }
        out << "\n";
    }
    return reports;
}

}  // namespace evitram
