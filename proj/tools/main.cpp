#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evitram/checkpoint.hpp"
#include "evitram/experiment.hpp"
#include "evitram/metrics.hpp"

namespace ev = evitram;
namespace fs = std::filesystem;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::uint64_t seed = 0;
    bool seed_given = false;
    int workers = 0;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool needs_config) {
    auto* config = cmd->add_option("--config", args.config_path, "key = value config file");
    if (needs_config) config->required();
    cmd->add_option("--seed", args.seed, "master seed (overrides the config)")
        ->each([&args](const std::string&) { args.seed_given = true; });
    cmd->add_option("--out", args.out_dir, "output directory (overrides the config)");
    cmd->add_option("--workers", args.workers, "concurrent runs (overrides the config)");
}

ev::ExperimentConfig load_experiment(const CommonArgs& args) {
    ev::ConfigMap cfg = args.config_path.empty()
                            ? ev::ConfigMap()
                            : ev::ConfigMap::parse_file(args.config_path);
    if (args.seed_given) cfg.set("seed", std::to_string(args.seed));
    if (!args.out_dir.empty()) cfg.set("out", args.out_dir);
    if (args.workers > 0) cfg.set("workers", std::to_string(args.workers));
    return ev::experiment_from_config(cfg);
}

ev::Dataset load_dataset_for(const ev::ExperimentConfig& cfg) {
    if (cfg.dataset.kind == "synthetic") return ev::generate_synthetic(cfg.dataset.synth).data;
    if (cfg.dataset.kind == "idx") return ev::load_idx(cfg.dataset.idx_images, cfg.dataset.idx_labels);
    return ev::load_csv(cfg.dataset.csv_path);
}

ev::Labels read_label_file(const std::string& path) { return ev::load_evidence_file(path).first; }

void print_report(const ev::MetricsReport& report) {
    for (const ev::RunMetrics& r : report.runs) {
        if (!r.ok) {
            std::cout << "run " << r.run << ": FAILED (" << r.error << ")\n";
            continue;
        }
        std::cout << "run " << r.run << ": baseline";
        if (r.has_labels)
            std::cout << " acc=" << ev::format_metric(r.baseline_acc)
                      << " nmi=" << ev::format_metric(r.baseline_nmi);
        std::cout << " mse=" << ev::format_metric(r.baseline_mse);
        if (r.has_post) {
            std::cout << " | post";
            if (r.has_labels)
                std::cout << " acc=" << ev::format_metric(r.post_acc) << " ("
                          << (r.post_acc >= r.baseline_acc ? "+" : "")
                          << ev::format_metric(r.post_acc - r.baseline_acc) << ")"
                          << " nmi=" << ev::format_metric(r.post_nmi) << " ("
                          << (r.post_nmi >= r.baseline_nmi ? "+" : "")
                          << ev::format_metric(r.post_nmi - r.baseline_nmi) << ")";
            std::cout << " mse=" << ev::format_metric(r.post_mse);
        }
        std::cout << "\n";
    }
    if (report.ok_runs > 0 && report.has_labels) {
        std::cout << "mean: baseline acc=" << ev::format_metric(report.mean_baseline_acc)
                  << " nmi=" << ev::format_metric(report.mean_baseline_nmi);
        if (report.has_post)
            std::cout << " | post acc=" << ev::format_metric(report.mean_post_acc) << " ("
                      << (report.mean_acc_delta >= 0 ? "+" : "")
                      << ev::format_metric(report.mean_acc_delta) << ")"
                      << " nmi=" << ev::format_metric(report.mean_post_nmi) << " ("
                      << (report.mean_nmi_delta >= 0 ? "+" : "")
                      << ev::format_metric(report.mean_nmi_delta) << ")";
        std::cout << "\n";
    }
}

int cmd_synth(const CommonArgs& args) {
    ev::ExperimentConfig cfg = load_experiment(args);
    if (cfg.dataset.kind != "synthetic")
        throw ev::config_error("synth: dataset.kind must be synthetic");
    const ev::SyntheticData synth = ev::generate_synthetic(cfg.dataset.synth);
    fs::create_directories(cfg.out_dir);
    ev::save_csv(cfg.out_dir + "/data.csv", synth.data);

    const ev::EvidenceSource groups = ev::evidence_from_labels(
        synth.supergroups, cfg.dataset.synth.n_supergroups, ev::EvidenceQuality::real);
    ev::save_evidence_file(cfg.out_dir + "/supergroups.txt", groups);

    const ev::Labels* labels = synth.data.true_labels ? &*synth.data.true_labels : nullptr;
    for (size_t j = 0; j < cfg.evidence.size(); ++j) {
        ev::Rng ev_rng = ev::run_stream(cfg.master_seed, 1)
                             .child(ev::kStreamEvidenceBase + static_cast<std::uint64_t>(j));
        const ev::EvidenceSource v =
            ev::build_evidence(cfg.evidence[j], labels,
                               static_cast<int>(synth.data.features.rows()), ev_rng);
        ev::save_evidence_file(cfg.out_dir + "/evidence_" + std::to_string(j) + ".txt", v);
    }
    std::cout << "wrote " << synth.data.features.rows() << " samples ("
              << synth.data.features.cols() << " features) to " << cfg.out_dir << "\n";
    return 0;
}

int cmd_pretrain(const CommonArgs& args) {
    ev::ExperimentConfig cfg = load_experiment(args);
    const ev::Dataset data = load_dataset_for(cfg);
    ev::DenoisingAEConfig ae_cfg = cfg.ae;
    ae_cfg.input_width = static_cast<int>(data.features.cols());
    ev::Rng rng(cfg.master_seed);
    const ev::PretrainResult result = ev::pretrain(data.features, ae_cfg, rng);
    fs::create_directories(cfg.out_dir);
    ev::save_checkpoint(cfg.out_dir + "/pretrain.ckpt", result.model);
    ev::write_pretrain_trace_csv(cfg.out_dir + "/pretrain_trace.csv", result.trace);
    std::cout << "pretrained " << ae_cfg.epochs << " epochs";
    if (!result.trace.empty())
        std::cout << ", final mse=" << ev::format_metric(result.trace.back());
    std::cout << "; checkpoint at " << cfg.out_dir << "/pretrain.ckpt\n";
    return 0;
}

int cmd_transfer(const CommonArgs& args, const std::string& ckpt,
                 const std::vector<std::string>& evidence_files) {
    ev::ExperimentConfig cfg = load_experiment(args);
    if (evidence_files.empty())
        throw ev::config_error("transfer: at least one --evidence file is required");
    const ev::Dataset data = load_dataset_for(cfg);
    ev::DenoisingAutoencoder base = ev::load_autoencoder(ckpt);
    if (base.config.input_width != data.features.cols())
        throw ev::data_error("transfer: checkpoint expects " +
                             std::to_string(base.config.input_width) +
                             "-wide inputs, dataset has " +
                             std::to_string(data.features.cols()));

    const ev::Rng stream(cfg.master_seed);
    std::vector<ev::Matrix> zv;
    for (size_t j = 0; j < evidence_files.size(); ++j) {
        const auto [labels, width] = ev::load_evidence_file(evidence_files[j]);
        if (static_cast<Eigen::Index>(labels.size()) != data.features.rows())
            throw ev::data_error("transfer: evidence file '" + evidence_files[j] + "' has " +
                                 std::to_string(labels.size()) + " labels for " +
                                 std::to_string(data.features.rows()) + " samples");
        const ev::EvidenceSource v =
            ev::evidence_from_labels(labels, width, ev::EvidenceQuality::real);
        ev::Rng ev_rng = stream.child(ev::kStreamEvidenceBase + static_cast<std::uint64_t>(j));
        const ev::EvidenceEncoder enc =
            ev::train_evidence_encoder(v, base.config.latent_width, cfg.evidence_epochs, ev_rng);
        zv.push_back(ev::latent_evidence(enc, v));
    }

    ev::Rng tr_rng = stream.child(ev::kStreamTransfer);
    ev::EviTramModel model =
        ev::attach_heads(base, static_cast<int>(evidence_files.size()), tr_rng);
    model.zv = std::move(zv);
    const ev::TransferTrace trace = ev::transfer(model, data.features, cfg.transfer, tr_rng);

    fs::create_directories(cfg.out_dir);
    ev::save_checkpoint(cfg.out_dir + "/evitram.ckpt", model);
    ev::write_trace_csv(cfg.out_dir + "/transfer_trace.csv", trace);
    std::cout << "transferred " << cfg.transfer.epochs << " epochs with "
              << evidence_files.size() << " evidence source(s)";
    if (!trace.l_total.empty())
        std::cout << ", final l_total=" << ev::format_metric(trace.l_total.back());
    std::cout << "; checkpoint at " << cfg.out_dir << "/evitram.ckpt\n";
    return 0;
}

int cmd_cluster(const CommonArgs& args, const std::string& ckpt) {
    ev::ExperimentConfig cfg = load_experiment(args);
    const ev::Dataset data = load_dataset_for(cfg);
    const ev::DenoisingAutoencoder model = ev::checkpoint_kind(ckpt) == ev::CheckpointKind::evitram
                                               ? ev::load_evitram(ckpt).base
                                               : ev::load_autoencoder(ckpt);
    ev::KMeansConfig km = cfg.clustering;
    km.seed = cfg.master_seed;
    const ev::ClusteringResult result = ev::kmeans(ev::encode(model, data.features), km);

    fs::create_directories(cfg.out_dir);
    const ev::EvidenceSource assignments =
        ev::evidence_from_labels(result.assignments, km.k, ev::EvidenceQuality::real);
    ev::save_evidence_file(cfg.out_dir + "/assignments.txt", assignments);
    std::cout << "k=" << km.k << " inertia=" << result.inertia << " iterations="
              << result.iterations_run << "; assignments at " << cfg.out_dir
              << "/assignments.txt\n";
    if (data.true_labels) {
        std::cout << "acc=" << ev::format_metric(ev::acc(result.assignments, *data.true_labels))
                  << " nmi=" << ev::format_metric(ev::nmi(result.assignments, *data.true_labels))
                  << "\n";
    }
    return 0;
}

int cmd_eval(const std::string& pred_path, const std::string& truth_path) {
    const ev::Labels pred = read_label_file(pred_path);
    const ev::Labels truth = read_label_file(truth_path);
    std::cout << "acc=" << ev::format_metric(ev::acc(pred, truth))
              << " nmi=" << ev::format_metric(ev::nmi(pred, truth)) << "\n";
    return 0;
}

int cmd_experiment(const CommonArgs& args) {
    const ev::ExperimentConfig cfg = load_experiment(args);
    const ev::MetricsReport report = ev::run_experiment(cfg);
    print_report(report);
    std::cout << "metrics at " << cfg.out_dir << "/metrics.csv\n";
    if (report.ok_runs < static_cast<int>(report.runs.size()))
        throw ev::data_error(std::to_string(report.runs.size() - report.ok_runs) +
                             " run(s) failed; see " + cfg.out_dir + "/errors.txt");
    return 0;
}

int cmd_grid(const CommonArgs& args) {
    ev::ConfigMap cfg_map = args.config_path.empty()
                                ? ev::ConfigMap()
                                : ev::ConfigMap::parse_file(args.config_path);
    if (args.seed_given) cfg_map.set("seed", std::to_string(args.seed));
    if (!args.out_dir.empty()) cfg_map.set("out", args.out_dir);
    if (args.workers > 0) cfg_map.set("workers", std::to_string(args.workers));
    const std::vector<ev::GridCell> cells = ev::grid_cells_from_config(cfg_map);
    const ev::ExperimentConfig base = ev::experiment_from_config(cfg_map);
    const std::vector<ev::MetricsReport> reports = ev::run_grid(base, cells);
    for (const ev::MetricsReport& report : reports) {
        std::cout << "[" << report.config_id << "]\n";
        print_report(report);
    }
    std::cout << "grid summary at " << base.out_dir << "/grid.csv\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Evidence-aided representation learning pipeline"};
    app.require_subcommand(1);

    CommonArgs synth_args, pretrain_args, transfer_args, cluster_args, experiment_args,
        grid_args;
    std::string transfer_ckpt, cluster_ckpt, eval_pred, eval_truth;
    std::vector<std::string> transfer_evidence;

    add_common(app.add_subcommand("synth", "generate a synthetic blob dataset + evidence files"),
               synth_args, true);
    add_common(app.add_subcommand("pretrain", "pretrain the denoising autoencoder"),
               pretrain_args, true);

    CLI::App* transfer_cmd =
        app.add_subcommand("transfer", "fine-tune a pretrained model against evidence files");
    add_common(transfer_cmd, transfer_args, true);
    transfer_cmd->add_option("--ckpt", transfer_ckpt, "pretrained checkpoint")->required();
    transfer_cmd->add_option("--evidence", transfer_evidence,
                             "evidence label file (repeatable)");

    CLI::App* cluster_cmd = app.add_subcommand("cluster", "k-means on a model's latent codes");
    add_common(cluster_cmd, cluster_args, true);
    cluster_cmd->add_option("--ckpt", cluster_ckpt, "model checkpoint")->required();

    CLI::App* eval_cmd = app.add_subcommand("eval", "ACC/NMI between two label files");
    eval_cmd->add_option("--pred", eval_pred, "predicted labels file")->required();
    eval_cmd->add_option("--truth", eval_truth, "ground-truth labels file")->required();

    add_common(app.add_subcommand("experiment", "full pipeline: pretrain, cluster, transfer, re-cluster"),
               experiment_args, true);
    add_common(app.add_subcommand("grid", "one experiment per evidence cell"), grid_args, true);

    try {
        app.parse(argc, argv);
        if (app.got_subcommand("synth")) return cmd_synth(synth_args);
        if (app.got_subcommand("pretrain")) return cmd_pretrain(pretrain_args);
        if (app.got_subcommand("transfer"))
            return cmd_transfer(transfer_args, transfer_ckpt, transfer_evidence);
        if (app.got_subcommand("cluster")) return cmd_cluster(cluster_args, cluster_ckpt);
        if (app.got_subcommand("eval")) return cmd_eval(eval_pred, eval_truth);
        if (app.got_subcommand("experiment")) return cmd_experiment(experiment_args);
        if (app.got_subcommand("grid")) return cmd_grid(grid_args);
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const ev::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const ev::divergence_error& e) {
        std::cerr << "divergence: " << e.what() << "\n";
        return 3;
    } catch (const ev::data_error& e) {
        std::cerr << "data error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
