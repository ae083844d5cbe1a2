#include "evitram/evidence.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "evitram/losses.hpp"
#include "evitram/optimizer.hpp"

namespace evitram {

std::string evidence_quality_name(EvidenceQuality q) {
    switch (q) {
        case EvidenceQuality::real: return "real";
        case EvidenceQuality::white_noise: return "white_noise";
        case EvidenceQuality::random_index: return "random_index";
    }
    throw config_error("unknown evidence quality");
}

EvidenceQuality evidence_quality_from_name(const std::string& name) {
    if (name == "real") return EvidenceQuality::real;
    if (name == "white_noise") return EvidenceQuality::white_noise;
    if (name == "random_index") return EvidenceQuality::random_index;
    throw config_error("unknown evidence quality '" + name + "'");
}

EvidenceSource evidence_from_labels(const Labels& labels, int width, EvidenceQuality quality) {
    if (width <= 0) throw config_error("evidence: width must be positive");
    if (labels.empty()) throw data_error("evidence: empty label list");
    EvidenceSource v;
    v.labels = labels;
    v.width = width;
    v.quality = quality;
    v.onehot = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), width);
    for (size_t i = 0; i < labels.size(); ++i) {
        const int c = labels[i];
        if (c < 0 || c >= width)
            throw data_error("evidence: label " + std::to_string(c) + " at row " +
                             std::to_string(i) + " outside [0, " + std::to_string(width) + ")");
        v.onehot(static_cast<Eigen::Index>(i), c) = 1.0;
    }
    return v;
}

EvidenceSource derive_evidence(const Labels& labels, const std::function<int(int)>& mapping,
                               int width) {
    Labels grouped(labels.size());
    for (size_t i = 0; i < labels.size(); ++i) grouped[i] = mapping(labels[i]);
    return evidence_from_labels(grouped, width, EvidenceQuality::real);
}

EvidenceSource white_noise_evidence(int n, int width, Rng& rng) {
    if (width < 2) throw config_error("white_noise_evidence: width must be at least 2");
    if (n <= 0) throw config_error("white_noise_evidence: n must be positive");
    Labels labels(n);
    for (int i = 0; i < n; ++i) labels[i] = static_cast<int>(rng.uniform_int(width));
    return evidence_from_labels(labels, width, EvidenceQuality::white_noise);
}

EvidenceSource random_index_evidence(const EvidenceSource& real, Rng& rng) {
    if (real.quality != EvidenceQuality::real)
        throw config_error("random_index_evidence: source must be real evidence");
    const int n = static_cast<int>(real.labels.size());
    const std::vector<int> perm = rng.permutation(n);
    Labels shuffled(n);
    for (int i = 0; i < n; ++i) shuffled[i] = real.labels[perm[i]];
    return evidence_from_labels(shuffled, real.width, EvidenceQuality::random_index);
}

EvidenceEncoder train_evidence_encoder(const EvidenceSource& v, int latent_width, int epochs,
                                       Rng& rng) {
    if (latent_width <= 0)
        throw config_error("train_evidence_encoder: latent_width must be positive");
    if (epochs < 0) throw config_error("train_evidence_encoder: epochs must be non-negative");
    const int n = static_cast<int>(v.onehot.rows());
    if (n == 0) throw data_error("train_evidence_encoder: empty evidence");

    EvidenceEncoder enc;
    enc.encoder = make_network({{v.width, latent_width, Activation::softmax}}, rng);
    enc.decoder = make_network({{latent_width, v.width, Activation::linear}}, rng);
    enc.trained_epochs = epochs;

    OptimizerConfig opt{OptimizerKind::sgd, 0.01, 0.0, std::min(256, n)};
    OptimizerState enc_state, dec_state;

    for (int epoch = 0; epoch < epochs; ++epoch) {
        const std::vector<int> perm = rng.permutation(n);
        double sq_sum = 0.0;
        for (int start = 0; start < n; start += opt.batch_size) {
            const int count = std::min(opt.batch_size, n - start);
            const Matrix vb = take_rows(v.onehot, perm.data() + start, count);

            ForwardCache enc_cache, dec_cache;
            const Matrix h = forward(enc.encoder, vb, &enc_cache);
            const Matrix recon = forward(enc.decoder, h, &dec_cache);
            sq_sum += mse(recon, vb) * count;

            BackwardResult dec_back = backward(enc.decoder, dec_cache, mse_grad(recon, vb));
            BackwardResult enc_back = backward(enc.encoder, enc_cache, dec_back.input_grad);
            optimizer_step(enc.encoder.params, enc_back.grads, opt, enc_state);
            optimizer_step(enc.decoder.params, dec_back.grads, opt, dec_state);
        }
        if (!std::isfinite(sq_sum / n))
            throw divergence_error("evidence encoder diverged at epoch " + std::to_string(epoch));
    }
    return enc;
}

Matrix latent_evidence(const EvidenceEncoder& enc, const EvidenceSource& v) {
    if (v.onehot.cols() != enc.encoder.input_width())
        throw data_error("latent_evidence: evidence width " + std::to_string(v.onehot.cols()) +
                         " does not match encoder input " +
                         std::to_string(enc.encoder.input_width()));
    return forward(enc.encoder, v.onehot);
}

double evidence_reconstruction_mse(const EvidenceEncoder& enc, const EvidenceSource& v) {
    return mse(forward(enc.decoder, latent_evidence(enc, v)), v.onehot);
}

void save_evidence_file(const std::string& path, const EvidenceSource& v) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write evidence file '" + path + "'");
    out << "# width=" << v.width << "\n";
    for (int label : v.labels) out << label << "\n";
    if (!out) throw data_error("failed writing evidence file '" + path + "'");
}

std::pair<Labels, int> load_evidence_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot read evidence file '" + path + "'");
    Labels labels;
    int width = -1;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto pos = line.find("width=");
            if (pos != std::string::npos) {
                try {
                    width = std::stoi(line.substr(pos + 6));
                } catch (const std::exception&) {
                    throw data_error(path + ":" + std::to_string(line_no) +
                                     ": malformed width header");
                }
            }
            continue;
        }
        int value = 0;
        if (std::sscanf(line.c_str(), "%d", &value) != 1)
            throw data_error(path + ":" + std::to_string(line_no) + ": expected integer label");
        if (value < 0)
            throw data_error(path + ":" + std::to_string(line_no) + ": negative label");
        labels.push_back(value);
    }
    if (labels.empty()) throw data_error(path + ": no labels found");
    const int max_label = *std::max_element(labels.begin(), labels.end());
    if (width < 0) width = max_label + 1;
    if (max_label >= width)
        throw data_error(path + ": label " + std::to_string(max_label) +
                         " outside declared width " + std::to_string(width));
    return {labels, width};
}

}  // namespace evitram
