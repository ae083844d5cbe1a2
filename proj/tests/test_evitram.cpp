#include <cmath>
#include <algorithm>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "evitram/checkpoint.hpp"
#include "evitram/evidence.hpp"
#include "evitram/evitram.hpp"
#include "evitram/losses.hpp"
#include "oracles.hpp"

using namespace evitram;

namespace {

Matrix gaussian_blobs(int n, int d, Rng& rng, double spread = 2.0) {
    Matrix x(n, d);
    for (int i = 0; i < n; ++i) {
        const double center = (i % 2 == 0) ? spread : -spread;
        for (int j = 0; j < d; ++j) x(i, j) = center + rng.normal();
    }
    return x;
}

DenoisingAutoencoder small_base(const Matrix& x, int epochs, Rng& rng) {
    DenoisingAEConfig cfg;
    cfg.input_width = static_cast<int>(x.cols());
    cfg.hidden_widths = {12, 8};
    cfg.latent_width = 4;
    cfg.corruption_rate = 0.2;
    cfg.epochs = epochs;
    cfg.optimizer = {OptimizerKind::adam, 0.001, 0.9,
                     std::min<int>(32, static_cast<int>(x.rows()))};
    return pretrain(x, cfg, rng).model;
}

// Frozen targets for k heads: categorical rows derived from sample index.
std::vector<Matrix> toy_targets(int n, int latent, int k, Rng& rng) {
    std::vector<Matrix> zv;
    for (int j = 0; j < k; ++j) {
        Matrix t(n, latent);
        for (int i = 0; i < n; ++i) {
            double sum = 0.0;
            for (int c = 0; c < latent; ++c) {
                t(i, c) = rng.uniform() + ((i + j) % latent == c ? 2.0 : 0.05);
                sum += t(i, c);
            }
            t.row(i) /= sum;
        }
        zv.push_back(std::move(t));
    }
    return zv;
}

bool same_params(const Network& a, const Network& b) {
    if (a.params.size() != b.params.size()) return false;
    for (std::size_t i = 0; i < a.params.size(); ++i) {
        if (a.params[i].W.rows() != b.params[i].W.rows() ||
            a.params[i].W.cols() != b.params[i].W.cols())
            return false;
        if ((a.params[i].W.array() != b.params[i].W.array()).any()) return false;
        if ((a.params[i].b.array() != b.params[i].b.array()).any()) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("attach_heads copies the base bit-identically and shapes the heads") {
    Rng data_rng(1);
    const Matrix x = gaussian_blobs(60, 6, data_rng);
    Rng train_rng(2);
    const DenoisingAutoencoder base = small_base(x, 3, train_rng);

    Rng head_rng(3);
    const EviTramModel model = attach_heads(base, 2, head_rng);
    CHECK(same_params(model.base.encoder, base.encoder));
    CHECK(same_params(model.base.decoder, base.decoder));
    REQUIRE(model.heads.size() == 2);
    for (const Network& head : model.heads) {
        REQUIRE(head.layers.size() == 1);
        CHECK(head.layers[0].in_width == 4);
        CHECK(head.layers[0].out_width == 4);
        CHECK(head.layers[0].activation == Activation::softmax);
    }
    // Distinct random inits per head.
    CHECK(!same_params(model.heads[0], model.heads[1]));

    Rng r2(4);
    CHECK_THROWS_AS(attach_heads(base, 0, r2), config_error);

    EviTramModel grown = model;
    add_head(grown, r2);
    CHECK(grown.heads.size() == 3);
    CHECK(grown.heads[2].layers[0].out_width == 4);
}

TEST_CASE("fresh heads predict near-uniform distributions") {
    Rng data_rng(5);
    const Matrix x = gaussian_blobs(40, 6, data_rng);
    Rng train_rng(6);
    const DenoisingAutoencoder base = small_base(x, 3, train_rng);
    Rng head_rng(7);
    const EviTramModel model = attach_heads(base, 1, head_rng);

    const Matrix z = encode(base, x);
    const Matrix pred = forward(model.heads[0], z);
    for (Eigen::Index i = 0; i < pred.rows(); ++i)
        CHECK(pred.row(i).sum() == doctest::Approx(1.0).epsilon(1e-9));
    // Latent codes after 3 epochs stay small enough that Glorot
    // head logits keep softmax outputs within 0.35 of uniform (observed 0.19).
    CHECK((pred.array() - 0.25).abs().maxCoeff() < 0.35);
}

TEST_CASE("evidence loss is the mean cross entropy over heads") {
    Rng data_rng(8);
    const Matrix x = gaussian_blobs(30, 5, data_rng);
    Rng train_rng(9);
    const DenoisingAutoencoder base = small_base(x, 2, train_rng);
    Rng head_rng(10);
    const EviTramModel model = attach_heads(base, 2, head_rng);

    const Matrix z = encode(base, x);
    Rng t_rng(11);
    const std::vector<Matrix> zv = toy_targets(30, 4, 2, t_rng);

    const double h0 = cross_entropy(zv[0], forward(model.heads[0], z));
    const double h1 = cross_entropy(zv[1], forward(model.heads[1], z));
    CHECK(evidence_loss(model, z, zv) == doctest::Approx(0.5 * (h0 + h1)).epsilon(1e-12));

    // Triple-loop oracle over heads, rows, and classes.
    double want = 0.0;
    for (int j = 0; j < 2; ++j)
        want += oracle::cross_entropy_loops(zv[j], forward(model.heads[j], z));
    want /= 2.0;
    CHECK(evidence_loss(model, z, zv) == doctest::Approx(want).epsilon(1e-12));

    CHECK_THROWS_AS(evidence_loss(model, z, {zv[0]}), config_error);
}

TEST_CASE("joint loss composes the two objectives with lambda") {
    Rng data_rng(12);
    const Matrix x = gaussian_blobs(40, 5, data_rng);
    Rng train_rng(13);
    const DenoisingAutoencoder base = small_base(x, 4, train_rng);
    Rng head_rng(14);
    EviTramModel model = attach_heads(base, 2, head_rng);
    Rng t_rng(15);
    const std::vector<Matrix> zv = toy_targets(40, 4, 2, t_rng);

    model.lambda = 0.0;
    const JointLoss at_zero = joint_loss(model, x, zv);
    CHECK(at_zero.l_total == at_zero.l_ae);
    CHECK(at_zero.l_ae == doctest::Approx(reconstruction_mse(base, x)).epsilon(1e-12));

    model.lambda = 0.7;
    const JointLoss at_07 = joint_loss(model, x, zv);
    CHECK(at_07.l_ae == at_zero.l_ae);
    CHECK(at_07.l_h == at_zero.l_h);
    CHECK(at_07.l_total == doctest::Approx(at_07.l_ae + 0.7 * at_07.l_h).epsilon(1e-12));
}

TEST_CASE("joint gradients match finite differences at lambda 0.3") {
    Rng data_rng(16);
    const Matrix x = gaussian_blobs(12, 4, data_rng);
    DenoisingAEConfig cfg;
    cfg.input_width = 4;
    cfg.hidden_widths = {5};
    cfg.latent_width = 3;
    cfg.epochs = 2;
    cfg.optimizer = {OptimizerKind::adam, 0.001, 0.9, 12};
    Rng train_rng(17);
    const PretrainResult pre = pretrain(x, cfg, train_rng);

    Rng head_rng(18);
    EviTramModel model = attach_heads(pre.model, 2, head_rng);
    model.lambda = 0.3;
    Rng t_rng(19);
    const std::vector<Matrix> zv = toy_targets(12, 3, 2, t_rng);

    const Matrix clean = model.base.stats.apply(x);
    Rng c_rng(20);
    const Matrix noisy = corrupt(clean, 0.2, c_rng);
    const JointBatchResult got = compute_joint_gradients(model, noisy, clean, zv);

    CHECK(got.l_total == doctest::Approx(got.l_ae + 0.3 * got.l_h).epsilon(1e-12));
    REQUIRE(got.head_grads.size() == 2);

    // Finite differences of the full objective as a function of every
    // parameter tensor in the model (encoder, decoder, both heads).
    auto objective = [&]() {
        const Matrix z = forward(model.base.encoder, noisy);
        const Matrix rec = forward(model.base.decoder, z);
        double total = mse(rec, clean);
        const Matrix z_clean = z;  // heads see the same latents as training
        double lh = 0.0;
        for (int j = 0; j < 2; ++j)
            lh += oracle::cross_entropy_loops(zv[j], forward(model.heads[j], z_clean));
        return total + 0.3 * lh / 2.0;
    };

    CHECK(oracle::max_grad_error(model.base.encoder, got.enc_grads, objective) < 1e-4);
    CHECK(oracle::max_grad_error(model.base.decoder, got.dec_grads, objective) < 1e-4);
    CHECK(oracle::max_grad_error(model.heads[0], got.head_grads[0], objective) < 1e-4);
    CHECK(oracle::max_grad_error(model.heads[1], got.head_grads[1], objective) < 1e-4);
}

TEST_CASE("transfer with zero epochs leaves the model untouched") {
    Rng data_rng(21);
    const Matrix x = gaussian_blobs(30, 5, data_rng);
    Rng train_rng(22);
    const DenoisingAutoencoder base = small_base(x, 2, train_rng);
    Rng head_rng(23);
    EviTramModel model = attach_heads(base, 1, head_rng);
    Rng t_rng(24);
    model.zv = toy_targets(30, 4, 1, t_rng);
    const EviTramModel before = model;

    TransferConfig cfg;
    cfg.epochs = 0;
    cfg.optimizer.batch_size = 30;
    Rng r(25);
    const TransferTrace trace = transfer(model, x, cfg, r);
    CHECK(trace.l_total.empty());
    CHECK(trace.optimizer_applications == 0);
    CHECK(same_params(before.base.encoder, model.base.encoder));
    CHECK(same_params(before.heads[0], model.heads[0]));
    CHECK(model.lambda == cfg.lambda);  // config lambda is stamped regardless
}

TEST_CASE("joint transfer at lambda 0 reproduces plain continued training bitwise") {
    Rng data_rng(26);
    const Matrix x = gaussian_blobs(64, 6, data_rng);
    Rng train_rng(27);
    const DenoisingAutoencoder base = small_base(x, 3, train_rng);

    // Path A: plain continued pretraining.
    DenoisingAutoencoder plain = base;
    OptimizerConfig opt{OptimizerKind::sgd_momentum, 0.01, 0.9, 32};
    Rng ra(99);
    const std::vector<double> plain_trace =
        continue_training(plain, x, 6, opt, base.config.corruption_rate, ra);

    // Path B: transfer with lambda == 0 and identical optimizer/rng stream.
    Rng head_rng(28);
    EviTramModel model = attach_heads(base, 2, head_rng);
    Rng t_rng(29);
    model.zv = toy_targets(64, 4, 2, t_rng);
    TransferConfig cfg;
    cfg.lambda = 0.0;
    cfg.epochs = 6;
    cfg.optimizer = opt;
    Rng rb(99);
    const TransferTrace trace = transfer(model, x, cfg, rb);

    CHECK(same_params(plain.encoder, model.base.encoder));
    CHECK(same_params(plain.decoder, model.base.decoder));
    REQUIRE(trace.l_ae.size() == plain_trace.size());
    for (std::size_t i = 0; i < plain_trace.size(); ++i)
        CHECK(trace.l_ae[i] == plain_trace[i]);
    // Heads were never stepped.
    Rng head_rng2(28);
    const EviTramModel untouched = attach_heads(base, 2, head_rng2);
    CHECK(same_params(model.heads[0], untouched.heads[0]));
    CHECK(same_params(model.heads[1], untouched.heads[1]));
}

TEST_CASE("disjoint transfer at lambda 0 also reproduces continued training") {
    // The reconstruction step of the alternating variant uses the same lr;
    // the evidence step multiplies zero gradients into the parameters, which
    // must leave them exactly unchanged (0 * x == 0 in IEEE arithmetic with
    // finite x), so end-to-end equality still holds in the == sense.
    Rng data_rng(30);
    const Matrix x = gaussian_blobs(48, 5, data_rng);
    Rng train_rng(31);
    const DenoisingAutoencoder base = small_base(x, 2, train_rng);

    DenoisingAutoencoder plain = base;
    OptimizerConfig opt{OptimizerKind::sgd, 0.02, 0.0, 24};
    Rng ra(55);
    continue_training(plain, x, 4, opt, base.config.corruption_rate, ra);

    Rng head_rng(32);
    EviTramModel model = attach_heads(base, 1, head_rng);
    Rng t_rng(33);
    model.zv = toy_targets(48, 4, 1, t_rng);
    TransferConfig cfg;
    cfg.lambda = 0.0;
    cfg.epochs = 4;
    cfg.optimizer = opt;
    cfg.mode = TransferMode::disjoint;
    Rng rb(55);
    const TransferTrace trace = transfer(model, x, cfg, rb);

    CHECK(same_params(plain.encoder, model.base.encoder));
    CHECK(same_params(plain.decoder, model.base.decoder));
    // 4 epochs x 2 batches x 2 objective steps.
    CHECK(trace.optimizer_applications == 16);
}

TEST_CASE("joint transfer counts one optimizer application per batch") {
    Rng data_rng(34);
    const Matrix x = gaussian_blobs(40, 5, data_rng);
    Rng train_rng(35);
    const DenoisingAutoencoder base = small_base(x, 2, train_rng);
    Rng head_rng(36);
    EviTramModel model = attach_heads(base, 1, head_rng);
    Rng t_rng(37);
    model.zv = toy_targets(40, 4, 1, t_rng);

    TransferConfig cfg;
    cfg.epochs = 3;
    cfg.optimizer.batch_size = 20;  // 2 batches per epoch
    Rng r(38);
    const TransferTrace trace = transfer(model, x, cfg, r);
    CHECK(trace.optimizer_applications == 6);
    REQUIRE(trace.l_ae.size() == 3);
    REQUIRE(trace.l_h.size() == 3);
    for (int e = 0; e < 3; ++e)
        CHECK(trace.l_total[e] ==
              doctest::Approx(trace.l_ae[e] + cfg.lambda * trace.l_h[e]).epsilon(1e-12));
}

TEST_CASE("transfer pulls latents toward the evidence targets") {
    // With a dominant lambda the evidence loss must drop substantially while
    // reconstruction stays finite.
    Rng data_rng(39);
    const Matrix x = gaussian_blobs(80, 6, data_rng);
    Rng train_rng(40);
    const DenoisingAutoencoder base = small_base(x, 10, train_rng);
    Rng head_rng(41);
    EviTramModel model = attach_heads(base, 1, head_rng);

    // Real grouped evidence: two groups from the data's own parity structure.
    Labels groups(80);
    for (int i = 0; i < 80; ++i) groups[i] = i % 2;
    const EvidenceSource src = evidence_from_labels(groups, 2, EvidenceQuality::real);
    Rng ev_rng(42);
    const EvidenceEncoder enc = train_evidence_encoder(src, 4, 5, ev_rng);
    model.zv = {latent_evidence(enc, src)};

    TransferConfig cfg;
    cfg.lambda = 1.0;
    cfg.epochs = 40;
    cfg.optimizer = {OptimizerKind::sgd_momentum, 0.01, 0.9, 40};
    Rng r(43);
    const TransferTrace trace = transfer(model, x, cfg, r);
    CHECK(trace.l_h.back() < trace.l_h.front());
    CHECK(std::isfinite(trace.l_ae.back()));
    CHECK(model.lambda == 1.0);
}

TEST_CASE("transfer validates its configuration and targets") {
    Rng data_rng(44);
    const Matrix x = gaussian_blobs(20, 4, data_rng);
    Rng train_rng(45);
    const DenoisingAutoencoder base = small_base(x, 1, train_rng);
    Rng head_rng(46);
    EviTramModel model = attach_heads(base, 1, head_rng);
    Rng t_rng(47);
    model.zv = toy_targets(20, 4, 1, t_rng);

    TransferConfig cfg;
    cfg.optimizer.batch_size = 20;
    cfg.lambda = -0.1;
    Rng r(48);
    CHECK_THROWS_AS(transfer(model, x, cfg, r), config_error);
    cfg.lambda = 0.1;
    cfg.mode = TransferMode::disjoint;
    cfg.disjoint_lr_ratio = 0.5;
    CHECK_THROWS_AS(transfer(model, x, cfg, r), config_error);
    cfg = TransferConfig{};
    cfg.optimizer.batch_size = 20;

    // Missing targets.
    EviTramModel no_targets = model;
    no_targets.zv.clear();
    CHECK_THROWS_AS(transfer(no_targets, x, cfg, r), config_error);

    // Row-count mismatch between x and targets.
    EviTramModel short_targets = model;
    short_targets.zv[0] = short_targets.zv[0].topRows(10);
    CHECK_THROWS_AS(transfer(short_targets, x, cfg, r), data_error);
}

TEST_CASE("transfer mode names round-trip") {
    for (TransferMode m : {TransferMode::joint, TransferMode::disjoint})
        CHECK(transfer_mode_from_name(transfer_mode_name(m)) == m);
    CHECK_THROWS_AS(transfer_mode_from_name("serial"), config_error);
}

TEST_CASE("evitram checkpoints round-trip byte-stably") {
    Rng data_rng(49);
    const Matrix x = gaussian_blobs(30, 5, data_rng);
    Rng train_rng(50);
    const DenoisingAutoencoder base = small_base(x, 2, train_rng);
    Rng head_rng(51);
    EviTramModel model = attach_heads(base, 2, head_rng);
    model.lambda = 0.25;
    Rng t_rng(52);
    model.zv = toy_targets(30, 4, 2, t_rng);

    namespace fs = std::filesystem;
    const fs::path dir = fs::temp_directory_path() / "evitram_model_ckpt";
    fs::create_directories(dir);
    const fs::path p1 = dir / "m.ckpt";
    const fs::path p2 = dir / "m2.ckpt";

    save_checkpoint(p1.string(), model);
    CHECK(checkpoint_kind(p1.string()) == CheckpointKind::evitram);
    // An autoencoder loader must refuse the other kind.
    CHECK_THROWS_AS(load_autoencoder(p1.string()), data_error);

    const EviTramModel loaded = load_evitram(p1.string());
    CHECK(loaded.lambda == 0.25);
    CHECK(loaded.zv.empty());  // targets are training-time data, not stored
    CHECK(same_params(loaded.base.encoder, model.base.encoder));
    CHECK(same_params(loaded.base.decoder, model.base.decoder));
    REQUIRE(loaded.heads.size() == 2);
    CHECK(same_params(loaded.heads[0], model.heads[0]));
    CHECK(same_params(loaded.heads[1], model.heads[1]));

    save_checkpoint(p2.string(), loaded);
    std::ifstream f1(p1, std::ios::binary), f2(p2, std::ios::binary);
    const std::string s1((std::istreambuf_iterator<char>(f1)), {});
    const std::string s2((std::istreambuf_iterator<char>(f2)), {});
    CHECK(s1 == s2);
    fs::remove_all(dir);
}
