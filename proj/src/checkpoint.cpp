#include "evitram/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace evitram {

namespace {

constexpr char kMagic[4] = {'E', 'V', 'T', 'C'};
constexpr std::uint32_t kVersion = 1;

struct Writer {
    std::ofstream out;
    std::string path;

    explicit Writer(const std::string& p) : out(p, std::ios::binary), path(p) {
        if (!out) throw data_error("cannot write checkpoint '" + p + "'");
    }
    void bytes(const void* data, size_t n) {
        out.write(static_cast<const char*>(data), static_cast<std::streamsize>(n));
    }
    void u8(std::uint8_t v) { bytes(&v, 1); }
    void u32(std::uint32_t v) { bytes(&v, 4); }
    void i32(std::int32_t v) { bytes(&v, 4); }
    void f64(double v) { bytes(&v, 8); }
    void finish() {
        if (!out) throw data_error("failed writing checkpoint '" + path + "'");
    }
};

struct Reader {
    std::ifstream in;
    std::string path;

    explicit Reader(const std::string& p) : in(p, std::ios::binary), path(p) {
        if (!in) throw data_error("cannot open checkpoint '" + p + "'");
    }
    void bytes(void* data, size_t n) {
        if (!in.read(static_cast<char*>(data), static_cast<std::streamsize>(n)))
            throw data_error(path + ": truncated checkpoint");
    }
    std::uint8_t u8() {
        std::uint8_t v;
        bytes(&v, 1);
        return v;
    }
    std::uint32_t u32() {
        std::uint32_t v;
        bytes(&v, 4);
        return v;
    }
    std::int32_t i32() {
        std::int32_t v;
        bytes(&v, 4);
        return v;
    }
    double f64() {
        double v;
        bytes(&v, 8);
        return v;
    }
};

void write_network(Writer& w, const Network& net) {
    w.i32(static_cast<std::int32_t>(net.layers.size()));
    for (size_t l = 0; l < net.layers.size(); ++l) {
        const LayerSpec& spec = net.layers[l];
        const LayerParams& p = net.params[l];
        w.u8(static_cast<std::uint8_t>(spec.activation));
        w.i32(spec.in_width);
        w.i32(spec.out_width);
        w.bytes(p.W.data(), sizeof(double) * static_cast<size_t>(p.W.size()));
        w.bytes(p.b.data(), sizeof(double) * static_cast<size_t>(p.b.size()));
    }
}

Network read_network(Reader& r) {
    const std::int32_t n_layers = r.i32();
    if (n_layers < 1 || n_layers > 1024)
        throw data_error(r.path + ": implausible layer count " + std::to_string(n_layers));
    Network net;
    for (std::int32_t l = 0; l < n_layers; ++l) {
        LayerSpec spec;
        const std::uint8_t act = r.u8();
        if (act > static_cast<std::uint8_t>(Activation::softmax))
            throw data_error(r.path + ": unknown activation tag " + std::to_string(act));
        spec.activation = static_cast<Activation>(act);
        spec.in_width = r.i32();
        spec.out_width = r.i32();
        if (spec.in_width < 1 || spec.out_width < 1)
            throw data_error(r.path + ": implausible layer shape");
        LayerParams p;
        p.W.resize(spec.in_width, spec.out_width);
        p.b.resize(spec.out_width);
        r.bytes(p.W.data(), sizeof(double) * static_cast<size_t>(p.W.size()));
        r.bytes(p.b.data(), sizeof(double) * static_cast<size_t>(p.b.size()));
        net.layers.push_back(spec);
        net.params.push_back(std::move(p));
    }
    return net;
}

void write_ae_body(Writer& w, const DenoisingAutoencoder& model) {
    const DenoisingAEConfig& cfg = model.config;
    w.i32(cfg.input_width);
    w.i32(static_cast<std::int32_t>(cfg.hidden_widths.size()));
    for (int h : cfg.hidden_widths) w.i32(h);
    w.i32(cfg.latent_width);
    w.f64(cfg.corruption_rate);
    w.i32(cfg.epochs);
    w.u8(static_cast<std::uint8_t>(cfg.optimizer.kind));
    w.f64(cfg.optimizer.learning_rate);
    w.f64(cfg.optimizer.momentum);
    w.i32(cfg.optimizer.batch_size);

    w.i32(static_cast<std::int32_t>(model.stats.mean.size()));
    w.bytes(model.stats.mean.data(), sizeof(double) * static_cast<size_t>(model.stats.mean.size()));
    w.bytes(model.stats.std.data(), sizeof(double) * static_cast<size_t>(model.stats.std.size()));

    write_network(w, model.encoder);
    write_network(w, model.decoder);
}

DenoisingAutoencoder read_ae_body(Reader& r) {
    DenoisingAutoencoder model;
    DenoisingAEConfig& cfg = model.config;
    cfg.input_width = r.i32();
    const std::int32_t n_hidden = r.i32();
    if (n_hidden < 0 || n_hidden > 1024)
        throw data_error(r.path + ": implausible hidden layer count");
    cfg.hidden_widths.clear();
    for (std::int32_t i = 0; i < n_hidden; ++i) cfg.hidden_widths.push_back(r.i32());
    cfg.latent_width = r.i32();
    cfg.corruption_rate = r.f64();
    cfg.epochs = r.i32();
    const std::uint8_t kind = r.u8();
    if (kind > static_cast<std::uint8_t>(OptimizerKind::adam))
        throw data_error(r.path + ": unknown optimizer tag");
    cfg.optimizer.kind = static_cast<OptimizerKind>(kind);
    cfg.optimizer.learning_rate = r.f64();
    cfg.optimizer.momentum = r.f64();
    cfg.optimizer.batch_size = r.i32();

    const std::int32_t stat_width = r.i32();
    if (stat_width < 1) throw data_error(r.path + ": implausible standardizer width");
    model.stats.mean.resize(stat_width);
    model.stats.std.resize(stat_width);
    r.bytes(model.stats.mean.data(), sizeof(double) * static_cast<size_t>(stat_width));
    r.bytes(model.stats.std.data(), sizeof(double) * static_cast<size_t>(stat_width));

    model.encoder = read_network(r);
    model.decoder = read_network(r);
    return model;
}

std::uint8_t read_header(Reader& r) {
    char magic[4];
    r.bytes(magic, 4);
    if (std::memcmp(magic, kMagic, 4) != 0)
        throw data_error(r.path + ": not a checkpoint file (bad magic)");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        throw data_error(r.path + ": unsupported checkpoint version " + std::to_string(version));
    return r.u8();
}

}  // namespace

void save_checkpoint(const std::string& path, const DenoisingAutoencoder& model) {
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u8(0);
    write_ae_body(w, model);
    w.finish();
}

void save_checkpoint(const std::string& path, const EviTramModel& model) {
    Writer w(path);
    w.bytes(kMagic, 4);
    w.u32(kVersion);
    w.u8(1);
    write_ae_body(w, model.base);
    w.f64(model.lambda);
    w.i32(static_cast<std::int32_t>(model.heads.size()));
    for (const Network& head : model.heads) write_network(w, head);
    w.finish();
}

CheckpointKind checkpoint_kind(const std::string& path) {
    Reader r(path);
    const std::uint8_t kind = read_header(r);
    if (kind == 0) return CheckpointKind::autoencoder;
    if (kind == 1) return CheckpointKind::evitram;
    throw data_error(path + ": unknown checkpoint kind " + std::to_string(kind));
}

DenoisingAutoencoder load_autoencoder(const std::string& path) {
    Reader r(path);
    if (read_header(r) != 0)
        throw data_error(path + ": expected an autoencoder checkpoint");
    return read_ae_body(r);
}

EviTramModel load_evitram(const std::string& path) {
    Reader r(path);
    if (read_header(r) != 1)
        throw data_error(path + ": expected a transfer-model checkpoint");
    EviTramModel model;
    model.base = read_ae_body(r);
    model.lambda = r.f64();
    const std::int32_t n_heads = r.i32();
    if (n_heads < 0 || n_heads > 1024)
        throw data_error(path + ": implausible head count");
    for (std::int32_t j = 0; j < n_heads; ++j) model.heads.push_back(read_network(r));
    return model;
}

}  // namespace evitram
