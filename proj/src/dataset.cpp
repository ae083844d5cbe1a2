#include "evitram/dataset.hpp"

#include <algorithm>
#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace evitram {

void validate(const SyntheticSpec& spec) {
    if (spec.n_samples < 1) throw config_error("synthetic: n_samples must be positive");
    if (spec.dims < 1) throw config_error("synthetic: dims must be positive");
    if (spec.n_clusters < 1) throw config_error("synthetic: n_clusters must be positive");
    if (spec.n_supergroups < 1 || spec.n_supergroups > spec.n_clusters)
        throw config_error("synthetic: n_supergroups must be in [1, n_clusters]");
    if (!(spec.cluster_std > 0.0)) throw config_error("synthetic: cluster_std must be positive");
    if (!(spec.separation >= 0.0))
        throw config_error("synthetic: separation must be non-negative");
}

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
    validate(spec);
    Rng rng(spec.seed);

    const double min_dist = spec.separation * spec.cluster_std;
    // Box wide enough that well-separated means fit comfortably.
    const double box = std::max(1.0, min_dist) *
                       std::max(2.0, std::pow(static_cast<double>(spec.n_clusters),
                                              1.0 / spec.dims));
    Matrix means(spec.n_clusters, spec.dims);
    const int max_attempts = 1000;
    for (int c = 0; c < spec.n_clusters; ++c) {
        bool placed = false;
        for (int attempt = 0; attempt < max_attempts && !placed; ++attempt) {
            RowVector candidate(spec.dims);
            for (int j = 0; j < spec.dims; ++j) candidate[j] = rng.uniform(-box, box);
            placed = true;
            for (int p = 0; p < c; ++p)
                if ((candidate - means.row(p)).norm() < min_dist) {
                    placed = false;
                    break;
                }
            if (placed) means.row(c) = candidate;
        }
        if (!placed)
            throw config_error("synthetic: could not place cluster mean " + std::to_string(c) +
                               " with separation " + std::to_string(spec.separation) +
                               " after " + std::to_string(max_attempts) + " attempts");
    }

    SyntheticData out;
    out.data.name = "synthetic";
    out.data.provenance = Provenance::synthetic;
    out.data.features.resize(spec.n_samples, spec.dims);
    Labels labels(static_cast<size_t>(spec.n_samples));
    out.supergroups.resize(static_cast<size_t>(spec.n_samples));
    for (int i = 0; i < spec.n_samples; ++i) {
        const int c = i % spec.n_clusters;
        labels[static_cast<size_t>(i)] = c;
        out.supergroups[static_cast<size_t>(i)] = c % spec.n_supergroups;
        for (int j = 0; j < spec.dims; ++j)
            out.data.features(i, j) = means(c, j) + spec.cluster_std * rng.normal();
    }
    out.data.true_labels = std::move(labels);
    return out;
}

namespace {

std::uint32_t read_be32(std::ifstream& in, const std::string& path, const char* what) {
    unsigned char buf[4];
    if (!in.read(reinterpret_cast<char*>(buf), 4))
        throw data_error(path + ": truncated while reading " + std::string(what) +
                         " at offset " + std::to_string(static_cast<long long>(in.tellg())));
    return (static_cast<std::uint32_t>(buf[0]) << 24) |
           (static_cast<std::uint32_t>(buf[1]) << 16) |
           (static_cast<std::uint32_t>(buf[2]) << 8) | static_cast<std::uint32_t>(buf[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw data_error("cannot open IDX image file '" + images_path + "'");
    const std::uint32_t img_magic = read_be32(img, images_path, "magic");
    if (img_magic != 0x00000803u)
        throw data_error(images_path + ": bad image magic 0x" +
                         [&] {
                             char b[16];
                             std::snprintf(b, sizeof(b), "%08x", img_magic);
                             return std::string(b);
                         }() +
                         " at offset 0 (expected 0x00000803)");
    const std::uint32_t n = read_be32(img, images_path, "count");
    const std::uint32_t rows = read_be32(img, images_path, "rows");
    const std::uint32_t cols = read_be32(img, images_path, "cols");
    const std::uint64_t pixels = static_cast<std::uint64_t>(n) * rows * cols;
    std::vector<unsigned char> raw(pixels);
    if (!img.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(pixels)))
        throw data_error(images_path + ": truncated payload, expected " +
                         std::to_string(pixels) + " pixel bytes");

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw data_error("cannot open IDX label file '" + labels_path + "'");
    const std::uint32_t lab_magic = read_be32(lab, labels_path, "magic");
    if (lab_magic != 0x00000801u)
        throw data_error(labels_path + ": bad label magic at offset 0 (expected 0x00000801)");
    const std::uint32_t n_labels = read_be32(lab, labels_path, "count");
    if (n_labels != n)
        throw data_error("IDX count mismatch: " + std::to_string(n) + " images vs " +
                         std::to_string(n_labels) + " labels");
    std::vector<unsigned char> raw_labels(n_labels);
    if (!lab.read(reinterpret_cast<char*>(raw_labels.data()),
                  static_cast<std::streamsize>(n_labels)))
        throw data_error(labels_path + ": truncated payload, expected " +
                         std::to_string(n_labels) + " label bytes");

    Dataset out;
    out.name = "idx";
    out.provenance = Provenance::idx;
    out.features.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(rows * cols));
    for (std::uint32_t i = 0; i < n; ++i)
        for (std::uint32_t p = 0; p < rows * cols; ++p)
            out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(p)) =
                raw[static_cast<size_t>(i) * rows * cols + p] / 255.0;
    Labels labels(n_labels);
    for (std::uint32_t i = 0; i < n_labels; ++i) labels[i] = raw_labels[i];
    out.true_labels = std::move(labels);
    return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> cells;
    std::string cell;
    std::stringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    return cells;
}

bool parse_double(const std::string& s, double& out) {
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    out = std::strtod(begin, &end);
    if (end == begin || errno == ERANGE) return false;
    while (*end == ' ' || *end == '\t' || *end == '\r') ++end;
    return *end == '\0';
}

}  // namespace

Dataset load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("cannot open CSV file '" + path + "'");

    std::string line;
    int line_no = 0;
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;
    int label_col = -1;
    size_t width = 0;
    bool saw_header = false;

    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split_csv_line(line);
        if (line_no == 1) {
            double probe;
            bool numeric = true;
            for (const auto& c : cells)
                if (!parse_double(c, probe)) {
                    numeric = false;
                    break;
                }
            if (!numeric) {
                saw_header = true;
                header = cells;
                width = cells.size();
                for (size_t j = 0; j < cells.size(); ++j)
                    if (cells[j] == "label") label_col = static_cast<int>(j);
                continue;
            }
        }
        if (width == 0) width = cells.size();
        if (cells.size() != width)
            throw data_error(path + ":" + std::to_string(line_no) + ": ragged row, expected " +
                             std::to_string(width) + " cells, got " +
                             std::to_string(cells.size()));
        std::vector<double> values(width);
        for (size_t j = 0; j < width; ++j)
            if (!parse_double(cells[j], values[j]))
                throw data_error(path + ":" + std::to_string(line_no) +
                                 ": non-numeric cell '" + cells[j] + "'");
        rows.push_back(std::move(values));
    }
    if (rows.empty()) throw data_error(path + ": no data rows");

    Dataset out;
    out.name = "csv";
    out.provenance = Provenance::csv;
    const size_t n_features = width - (label_col >= 0 ? 1 : 0);
    out.features.resize(static_cast<Eigen::Index>(rows.size()),
                        static_cast<Eigen::Index>(n_features));
    Labels labels;
    if (label_col >= 0) labels.resize(rows.size());
    for (size_t i = 0; i < rows.size(); ++i) {
        size_t out_j = 0;
        for (size_t j = 0; j < width; ++j) {
            if (static_cast<int>(j) == label_col) {
                const double v = rows[i][j];
                const int as_int = static_cast<int>(std::llround(v));
                if (std::abs(v - as_int) > 1e-9 || as_int < 0)
                    throw data_error(path + ": label column value " + std::to_string(v) +
                                     " at data row " + std::to_string(i + 1) +
                                     " is not a non-negative integer");
                labels[i] = as_int;
            } else {
                out.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(out_j++)) =
                    rows[i][j];
            }
        }
    }
    if (label_col >= 0) out.true_labels = std::move(labels);
    (void)saw_header;
    return out;
}

void save_csv(const std::string& path, const Dataset& data) {
    std::ofstream out(path);
    if (!out) throw data_error("cannot write CSV file '" + path + "'");
    const Eigen::Index d = data.features.cols();
    for (Eigen::Index j = 0; j < d; ++j) out << "f" << j << (j + 1 < d ? "," : "");
    if (data.true_labels) out << ",label";
    out << "\n";
    char buf[40];
    for (Eigen::Index i = 0; i < data.features.rows(); ++i) {
        for (Eigen::Index j = 0; j < d; ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", data.features(i, j));
            out << buf << (j + 1 < d ? "," : "");
        }
        if (data.true_labels) out << "," << (*data.true_labels)[static_cast<size_t>(i)];
        out << "\n";
    }
    if (!out) throw data_error("failed writing CSV file '" + path + "'");
}

Dataset subsample_stratified(const Dataset& data, int n, Rng& rng) {
    if (!data.true_labels)
        throw data_error("subsample_stratified: dataset has no labels");
    const int total = static_cast<int>(data.features.rows());
    if (n < 1 || n > total)
        throw config_error("subsample_stratified: n must be in [1, " + std::to_string(total) +
                           "]");

    std::map<int, std::vector<int>> by_class;
    for (int i = 0; i < total; ++i) by_class[(*data.true_labels)[static_cast<size_t>(i)]].push_back(i);

    // Largest-remainder allocation of n across classes.
    struct Share {
        int label;
        int base;
        double frac;
    };
    std::vector<Share> shares;
    int allocated = 0;
    for (const auto& [label, members] : by_class) {
        const double exact = static_cast<double>(n) * members.size() / total;
        Share s{label, static_cast<int>(exact), exact - static_cast<int>(exact)};
        s.base = std::min<int>(s.base, static_cast<int>(members.size()));
        allocated += s.base;
        shares.push_back(s);
    }
    std::stable_sort(shares.begin(), shares.end(),
                     [](const Share& a, const Share& b) { return a.frac > b.frac; });
    for (auto& s : shares) {
        if (allocated >= n) break;
        if (s.base < static_cast<int>(by_class[s.label].size())) {
            ++s.base;
            ++allocated;
        }
    }

    std::vector<int> chosen;
    chosen.reserve(static_cast<size_t>(n));
    std::sort(shares.begin(), shares.end(),
              [](const Share& a, const Share& b) { return a.label < b.label; });
    for (const auto& s : shares) {
        const auto& members = by_class[s.label];
        const std::vector<int> perm = rng.permutation(static_cast<int>(members.size()));
        for (int t = 0; t < s.base; ++t)
            chosen.push_back(members[static_cast<size_t>(perm[static_cast<size_t>(t)])]);
    }
    std::sort(chosen.begin(), chosen.end());

    Dataset out;
    out.name = data.name + "-sub" + std::to_string(chosen.size());
    out.provenance = data.provenance;
    out.features = take_rows(data.features, chosen.data(), static_cast<int>(chosen.size()));
    Labels labels(chosen.size());
    for (size_t i = 0; i < chosen.size(); ++i)
        labels[i] = (*data.true_labels)[static_cast<size_t>(chosen[i])];
    out.true_labels = std::move(labels);
    return out;
}

}  // namespace evitram
