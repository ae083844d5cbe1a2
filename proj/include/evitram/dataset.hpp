#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "evitram/rng.hpp"
#include "evitram/types.hpp"

namespace evitram {

enum class Provenance { synthetic, idx, csv };

struct Dataset {
    std::string name;
    Matrix features;  // N x d
    std::optional<Labels> true_labels;  // evaluation only, never fed to training
    Provenance provenance = Provenance::synthetic;
};

// Gaussian blob benchmark: n_clusters isotropic Gaussians whose means are
// sampled with pairwise distance >= separation * cluster_std. Sample i
// belongs to cluster (i mod n_clusters); cluster c belongs to supergroup
// (c mod n_supergroups).
struct SyntheticSpec {
    int n_samples = 2000;
    int dims = 10;
    int n_clusters = 6;
    int n_supergroups = 3;
    double cluster_std = 1.0;
    double separation = 6.0;
    std::uint64_t seed = 0;
};

void validate(const SyntheticSpec& spec);

struct SyntheticData {
    Dataset data;  // true_labels = cluster index per sample
    Labels supergroups;  // coarse group per sample
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

// Big-endian IDX pair (images magic 0x00000803, labels 0x00000801); pixels
// scaled to [0,1], each image flattened row-major.
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Rectangular numeric CSV. A header row is detected by non-numeric cells; a
// header column named "label" is split out as integer labels.
Dataset load_csv(const std::string& path);

// Writes features (and labels when present) as CSV with an f0..fn[,label]
// header, full double precision.
void save_csv(const std::string& path, const Dataset& data);

// Subsample of size n preserving class proportions (largest-remainder
// allocation, without replacement). Requires labels.
Dataset subsample_stratified(const Dataset& data, int n, Rng& rng);

}  // namespace evitram
