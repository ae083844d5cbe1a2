#pragma once

#include <cstdint>
#include <vector>

#include "evitram/types.hpp"

namespace evitram {

struct KMeansConfig {
    int k = 10;
    int restarts = 10;
    int max_iters = 300;
    double tol = 1e-4;  // stop when the largest centroid movement is <= tol
    std::uint64_t seed = 0;
};

void validate(const KMeansConfig& cfg);

struct ClusteringResult {
    Labels assignments;
    Matrix centroids;  // k x width
    double inertia = 0.0;
    int iterations_run = 0;
    // Per-iteration inertia of the winning restart (non-increasing), and the
    // final inertia of every restart, for property checks.
    std::vector<double> inertia_trace;
    std::vector<double> restart_inertias;
};

// Lloyd's algorithm with k-means++ seeding, run cfg.restarts times on
// independent seed streams; returns the lowest-inertia result (ties broken
// by lowest restart index). Nearest-centroid ties go to the lowest centroid
// index. An empty cluster is reseeded to the point farthest from its
// assigned centroid.
ClusteringResult kmeans(const Matrix& z, const KMeansConfig& cfg);

}  // namespace evitram
