#include "evitram/cluster.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "evitram/rng.hpp"

namespace evitram {

void validate(const KMeansConfig& cfg) {
    if (cfg.k < 2) throw config_error("kmeans: k must be at least 2");
    if (cfg.restarts < 1) throw config_error("kmeans: restarts must be at least 1");
    if (cfg.max_iters < 1) throw config_error("kmeans: max_iters must be at least 1");
    if (!(cfg.tol >= 0.0)) throw config_error("kmeans: tol must be non-negative");
}

namespace {

// Squared distance from every row of z to every centroid row.
double sq_dist(const Matrix& z, Eigen::Index i, const Matrix& c, Eigen::Index j) {
    return (z.row(i) - c.row(j)).squaredNorm();
}

Matrix seed_plus_plus(const Matrix& z, int k, Rng& rng) {
    const Eigen::Index n = z.rows();
    Matrix centroids(k, z.cols());
    centroids.row(0) = z.row(static_cast<Eigen::Index>(rng.uniform_int(n)));

    Vector best(n);
    for (Eigen::Index i = 0; i < n; ++i) best[i] = sq_dist(z, i, centroids, 0);

    for (int c = 1; c < k; ++c) {
        const double total = best.sum();
        Eigen::Index chosen = 0;
        if (total > 0.0) {
            // Sample proportional to squared distance from the chosen set.
            double target = rng.uniform() * total;
            double cum = 0.0;
            chosen = n - 1;
            for (Eigen::Index i = 0; i < n; ++i) {
                cum += best[i];
                if (cum >= target) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = static_cast<Eigen::Index>(rng.uniform_int(n));
        }
        centroids.row(c) = z.row(chosen);
        for (Eigen::Index i = 0; i < n; ++i)
            best[i] = std::min(best[i], sq_dist(z, i, centroids, c));
    }
    return centroids;
}

// Nearest centroid per point; ties go to the lowest centroid index.
void assign_points(const Matrix& z, const Matrix& centroids, Labels& assignments) {
    const Eigen::Index n = z.rows();
    const Eigen::Index k = centroids.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        int best_c = 0;
        double best_d = sq_dist(z, i, centroids, 0);
        for (Eigen::Index c = 1; c < k; ++c) {
            const double d = sq_dist(z, i, centroids, c);
            if (d < best_d) {
                best_d = d;
                best_c = static_cast<int>(c);
            }
        }
        assignments[static_cast<size_t>(i)] = best_c;
    }
}

// Reseeds each empty cluster (in index order) to the point currently
// farthest from its assigned centroid, claiming that point for the cluster.
void fix_empty_clusters(const Matrix& z, Matrix& centroids, Labels& assignments) {
    const Eigen::Index n = z.rows();
    const Eigen::Index k = centroids.rows();
    std::vector<int> counts(static_cast<size_t>(k), 0);
    for (int a : assignments) ++counts[static_cast<size_t>(a)];

    std::vector<bool> claimed(static_cast<size_t>(n), false);
    for (Eigen::Index c = 0; c < k; ++c) {
        if (counts[static_cast<size_t>(c)] > 0) continue;
        Eigen::Index farthest = -1;
        double far_d = -1.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (claimed[static_cast<size_t>(i)]) continue;
            const double d = sq_dist(z, i, centroids, assignments[static_cast<size_t>(i)]);
            if (d > far_d) {
                far_d = d;
                farthest = i;
            }
        }
        if (farthest < 0) break;  // fewer distinct points than clusters
        claimed[static_cast<size_t>(farthest)] = true;
        --counts[static_cast<size_t>(assignments[static_cast<size_t>(farthest)])];
        centroids.row(c) = z.row(farthest);
        assignments[static_cast<size_t>(farthest)] = static_cast<int>(c);
        ++counts[static_cast<size_t>(c)];
    }
}

double total_inertia(const Matrix& z, const Matrix& centroids, const Labels& assignments) {
    double sum = 0.0;
    for (Eigen::Index i = 0; i < z.rows(); ++i)
        sum += sq_dist(z, i, centroids, assignments[static_cast<size_t>(i)]);
    return sum;
}

ClusteringResult run_single(const Matrix& z, const KMeansConfig& cfg, Rng& rng) {
    const Eigen::Index n = z.rows();
    ClusteringResult result;
    result.assignments.assign(static_cast<size_t>(n), 0);
    result.centroids = seed_plus_plus(z, cfg.k, rng);

    for (int iter = 0; iter < cfg.max_iters; ++iter) {
        assign_points(z, result.centroids, result.assignments);
        fix_empty_clusters(z, result.centroids, result.assignments);
        result.inertia_trace.push_back(total_inertia(z, result.centroids, result.assignments));
        result.iterations_run = iter + 1;

        Matrix next = Matrix::Zero(cfg.k, z.cols());
        std::vector<int> counts(static_cast<size_t>(cfg.k), 0);
        for (Eigen::Index i = 0; i < n; ++i) {
            next.row(result.assignments[static_cast<size_t>(i)]) += z.row(i);
            ++counts[static_cast<size_t>(result.assignments[static_cast<size_t>(i)])];
        }
        double shift = 0.0;
        for (int c = 0; c < cfg.k; ++c) {
            if (counts[static_cast<size_t>(c)] > 0) next.row(c) /= counts[static_cast<size_t>(c)];
            else next.row(c) = result.centroids.row(c);
            shift = std::max(shift, (next.row(c) - result.centroids.row(c)).norm());
        }
        result.centroids = next;
        if (shift <= cfg.tol) break;
    }

    // Final consistency pass so assignments, centroids, and inertia agree.
    assign_points(z, result.centroids, result.assignments);
    fix_empty_clusters(z, result.centroids, result.assignments);
    result.inertia = total_inertia(z, result.centroids, result.assignments);
    result.inertia_trace.push_back(result.inertia);
    return result;
}

}  // namespace

ClusteringResult kmeans(const Matrix& z, const KMeansConfig& cfg) {
    validate(cfg);
    if (z.rows() < cfg.k)
        throw data_error("kmeans: " + std::to_string(z.rows()) + " samples for k = " +
                         std::to_string(cfg.k));
    ensure_finite(z, "kmeans input");

    ClusteringResult best;
    std::vector<double> restart_inertias;
    restart_inertias.reserve(cfg.restarts);
    const Rng root(cfg.seed);
    for (int r = 0; r < cfg.restarts; ++r) {
        Rng stream = root.child(static_cast<std::uint64_t>(r));
        ClusteringResult current = run_single(z, cfg, stream);
        restart_inertias.push_back(current.inertia);
        if (r == 0 || current.inertia < best.inertia) best = std::move(current);
    }
    best.restart_inertias = std::move(restart_inertias);
    return best;
}

}  // namespace evitram
