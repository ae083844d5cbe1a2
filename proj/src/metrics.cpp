#include "evitram/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace evitram {

namespace {

void check_lengths(const Labels& pred, const Labels& truth) {
    if (pred.size() != truth.size())
        throw data_error("metrics: label vectors differ in length (" +
                         std::to_string(pred.size()) + " vs " + std::to_string(truth.size()) +
                         ")");
    if (pred.empty()) throw data_error("metrics: empty label vectors");
}

int label_span(const Labels& a, const Labels& b) {
    int hi = 0;
    for (int v : a) {
        if (v < 0) throw data_error("metrics: negative label");
        hi = std::max(hi, v);
    }
    for (int v : b) {
        if (v < 0) throw data_error("metrics: negative label");
        hi = std::max(hi, v);
    }
    return hi + 1;
}

std::vector<std::vector<long long>> contingency(const Labels& pred, const Labels& truth,
                                                int k) {
    std::vector<std::vector<long long>> counts(static_cast<size_t>(k),
                                               std::vector<long long>(static_cast<size_t>(k), 0));
    for (size_t i = 0; i < pred.size(); ++i) {
        if (pred[i] < 0 || pred[i] >= k || truth[i] < 0 || truth[i] >= k)
            throw data_error("metrics: label outside [0, " + std::to_string(k) + ") at row " +
                             std::to_string(i));
        ++counts[static_cast<size_t>(pred[i])][static_cast<size_t>(truth[i])];
    }
    return counts;
}

// Minimum-cost perfect matching on a square cost matrix via the standard
// potentials algorithm (1-indexed internally). Returns row -> column.
std::vector<int> assignment_min_cost(const std::vector<std::vector<long long>>& cost) {
    const int n = static_cast<int>(cost.size());
    const long long kInf = std::numeric_limits<long long>::max() / 4;
    std::vector<long long> u(static_cast<size_t>(n) + 1, 0), v(static_cast<size_t>(n) + 1, 0);
    std::vector<int> p(static_cast<size_t>(n) + 1, 0), way(static_cast<size_t>(n) + 1, 0);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::vector<long long> minv(static_cast<size_t>(n) + 1, kInf);
        std::vector<bool> used(static_cast<size_t>(n) + 1, false);
        do {
            used[static_cast<size_t>(j0)] = true;
            const int i0 = p[static_cast<size_t>(j0)];
            long long delta = kInf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) continue;
                const long long cur = cost[static_cast<size_t>(i0 - 1)][static_cast<size_t>(j - 1)] -
                                      u[static_cast<size_t>(i0)] - v[static_cast<size_t>(j)];
                if (cur < minv[static_cast<size_t>(j)]) {
                    minv[static_cast<size_t>(j)] = cur;
                    way[static_cast<size_t>(j)] = j0;
                }
                if (minv[static_cast<size_t>(j)] < delta) {
                    delta = minv[static_cast<size_t>(j)];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[static_cast<size_t>(j)]) {
                    u[static_cast<size_t>(p[static_cast<size_t>(j)])] += delta;
                    v[static_cast<size_t>(j)] -= delta;
                } else {
                    minv[static_cast<size_t>(j)] -= delta;
                }
            }
            j0 = j1;
        } while (p[static_cast<size_t>(j0)] != 0);
        do {
            const int j1 = way[static_cast<size_t>(j0)];
            p[static_cast<size_t>(j0)] = p[static_cast<size_t>(j1)];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> row_to_col(static_cast<size_t>(n), -1);
    for (int j = 1; j <= n; ++j)
        if (p[static_cast<size_t>(j)] > 0)
            row_to_col[static_cast<size_t>(p[static_cast<size_t>(j)] - 1)] = j - 1;
    return row_to_col;
}

}  // namespace

std::vector<int> hungarian_match(const Labels& pred, const Labels& truth, int k) {
    check_lengths(pred, truth);
    if (k < 1) throw config_error("hungarian_match: k must be positive");
    const auto counts = contingency(pred, truth, k);
    long long max_count = 0;
    for (const auto& row : counts)
        for (long long c : row) max_count = std::max(max_count, c);
    // Maximize agreement = minimize (max_count - agreement) cell-wise.
    std::vector<std::vector<long long>> cost(static_cast<size_t>(k),
                                             std::vector<long long>(static_cast<size_t>(k), 0));
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j)
            cost[static_cast<size_t>(i)][static_cast<size_t>(j)] =
                max_count - counts[static_cast<size_t>(i)][static_cast<size_t>(j)];
    return assignment_min_cost(cost);
}

double acc(const Labels& pred, const Labels& truth) {
    check_lengths(pred, truth);
    const int k = label_span(pred, truth);
    const auto map = hungarian_match(pred, truth, k);
    long long matched = 0;
    for (size_t i = 0; i < pred.size(); ++i)
        if (map[static_cast<size_t>(pred[i])] == truth[i]) ++matched;
    return static_cast<double>(matched) / static_cast<double>(pred.size());
}

double nmi(const Labels& pred, const Labels& truth) {
    check_lengths(pred, truth);
    const int k = label_span(pred, truth);
    const auto counts = contingency(pred, truth, k);
    const double n = static_cast<double>(pred.size());

    std::vector<double> p_row(static_cast<size_t>(k), 0.0), p_col(static_cast<size_t>(k), 0.0);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const double pij = counts[static_cast<size_t>(i)][static_cast<size_t>(j)] / n;
            p_row[static_cast<size_t>(i)] += pij;
            p_col[static_cast<size_t>(j)] += pij;
        }

    double h_pred = 0.0, h_truth = 0.0, mi = 0.0;
    for (int i = 0; i < k; ++i)
        if (p_row[static_cast<size_t>(i)] > 0.0)
            h_pred -= p_row[static_cast<size_t>(i)] * std::log(p_row[static_cast<size_t>(i)]);
    for (int j = 0; j < k; ++j)
        if (p_col[static_cast<size_t>(j)] > 0.0)
            h_truth -= p_col[static_cast<size_t>(j)] * std::log(p_col[static_cast<size_t>(j)]);
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            const double pij = counts[static_cast<size_t>(i)][static_cast<size_t>(j)] / n;
            if (pij > 0.0)
                mi += pij * std::log(pij / (p_row[static_cast<size_t>(i)] *
                                            p_col[static_cast<size_t>(j)]));
        }

    const double normalizer = 0.5 * (h_pred + h_truth);
    if (normalizer <= 0.0) return 0.0;
    return std::clamp(mi / normalizer, 0.0, 1.0);
}

}  // namespace evitram
