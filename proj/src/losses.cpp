#include "evitram/losses.hpp"

#include <cmath>
#include <string>

namespace evitram {

namespace {

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw std::invalid_argument(std::string(op) + ": shape mismatch (" +
                                    std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                                    " vs " + std::to_string(b.rows()) + "x" +
                                    std::to_string(b.cols()) + ")");
}

void require_row_distributions(const Matrix& m, const char* which) {
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        double sum = m.row(r).sum();
        if (std::abs(sum - 1.0) > 1e-6)
            throw std::domain_error(std::string("cross_entropy: ") + which + " row " +
                                    std::to_string(r) + " sums to " + std::to_string(sum) +
                                    ", not a distribution");
        if ((m.row(r).array() < -1e-9).any())
            throw std::domain_error(std::string("cross_entropy: ") + which + " row " +
                                    std::to_string(r) + " has negative entries");
    }
}

}  // namespace

double mse(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "mse");
    if (pred.rows() == 0) return 0.0;
    return (pred - target).squaredNorm() / static_cast<double>(pred.rows());
}

Matrix mse_grad(const Matrix& pred, const Matrix& target) {
    require_same_shape(pred, target, "mse_grad");
    return (2.0 / static_cast<double>(pred.rows())) * (pred - target);
}

double cross_entropy(const Matrix& p, const Matrix& q) {
    require_same_shape(p, q, "cross_entropy");
    require_row_distributions(p, "p");
    require_row_distributions(q, "q");
    if (p.rows() == 0) return 0.0;
    double total = 0.0;
    for (Eigen::Index r = 0; r < p.rows(); ++r)
        for (Eigen::Index c = 0; c < p.cols(); ++c)
            total -= p(r, c) * std::log(std::max(q(r, c), kLogClampEps));
    return total / static_cast<double>(p.rows());
}

Matrix cross_entropy_grad(const Matrix& p, const Matrix& q) {
    require_same_shape(p, q, "cross_entropy_grad");
    const double inv_n = 1.0 / static_cast<double>(p.rows());
    Matrix g = Matrix::Zero(p.rows(), p.cols());
    for (Eigen::Index r = 0; r < p.rows(); ++r)
        for (Eigen::Index c = 0; c < p.cols(); ++c)
            if (q(r, c) > kLogClampEps) g(r, c) = -p(r, c) / q(r, c) * inv_n;
    return g;
}

}  // namespace evitram
