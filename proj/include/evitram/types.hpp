#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>
#include <vector>

namespace evitram {

// Dense sample-by-feature carrier. Rows are samples, columns are features;
// row-major storage so serialized bytes follow the sample order.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using RowVector = Eigen::RowVectorXd;

using Labels = std::vector<int>;

// Error categories map onto the CLI exit codes: config 1, data 2, divergence 3.
struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct divergence_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

// Copies the rows of m named by idx[0..count), in that order.
inline Matrix take_rows(const Matrix& m, const int* idx, int count) {
    Matrix out(count, m.cols());
    for (int i = 0; i < count; ++i) out.row(i) = m.row(idx[i]);
    return out;
}

inline void ensure_finite(const Matrix& m, const std::string& context) {
    if (!m.allFinite())
        throw divergence_error(context + ": non-finite values");
}

}  // namespace evitram
