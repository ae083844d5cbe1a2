#pragma once

#include <vector>

#include "evitram/types.hpp"

namespace evitram {

// Optimal cluster -> class map over labels in [0, k), maximizing the number
// of agreeing samples (solved exactly in O(k^3)). Returns a permutation of
// [0, k) indexed by predicted label.
std::vector<int> hungarian_match(const Labels& pred, const Labels& truth, int k);

// Unsupervised clustering accuracy: agreement under the optimal map / N.
double acc(const Labels& pred, const Labels& truth);

// Normalized mutual information with the arithmetic mean of the two label
// entropies as the normalizer; natural log, 0*log(0) = 0. Degenerate inputs
// (either labeling constant) score 0.
double nmi(const Labels& pred, const Labels& truth);

}  // namespace evitram
