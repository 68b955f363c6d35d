#pragma once

#include <Eigen/Dense>

namespace mclnn {

// Band parameters of the filterbank-style mask. bandwidth is the number of
// consecutive feature bins a band covers; overlap is the superposition
// distance between successive bands and may be negative (a gap).
struct MaskSpec {
    int bandwidth = 1;
    int overlap = 0;
};

// l x e matrix whose entries are exactly 0.0 or 1.0.
using BinaryMask = Eigen::MatrixXd;

// Places bands of `bandwidth` consecutive ones down the columns of an l x e
// matrix, stepping by l + (bandwidth - overlap) in linear-index space. The
// linear index is column-major: row = lx % l, col = lx / l, so the feature
// dimension advances fastest. Throws std::invalid_argument on bandwidth < 1,
// bandwidth > l, overlap >= bandwidth, or an empty matrix.
BinaryMask build_mask(Eigen::Index l, Eigen::Index e, const MaskSpec& spec);

// Elementwise product of weights with a 0/1 mask of the same shape.
Eigen::MatrixXd apply_mask(const Eigen::MatrixXd& weights, const BinaryMask& mask);

}  // namespace mclnn
