#include "mclnn/mask.hpp"

#include <stdexcept>
#include <string>

namespace mclnn {

BinaryMask build_mask(Eigen::Index l, Eigen::Index e, const MaskSpec& spec) {
    if (l < 1 || e < 1) {
        throw std::invalid_argument("build_mask: matrix must be non-empty, got " +
                                    std::to_string(l) + "x" + std::to_string(e));
    }
    if (spec.bandwidth < 1) {
        throw std::invalid_argument("build_mask: bandwidth must be >= 1, got " +
                                    std::to_string(spec.bandwidth));
    }
    if (spec.bandwidth > l) {
        throw std::invalid_argument("build_mask: bandwidth " + std::to_string(spec.bandwidth) +
                                    " exceeds feature length " + std::to_string(l));
    }
    if (spec.overlap >= spec.bandwidth) {
        throw std::invalid_argument("build_mask: overlap " + std::to_string(spec.overlap) +
                                    " must be smaller than bandwidth " +
                                    std::to_string(spec.bandwidth));
    }

    BinaryMask mask = BinaryMask::Zero(l, e);
    const std::int64_t total = static_cast<std::int64_t>(l) * e;
    const std::int64_t step = l + (spec.bandwidth - spec.overlap);
    // Ceiling bound on the band count; indices past the matrix are dropped.
    const std::int64_t g_max = (total + step - 1) / step;
    for (std::int64_t g = 1; g <= g_max; ++g) {
        for (std::int64_t a = 0; a < spec.bandwidth; ++a) {
            const std::int64_t lx = a + (g - 1) * step;
            if (lx >= total) break;
            mask(lx % l, lx / l) = 1.0;
        }
    }
    return mask;
}

Eigen::MatrixXd apply_mask(const Eigen::MatrixXd& weights, const BinaryMask& mask) {
    if (weights.rows() != mask.rows() || weights.cols() != mask.cols()) {
        throw std::invalid_argument("apply_mask: weights " + std::to_string(weights.rows()) + "x" +
                                    std::to_string(weights.cols()) + " vs mask " +
                                    std::to_string(mask.rows()) + "x" +
                                    std::to_string(mask.cols()));
    }
    return weights.cwiseProduct(mask);
}

}  // namespace mclnn
