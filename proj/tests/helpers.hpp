#pragma once

#include "vfm/datamodel.hpp"
#include "vfm/layers.hpp"
#include "vfm/rng.hpp"
#include "vfm/synthwells.hpp"

#include <vector>

namespace testutil {

inline vfm::Mat random_mat(Eigen::Index r, Eigen::Index c, vfm::Rng& rng, double scale = 1.0) {
    vfm::Mat m(r, c);
    for (Eigen::Index j = 0; j < c; ++j) {
        for (Eigen::Index i = 0; i < r; ++i) m(i, j) = scale * rng.normal();
    }
    return m;
}

/// Small shared portfolio for tests that need realistic records.
inline const std::vector<vfm::WellRecord>& small_portfolio() {
    static const std::vector<vfm::WellRecord> records =
        vfm::generate_portfolio(24, 16, vfm::DesignBounds::defaults(), 7).records;
    return records;
}

inline bool bit_equal(const vfm::Mat& a, const vfm::Mat& b) {
    if (a.rows() != b.rows() || a.cols() != b.cols()) return false;
    for (Eigen::Index i = 0; i < a.size(); ++i) {
        if (a.data()[i] != b.data()[i]) return false;
    }
    return true;
}

} // namespace testutil
