#ifndef SUMMIX_TESTS_TEST_UTIL_HPP
#define SUMMIX_TESTS_TEST_UTIL_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "summix/mixers/sequence_batch.hpp"
#include "summix/numcore/random.hpp"
#include "summix/numcore/tensor.hpp"

namespace summix::testing_util {

using TD = Tensor<double>;

inline TD randn(Shape s, RandomStream& rng, double sd = 1.0) { return TD::normal(std::move(s), sd, rng); }

// Largest |a - b| over the first `rows` frames of utterance b of two batches
// that may differ in padded length.
template <typename T>
double max_diff_valid(const SequenceBatch<T>& a, const SequenceBatch<T>& b) {
    double m = 0;
    const std::size_t d = a.width();
    for (std::size_t i = 0; i < a.batch(); ++i)
        for (std::size_t t = 0; t < std::min(a.frames(), b.frames()); ++t) {
            if (!a.valid(i, t)) continue;
            for (std::size_t j = 0; j < d; ++j)
                m = std::max(m, static_cast<double>(std::abs(a.values.values()[(i * a.frames() + t) * d + j] -
                                                              b.values.values()[(i * b.frames() + t) * d + j])));
        }
    return m;
}

template <typename T>
double max_abs_diff(const std::vector<T>& a, const std::vector<T>& b) {
    double m = a.size() == b.size() ? 0.0 : INFINITY;
    for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) m = std::max(m, static_cast<double>(std::abs(a[i] - b[i])));
    return m;
}

// Copies x and appends `extra` padded frames filled with `junk`.
template <typename T>
SequenceBatch<T> pad_with_junk(const SequenceBatch<T>& x, std::size_t extra, RandomStream& rng, double junk_scale = 50.0) {
    const std::size_t b = x.batch(), t = x.frames(), d = x.width(), t2 = t + extra;
    std::vector<T> v(b * t2 * d);
    FrameMask m(b * t2, 0);
    for (std::size_t i = 0; i < b; ++i)
        for (std::size_t k = 0; k < t2; ++k) {
            const bool inside = k < t;
            m[i * t2 + k] = inside ? x.mask[i * t + k] : 0;
            for (std::size_t j = 0; j < d; ++j)
                v[(i * t2 + k) * d + j] = inside && x.mask[i * t + k] ? x.values.values()[(i * t + k) * d + j]
                                                                      : static_cast<T>(junk_scale * rng.normal());
        }
    return SequenceBatch<T>(Tensor<T>({b, t2, d}, std::move(v)), std::move(m));
}

} // namespace summix::testing_util

#endif
