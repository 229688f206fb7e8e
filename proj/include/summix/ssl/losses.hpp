// Copyright 2026 The summix Authors.
// SPDX-License-Identifier: Apache-2.0

#ifndef SUMMIX_SSL_LOSSES_HPP
#define SUMMIX_SSL_LOSSES_HPP

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "summix/numcore/ops.hpp"
#include "summix/numcore/random.hpp"

namespace summix::ssl {

// Contrastive loss over explicit candidate lists. For anchor i, row anchors[i]
// of `c` is scored against rows candidates[i] of `q`; the first candidate is
// the positive. Logits are cosine similarities divided by kappa.
template <typename T>
Tensor<T> contrastive_from_candidates(const Tensor<T>& c, const Tensor<T>& q, const std::vector<std::size_t>& anchors,
                                      const std::vector<std::vector<std::size_t>>& candidates, double kappa) {
    if (!(kappa > 0.0)) throw std::invalid_argument("contrastive_loss: kappa must be positive");
    if (anchors.empty() || anchors.size() != candidates.size()) {
        throw std::invalid_argument("contrastive_loss: need one candidate list per anchor");
    }
    std::vector<std::size_t> ia, ib, offsets{0};
    for (std::size_t a = 0; a < anchors.size(); ++a) {
        if (candidates[a].empty()) throw std::invalid_argument("contrastive_loss: empty candidate list");
        for (auto j : candidates[a]) {
            ia.push_back(anchors[a]);
            ib.push_back(j);
        }
        offsets.push_back(ia.size());
    }
    return ops::segment_first_xent(ops::scale(ops::cosine_pairs(c, q, ia, ib), T(1.0 / kappa)), offsets);
}

struct ContrastiveStats {
    std::size_t anchors = 0;
    std::size_t k_min = 0;               // smallest distractor count actually used
    std::size_t reduced_utterances = 0;  // utterances that could not supply K distractors
    std::size_t skipped_utterances = 0;  // fewer than two masked positions
};

template <typename T>
struct ContrastiveResult {
    Tensor<T> loss;
    ContrastiveStats stats;
};

// k distinct positions from [0, n) \ {self}, uniformly without replacement.
inline std::vector<std::size_t> sample_distractors(std::size_t n, std::size_t self, std::size_t k, RandomStream& rng) {
    if (self >= n || k > n - 1) throw std::invalid_argument("sample_distractors: not enough other positions");
    auto picks = rng.sample_without_replacement(n - 1, k);
    for (auto& j : picks) j = j < self ? j : j + 1;
    return picks;
}

// `groups[u]` lists the rows (shared by c and q) of utterance u's masked
// positions. Each anchor draws K distractors uniformly without replacement
// from the other masked positions of its own utterance; when fewer exist, K
// shrinks for that utterance and the reduction is reported.
template <typename T>
ContrastiveResult<T> contrastive_loss(const Tensor<T>& c, const Tensor<T>& q,
                                      const std::vector<std::vector<std::size_t>>& groups, std::size_t k,
                                      double kappa, RandomStream& rng) {
    if (k == 0) throw std::invalid_argument("contrastive_loss: need at least one distractor");
    ContrastiveResult<T> r;
    r.stats.k_min = k;
    std::vector<std::size_t> anchors;
    std::vector<std::vector<std::size_t>> candidates;
    for (const auto& rows : groups) {
        if (rows.size() < 2) {
            ++r.stats.skipped_utterances;
            continue;
        }
        const std::size_t k_eff = std::min(k, rows.size() - 1);
        if (k_eff < k) ++r.stats.reduced_utterances;
        r.stats.k_min = std::min(r.stats.k_min, k_eff);
        for (std::size_t i = 0; i < rows.size(); ++i) {
            std::vector<std::size_t> cand{rows[i]};
            for (std::size_t j : sample_distractors(rows.size(), i, k_eff, rng)) cand.push_back(rows[j]);
            anchors.push_back(rows[i]);
            candidates.push_back(std::move(cand));
        }
    }
    if (anchors.empty()) throw std::invalid_argument("contrastive_loss: no utterance has two masked positions");
    r.stats.anchors = anchors.size();
    r.loss = contrastive_from_candidates(c, q, anchors, candidates, kappa);
    return r;
}

// (G*V - sum_g exp H(p_g)) / (G*V) for batch-averaged code probabilities p[G, V].
template <typename T>
Tensor<T> diversity_loss(const Tensor<T>& avg_probs, double tol = 1e-6) {
    if (avg_probs.rank() != 2) throw ShapeError("diversity_loss: expected [G, V], got " + shape_str(avg_probs.shape()));
    const std::size_t g = avg_probs.dim(0), v = avg_probs.dim(1);
    const auto& pv = avg_probs.values();
    for (std::size_t k = 0; k < g; ++k) {
        double s = 0;
        for (std::size_t j = 0; j < v; ++j) {
            if (!(pv[k * v + j] >= 0)) throw std::invalid_argument("diversity_loss: negative or NaN probability");
            s += static_cast<double>(pv[k * v + j]);
        }
        if (std::abs(s - 1.0) > tol) {
            throw std::invalid_argument("diversity_loss: group " + std::to_string(k) + " sums to " + std::to_string(s));
        }
    }
    auto neg_h = ops::sum_last(ops::mul(avg_probs, ops::log_clamped(avg_probs)));  // [G]
    auto ppl = ops::sum(ops::exp(ops::scale(neg_h, T(-1))));
    const T gv = static_cast<T>(g * v);
    return ops::scale(ops::add_scalar(ops::scale(ppl, T(-1)), gv), T(1) / gv);
}

} // namespace summix::ssl

#endif
