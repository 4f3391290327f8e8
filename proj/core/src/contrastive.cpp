#include "fcl/contrastive.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "fcl/errors.hpp"

namespace fcl {

namespace {

void check_unit(const Vec64& v, const char* what) {
    const double n = norm(v);
    if (std::abs(n - 1.0) > 1e-6) {
        throw ContractError(std::string(what) + ": vector is not unit norm (|v| = " +
                            std::to_string(n) + ")");
    }
}

}  // namespace

MemoryBank::MemoryBank(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) {
        throw ContractError("MemoryBank: capacity must be positive");
    }
}

void MemoryBank::push(Feature f) {
    if (embed_dim_ == 0) {
        embed_dim_ = f.vec.size();
    } else if (f.vec.size() != embed_dim_) {
        throw DimensionError("MemoryBank::push: embedding length " +
                             std::to_string(f.vec.size()) + " vs bank dim " +
                             std::to_string(embed_dim_));
    }
    entries_.push_back(std::move(f));
    if (entries_.size() > capacity_) {
        entries_.pop_front();
    }
}

std::vector<Feature> aggregate_banks(const MemoryBank& local,
                                     const std::vector<const MemoryBank*>& remotes) {
    std::size_t total = local.size();
    for (const MemoryBank* bank : remotes) {
        total += bank->size();
    }
    std::vector<Feature> pool;
    pool.reserve(total);
    pool.insert(pool.end(), local.entries().begin(), local.entries().end());

    const std::size_t dim = pool.empty() ? 0 : pool.front().vec.size();
    for (const MemoryBank* bank : remotes) {
        for (const Feature& f : bank->entries()) {
            if (dim != 0 && f.vec.size() != dim) {
                throw DimensionError("aggregate_banks: banks disagree on embedding length");
            }
            pool.push_back(f);
        }
    }
    return pool;
}

std::vector<Feature> sample_negatives(const std::vector<Feature>& pool, std::size_t k, Rng& rng) {
    if (k == 0) {
        throw ContractError("sample_negatives: k must be positive");
    }
    if (pool.size() < k) {
        throw InsufficientPoolError("sample_negatives: pool holds " +
                                    std::to_string(pool.size()) + " features, need " +
                                    std::to_string(k));
    }
    // Partial Fisher-Yates over indices: uniform without replacement.
    std::vector<std::size_t> idx(pool.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::vector<Feature> out;
    out.reserve(k);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + rng.uniform_index(idx.size() - i);
        std::swap(idx[i], idx[j]);
        out.push_back(pool[idx[i]]);
    }
    return out;
}

std::vector<Vec64> build_local_positives(const AugmentedPairFeatures& volume_i,
                                         const AugmentedPairFeatures& volume_j) {
    const std::uint16_t s = volume_i.anchor.partition_id;
    if (volume_i.key.partition_id != s || volume_j.anchor.partition_id != s ||
        volume_j.key.partition_id != s) {
        throw ProtocolError("build_local_positives: partition mismatch");
    }
    if (volume_i.anchor.volume_id == volume_j.anchor.volume_id) {
        throw ProtocolError("build_local_positives: positives must come from distinct volumes");
    }
    return {volume_i.key.vec, volume_j.key.vec};
}

std::vector<Feature> remote_positives(const Feature& q, const std::vector<Feature>& pool) {
    std::vector<Feature> matches;
    for (const Feature& p : pool) {
        if (p.partition_id == q.partition_id) {
            matches.push_back(p);
        }
    }
    return matches;
}

LossResult contrastive_loss(const Vec64& q, const std::vector<Vec64>& positives,
                            const std::vector<Vec64>& negatives, double tau) {
    if (!(tau > 0.0)) {
        throw ContractError("contrastive_loss: tau must be positive");
    }
    if (positives.empty()) {
        throw ContractError("contrastive_loss: positive set is empty");
    }
    check_unit(q, "contrastive_loss anchor");
    for (const Vec64& p : positives) {
        if (p.size() != q.size()) {
            throw DimensionError("contrastive_loss: positive length mismatch");
        }
        check_unit(p, "contrastive_loss positive");
    }
    Vec64 neg_logits(negatives.size());
    for (std::size_t i = 0; i < negatives.size(); ++i) {
        if (negatives[i].size() != q.size()) {
            throw DimensionError("contrastive_loss: negative length mismatch");
        }
        check_unit(negatives[i], "contrastive_loss negative");
        neg_logits[i] = dot(q, negatives[i]);
    }

    const double inv_p = 1.0 / static_cast<double>(positives.size());
    LossResult result;
    result.grad_q.assign(q.size(), 0.0);

    // Each positive is scored against the full negative pool; denominators
    // are computed with max subtraction so tau = 0.07 logits never overflow.
    for (const Vec64& pos : positives) {
        const double pos_logit = dot(q, pos);
        const double log_denom = log_softmax_denominator(pos_logit, neg_logits, tau);
        result.loss += inv_p * (log_denom - pos_logit / tau);

        // d/dq of one term: (1/tau) [ (p0 - 1) k+ + sum_i p_i n_i ]
        // with p* the softmax over {k+} and the negatives.
        const double p0 = std::exp(pos_logit / tau - log_denom);
        const double w_pos = inv_p * (p0 - 1.0) / tau;
        for (std::size_t d = 0; d < q.size(); ++d) {
            result.grad_q[d] += w_pos * pos[d];
        }
        for (std::size_t i = 0; i < negatives.size(); ++i) {
            const double pi = std::exp(neg_logits[i] / tau - log_denom);
            const double w_neg = inv_p * pi / tau;
            for (std::size_t d = 0; d < q.size(); ++d) {
                result.grad_q[d] += w_neg * negatives[i][d];
            }
        }
    }
    return result;
}

FinalLossResult final_loss(const Vec64& q, const std::vector<Vec64>& local_positives,
                           const std::vector<Vec64>& remote_positives,
                           const std::vector<Vec64>& negatives, double tau) {
    FinalLossResult result;
    result.grad_q.assign(q.size(), 0.0);

    const LossResult local = contrastive_loss(q, local_positives, negatives, tau);
    result.local_term = local.loss;
    for (std::size_t d = 0; d < q.size(); ++d) {
        result.grad_q[d] += local.grad_q[d];
    }

    // An empty remote set contributes nothing: the loss is undefined on an
    // empty positive set, and banks are cold early in training.
    if (!remote_positives.empty()) {
        const LossResult remote = contrastive_loss(q, remote_positives, negatives, tau);
        result.remote_term = remote.loss;
        for (std::size_t d = 0; d < q.size(); ++d) {
            result.grad_q[d] += remote.grad_q[d];
        }
    }
    result.loss = result.local_term + result.remote_term;
    return result;
}

BatchLossResult batch_loss(const std::vector<AnchorInstance>& batch, double tau) {
    if (batch.empty()) {
        throw ContractError("batch_loss: batch is empty");
    }
    const double inv_b = 1.0 / static_cast<double>(batch.size());
    BatchLossResult result;
    result.grads.reserve(batch.size());
    for (const AnchorInstance& anchor : batch) {
        FinalLossResult one = final_loss(anchor.q, anchor.local_positives,
                                         anchor.remote_positives, anchor.negatives, tau);
        result.mean_loss += inv_b * one.loss;
        result.mean_local += inv_b * one.local_term;
        result.mean_remote += inv_b * one.remote_term;
        for (double& g : one.grad_q) {
            g *= inv_b;
        }
        result.grads.push_back(std::move(one.grad_q));
    }
    return result;
}

}  // namespace fcl
