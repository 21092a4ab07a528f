#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace attnres {

/// d-dimensional activation vector. All arithmetic is double precision and
/// reductions run left to right, so repeated runs are bitwise reproducible.
using Vec = std::vector<double>;

double dot(std::span<const double> a, std::span<const double> b);
double l2_norm(std::span<const double> v);
bool all_finite(std::span<const double> v);

Vec add(const Vec& a, const Vec& b);
Vec scale(const Vec& v, double c);

/// RMSNorm parameters: per-channel gain (init all-ones) and epsilon guard.
struct RmsNorm {
    Vec gain;
    double eps = 1e-6;

    static RmsNorm ones(std::size_t d, double eps = 1e-6);
    Vec apply(const Vec& x) const;
};

/// gain ⊙ x / sqrt(mean(x^2) + eps)
Vec rmsnorm(const Vec& x, const Vec& gain, double eps);

/// Softmax of a logit vector plus the statistics needed for later merging.
struct SoftmaxScalars {
    std::vector<double> probs;
    double m = 0.0;    // max logit
    double lse = 0.0;  // sum of exp(logit - m)
};

SoftmaxScalars softmax_with_stats(std::span<const double> logits);

/// Partial softmax-attention result over some set of sources:
/// out = sum_j exp(logit_j - m) * v_j, lse = sum_j exp(logit_j - m).
/// finalize() divides out by lse. The empty result (m = -inf, lse = 0) is the
/// identity element of online_merge.
struct SoftmaxStats {
    Vec out;
    double m = 0.0;
    double lse = 0.0;

    static SoftmaxStats empty(std::size_t d);
    bool is_empty() const { return lse == 0.0; }
};

/// Attention with retained statistics: logit_j = q . keys[j], values weighted
/// by exp(logit_j - m). Keys are used as given (normalize beforehand if the
/// kernel calls for it).
SoftmaxStats attn_with_stats(const Vec& q, std::span<const Vec> keys,
                             std::span<const Vec> values);

/// Exact merge of two partial softmax results over disjoint source sets:
/// m = max(m1, m2), both sides rescaled by exp(m_i - m) before adding.
SoftmaxStats online_merge(const SoftmaxStats& a, const SoftmaxStats& b);

/// out / lse: the normalized convex combination of the contributing values.
Vec finalize(const SoftmaxStats& s);

}  // namespace attnres
