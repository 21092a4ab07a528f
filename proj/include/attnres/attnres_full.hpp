#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "attnres/numerics.hpp"

namespace attnres {

/// Provenance of a depth-attention source.
enum class SourceTag {
    Embedding,    // token embedding (source 0)
    LayerOutput,  // f_i(h_i), index = i
    Block,        // completed block representation, index = block number
    Partial,      // running intra-block sum, index = block, sub = layers summed
};

struct Source {
    SourceTag tag;
    int index = 0;
    int sub = 0;
    Vec value;
};

/// Ordered depth-attention sources. Keys are derived from the values
/// (k_i = v_i), so only values are stored.
struct SourceSet {
    std::vector<Source> entries;

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
    std::vector<Vec> values() const;
};

/// Per-sub-layer depth attention parameters: a learned pseudo-query
/// (initialized to zero so training starts from an equal-weight average)
/// and the RMSNorm applied to every key in this sub-layer's softmax.
struct DepthAttnParams {
    Vec query;
    RmsNorm norm;

    static DepthAttnParams zero_init(std::size_t d, double eps = 1e-6);
};

/// logit_i = query . rmsnorm(v_i). Scale-invariant in each source value.
std::vector<double> attn_logits(const Vec& query, const SourceSet& sources,
                                const RmsNorm& norm);

/// Softmax attention weights over the sources; rows sum to 1.
std::vector<double> attn_weights(const Vec& query, const SourceSet& sources,
                                 const RmsNorm& norm);

/// Unnormalized attention over the sources with retained (m, lse) statistics.
SoftmaxStats attn_stats(const Vec& query, const SourceSet& sources,
                        const RmsNorm& norm);

/// Softmax-weighted combination of the sources, computed as out/lse so a
/// zero query yields exactly (sum of sources) / count.
Vec attn_input(const Vec& query, const SourceSet& sources, const RmsNorm& norm);

/// Layer input under the full variant: attention over the embedding and all
/// preceding layer outputs. prior_outputs may be empty (first layer).
Vec full_attnres_input(const Vec& query, const Vec& embedding,
                       std::span<const Vec> prior_outputs, const RmsNorm& norm);

using LayerFn = std::function<Vec(const Vec&)>;

/// Complete record of one depth pass: per-sub-layer input, output, the
/// attention row that produced the input, and the source provenance. The
/// aggregated network output (one extra attention over all sources) is kept
/// alongside its weight row.
struct ForwardTrace {
    std::vector<Vec> inputs;                       // h_l
    std::vector<Vec> outputs;                      // f_l(h_l)
    std::vector<std::vector<double>> alphas;       // weight row per sub-layer
    std::vector<std::vector<Source>> sources;      // sources seen per sub-layer
    Vec output;                                    // final aggregated state
    std::vector<double> output_alpha;
    std::vector<Vec> final_blocks;                 // block variant only
};

/// Runs L sub-layers with full depth attention. params must hold L+1 entries:
/// one per sub-layer plus one for the final output aggregation over
/// [embedding, f_1(h_1), ..., f_L(h_L)].
ForwardTrace full_forward(std::span<const LayerFn> layers, const Vec& embedding,
                          std::span<const DepthAttnParams> params);

}  // namespace attnres
