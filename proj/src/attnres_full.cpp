#include "attnres/attnres_full.hpp"

#include <stdexcept>

namespace attnres {

std::vector<Vec> SourceSet::values() const {
    std::vector<Vec> v;
    v.reserve(entries.size());
    for (const Source& s : entries) v.push_back(s.value);
    return v;
}

DepthAttnParams DepthAttnParams::zero_init(std::size_t d, double eps) {
    DepthAttnParams p;
    p.query.assign(d, 0.0);
    p.norm = RmsNorm::ones(d, eps);
    return p;
}

std::vector<double> attn_logits(const Vec& query, const SourceSet& sources,
                                const RmsNorm& norm) {
    if (sources.empty()) throw std::invalid_argument("attn_logits: empty source set");
    std::vector<double> logits;
    logits.reserve(sources.size());
    for (const Source& s : sources.entries) {
        logits.push_back(dot(query, norm.apply(s.value)));
    }
    return logits;
}

std::vector<double> attn_weights(const Vec& query, const SourceSet& sources,
                                 const RmsNorm& norm) {
    return softmax_with_stats(attn_logits(query, sources, norm)).probs;
}

SoftmaxStats attn_stats(const Vec& query, const SourceSet& sources,
                        const RmsNorm& norm) {
    if (sources.empty()) throw std::invalid_argument("attn_stats: empty source set");
    std::vector<Vec> keys;
    keys.reserve(sources.size());
    for (const Source& s : sources.entries) keys.push_back(norm.apply(s.value));
    return attn_with_stats(query, keys, sources.values());
}

Vec attn_input(const Vec& query, const SourceSet& sources, const RmsNorm& norm) {
    return finalize(attn_stats(query, sources, norm));
}

static SourceSet full_sources(const Vec& embedding, std::span<const Vec> prior_outputs) {
    SourceSet set;
    set.entries.push_back({SourceTag::Embedding, 0, 0, embedding});
    int i = 1;
    for (const Vec& y : prior_outputs) {
        set.entries.push_back({SourceTag::LayerOutput, i++, 0, y});
    }
    return set;
}

Vec full_attnres_input(const Vec& query, const Vec& embedding,
                       std::span<const Vec> prior_outputs, const RmsNorm& norm) {
    return attn_input(query, full_sources(embedding, prior_outputs), norm);
}

ForwardTrace full_forward(std::span<const LayerFn> layers, const Vec& embedding,
                          std::span<const DepthAttnParams> params) {
    const std::size_t L = layers.size();
    if (params.size() != L + 1) {
        throw std::invalid_argument("full_forward: need one parameter set per "
                                    "sub-layer plus one for the output aggregation");
    }

    ForwardTrace trace;
    trace.inputs.reserve(L);
    trace.outputs.reserve(L);
    trace.alphas.reserve(L);
    trace.sources.reserve(L);

    for (std::size_t l = 0; l < L; ++l) {
        SourceSet set = full_sources(embedding, trace.outputs);
        const DepthAttnParams& p = params[l];
        Vec h = attn_input(p.query, set, p.norm);
        Vec y = layers[l](h);
        if (!all_finite(y)) {
            throw std::runtime_error("full_forward: non-finite output at sub-layer " +
                                     std::to_string(l + 1));
        }
        trace.alphas.push_back(attn_weights(p.query, set, p.norm));
        trace.sources.push_back(std::move(set.entries));
        trace.inputs.push_back(std::move(h));
        trace.outputs.push_back(std::move(y));
    }

    SourceSet final_set = full_sources(embedding, trace.outputs);
    const DepthAttnParams& po = params[L];
    trace.output = attn_input(po.query, final_set, po.norm);
    trace.output_alpha = attn_weights(po.query, final_set, po.norm);
    return trace;
}

}  // namespace attnres
