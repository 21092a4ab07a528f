#include "attnres/twophase.hpp"

#include <stdexcept>

namespace attnres {

namespace {

SoftmaxStats merge_phases(const SoftmaxStats& inter, const SoftmaxStats& intra,
                          const TwoPhaseOptions& opt) {
    if (!opt.corrupt_merge) return online_merge(inter, intra);
    if (inter.is_empty()) return intra;
    if (intra.is_empty()) return inter;
    SoftmaxStats r;
    r.m = std::max(inter.m, intra.m);
    r.lse = inter.lse + intra.lse;  // missing exp(m_i - m) rescale
    r.out.resize(inter.out.size());
    for (std::size_t i = 0; i < r.out.size(); ++i) {
        r.out[i] = inter.out[i] + intra.out[i];
    }
    return r;
}

Vec checked_layer_output(const LayerFn& f, const Vec& h, std::size_t layer_1based) {
    Vec y = f(h);
    if (!all_finite(y)) {
        throw std::runtime_error("two-phase: non-finite output at sub-layer " +
                                 std::to_string(layer_1based));
    }
    return y;
}

}  // namespace

Phase1Result phase1_batch(std::span<const DepthAttnParams> layer_params,
                          std::span<const Vec> blocks) {
    if (blocks.empty()) throw std::invalid_argument("phase1_batch: no block sources");
    Phase1Result r;
    r.stats.reserve(layer_params.size());
    for (const DepthAttnParams& p : layer_params) {
        std::vector<Vec> keys;
        keys.reserve(blocks.size());
        for (const Vec& b : blocks) keys.push_back(p.norm.apply(b));
        r.stats.push_back(attn_with_stats(p.query, keys, blocks));
    }
    return r;
}

Phase2Result phase2_sequential(const Phase1Result& phase1,
                               std::span<const LayerFn> layers,
                               std::span<const DepthAttnParams> layer_params,
                               const TwoPhaseOptions& opt) {
    const std::size_t S = layers.size();
    if (phase1.stats.size() != S || layer_params.size() != S) {
        throw std::invalid_argument("phase2_sequential: phase-1 stats, layers and "
                                    "parameters must align");
    }

    Phase2Result r;
    Vec partial;
    for (std::size_t t = 0; t < S; ++t) {
        Vec h;
        if (t == 0) {
            h = finalize(phase1.stats[t]);  // inter-block only
        } else {
            const DepthAttnParams& p = layer_params[t];
            const std::vector<Vec> keys{p.norm.apply(partial)};
            const std::vector<Vec> vals{partial};
            SoftmaxStats intra = attn_with_stats(p.query, keys, vals);
            h = finalize(merge_phases(phase1.stats[t], intra, opt));
        }
        if (opt.counter) {
            opt.counter->reads += 3;   // partial key/value + stored phase-1 output
            opt.counter->writes += 1;  // h_l
        }
        Vec y = checked_layer_output(layers[t], h, t + 1);
        partial = (t == 0) ? y : add(partial, y);
        r.inputs.push_back(std::move(h));
        r.outputs.push_back(std::move(y));
        r.partials.push_back(partial);
    }
    r.block_sum = partial;
    return r;
}

ForwardTrace two_phase_block_schedule(std::span<const LayerFn> layers,
                                      const Vec& embedding, int block_size,
                                      std::span<const DepthAttnParams> params,
                                      const TwoPhaseOptions& opt) {
    const std::size_t L = layers.size();
    if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
    if (params.size() != L + 1) {
        throw std::invalid_argument("two_phase_block_schedule: need L+1 parameter sets");
    }
    const std::size_t S = static_cast<std::size_t>(block_size);
    const std::size_t n_blocks = (L + S - 1) / S;

    ForwardTrace trace;
    std::vector<Vec> blocks{embedding};  // b_0
    for (std::size_t n = 0; n < n_blocks; ++n) {
        const std::size_t start = n * S;
        const std::size_t len = std::min(S, L - start);

        Phase1Result p1 = phase1_batch(params.subspan(start, len), blocks);
        if (opt.counter) {
            // One batched scan of the block-representation cache per block,
            // plus one stored output per layer.
            opt.counter->reads += static_cast<std::int64_t>(n_blocks);
            opt.counter->writes += static_cast<std::int64_t>(len);
        }
        Phase2Result p2 = phase2_sequential(p1, layers.subspan(start, len),
                                            params.subspan(start, len), opt);
        for (std::size_t t = 0; t < len; ++t) {
            trace.inputs.push_back(std::move(p2.inputs[t]));
            trace.outputs.push_back(std::move(p2.outputs[t]));
        }
        blocks.push_back(std::move(p2.block_sum));
    }

    const DepthAttnParams& po = params[L];
    SourceSet final_set;
    final_set.entries.push_back({SourceTag::Embedding, 0, 0, blocks[0]});
    for (std::size_t n = 1; n < blocks.size(); ++n) {
        final_set.entries.push_back({SourceTag::Block, static_cast<int>(n), 0, blocks[n]});
    }
    trace.output = attn_input(po.query, final_set, po.norm);
    trace.output_alpha = attn_weights(po.query, final_set, po.norm);
    trace.final_blocks = std::move(blocks);
    return trace;
}

ForwardTrace two_phase_full_schedule(std::span<const LayerFn> layers,
                                     const Vec& embedding, int group_size,
                                     std::span<const DepthAttnParams> params,
                                     const TwoPhaseOptions& opt) {
    const std::size_t L = layers.size();
    if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
    if (params.size() != L + 1) {
        throw std::invalid_argument("two_phase_full_schedule: need L+1 parameter sets");
    }
    const std::size_t S = static_cast<std::size_t>(group_size);

    ForwardTrace trace;
    std::vector<Vec> outputs;  // v_1 .. v_L as they are produced

    for (std::size_t start = 0; start < L; start += S) {
        const std::size_t len = std::min(S, L - start);

        // Phase 1: every source before this group (embedding plus the `start`
        // individual layer outputs), read once and shared by all queries.
        std::vector<Vec> inter_values;
        inter_values.reserve(start + 1);
        inter_values.push_back(embedding);
        for (std::size_t j = 0; j < start; ++j) inter_values.push_back(outputs[j]);

        Phase1Result p1;
        p1.stats.reserve(len);
        for (std::size_t t = 0; t < len; ++t) {
            const DepthAttnParams& p = params[start + t];
            std::vector<Vec> keys;
            keys.reserve(inter_values.size());
            for (const Vec& v : inter_values) keys.push_back(p.norm.apply(v));
            p1.stats.push_back(attn_with_stats(p.query, keys, inter_values));
        }
        if (opt.counter) {
            // Key and value of each preceding layer output, once per group.
            opt.counter->reads += static_cast<std::int64_t>(2 * start);
            opt.counter->writes += static_cast<std::int64_t>(len);
        }

        // Phase 2: layer t additionally attends over the t-1 outputs produced
        // earlier in this group.
        for (std::size_t t = 0; t < len; ++t) {
            const std::size_t l = start + t;
            const DepthAttnParams& p = params[l];
            Vec h;
            if (t == 0) {
                h = finalize(p1.stats[t]);
            } else {
                std::vector<Vec> intra_values(outputs.begin() + start,
                                              outputs.begin() + l);
                std::vector<Vec> keys;
                keys.reserve(intra_values.size());
                for (const Vec& v : intra_values) keys.push_back(p.norm.apply(v));
                SoftmaxStats intra = attn_with_stats(p.query, keys, intra_values);
                h = finalize(merge_phases(p1.stats[t], intra, opt));
            }
            if (opt.counter) {
                opt.counter->reads += static_cast<std::int64_t>(2 * t);
                opt.counter->writes += 1;
            }
            Vec y = checked_layer_output(layers[l], h, l + 1);
            trace.inputs.push_back(std::move(h));
            trace.outputs.push_back(y);
            outputs.push_back(std::move(y));
        }
    }

    SourceSet final_set;
    final_set.entries.push_back({SourceTag::Embedding, 0, 0, embedding});
    for (std::size_t j = 0; j < outputs.size(); ++j) {
        final_set.entries.push_back({SourceTag::LayerOutput, static_cast<int>(j + 1), 0,
                                     outputs[j]});
    }
    const DepthAttnParams& po = params[L];
    trace.output = attn_input(po.query, final_set, po.norm);
    trace.output_alpha = attn_weights(po.query, final_set, po.norm);
    return trace;
}

}  // namespace attnres
