#include "attnres/attnres_block.hpp"

#include <stdexcept>

namespace attnres {

BlockState BlockState::initial(const Vec& embedding, int block_size) {
    if (block_size < 1) throw std::invalid_argument("block_size must be >= 1");
    BlockState s;
    s.blocks.push_back(embedding);  // b_0
    s.layer_index = 1;
    s.block_size = block_size;
    return s;
}

int BlockState::block_number() const {
    return (layer_index - 1) / block_size + 1;
}

int BlockState::intra_position() const {
    return (layer_index - 1) % block_size + 1;
}

bool BlockState::at_block_boundary() const {
    return (layer_index - 1) % block_size == 0;
}

BlockState intra_accumulate(BlockState state, const Vec& layer_output) {
    if (state.partial) {
        if (state.partial->size() != layer_output.size()) {
            throw std::invalid_argument("intra_accumulate: dimension mismatch");
        }
        for (std::size_t i = 0; i < layer_output.size(); ++i) {
            (*state.partial)[i] += layer_output[i];
        }
    } else {
        state.partial = layer_output;
    }
    return state;
}

SourceSet value_matrix(const BlockState& state, int i) {
    if (i < 1) throw std::invalid_argument("value_matrix: position must be >= 1");
    SourceSet set;
    set.entries.push_back({SourceTag::Embedding, 0, 0, state.blocks[0]});
    for (std::size_t n = 1; n < state.blocks.size(); ++n) {
        set.entries.push_back({SourceTag::Block, static_cast<int>(n), 0,
                               state.blocks[n]});
    }
    if (i >= 2) {
        if (!state.partial) {
            throw std::runtime_error("value_matrix: partial sum absent past the "
                                     "first layer of a block");
        }
        set.entries.push_back({SourceTag::Partial, state.block_number(), i - 1,
                               *state.partial});
    }
    return set;
}

Vec block_attnres_input(const Vec& query, const BlockState& state, int i,
                        const RmsNorm& norm) {
    return attn_input(query, value_matrix(state, i), norm);
}

LayerStepResult block_forward_layer(BlockState state, const LayerFn& f,
                                    const DepthAttnParams& params) {
    // A boundary completes the previous block: fold its sum into the block
    // list before this layer attends. The attended set is unchanged by the
    // fold (the partial becomes the newest block), so this matches computing
    // the attention first and folding afterwards.
    if (state.at_block_boundary() && state.partial) {
        state.blocks.push_back(std::move(*state.partial));
        state.partial.reset();
    }

    const int i = state.intra_position();
    SourceSet set = value_matrix(state, i);
    Vec h = attn_input(params.query, set, params.norm);
    Vec y = f(h);
    if (!all_finite(y)) {
        throw std::runtime_error("block_forward_layer: non-finite output at sub-layer " +
                                 std::to_string(state.layer_index));
    }

    LayerStepResult r;
    r.alpha = attn_weights(params.query, set, params.norm);
    r.sources = std::move(set.entries);
    r.input = std::move(h);
    state = intra_accumulate(std::move(state), y);
    state.layer_index += 1;
    r.output = std::move(y);
    r.state = std::move(state);
    return r;
}

Vec final_aggregate(const Vec& query, const BlockState& state, const RmsNorm& norm) {
    SourceSet set;
    set.entries.push_back({SourceTag::Embedding, 0, 0, state.blocks[0]});
    for (std::size_t n = 1; n < state.blocks.size(); ++n) {
        set.entries.push_back({SourceTag::Block, static_cast<int>(n), 0,
                               state.blocks[n]});
    }
    return attn_input(query, set, norm);
}

ForwardTrace block_forward(std::span<const LayerFn> layers, const Vec& embedding,
                           int block_size, std::span<const DepthAttnParams> params) {
    const std::size_t L = layers.size();
    if (params.size() != L + 1) {
        throw std::invalid_argument("block_forward: need one parameter set per "
                                    "sub-layer plus one for the output aggregation");
    }

    ForwardTrace trace;
    BlockState state = BlockState::initial(embedding, block_size);
    for (std::size_t l = 0; l < L; ++l) {
        LayerStepResult step = block_forward_layer(std::move(state), layers[l], params[l]);
        state = std::move(step.state);
        trace.inputs.push_back(std::move(step.input));
        trace.outputs.push_back(std::move(step.output));
        trace.alphas.push_back(std::move(step.alpha));
        trace.sources.push_back(std::move(step.sources));
    }

    // Fold the trailing partial: the complete last block, or the short tail
    // block when block_size does not divide L.
    if (state.partial) {
        state.blocks.push_back(std::move(*state.partial));
        state.partial.reset();
    }
    const DepthAttnParams& po = params[L];
    trace.output = final_aggregate(po.query, state, po.norm);
    {
        SourceSet set;
        set.entries.push_back({SourceTag::Embedding, 0, 0, state.blocks[0]});
        for (std::size_t n = 1; n < state.blocks.size(); ++n) {
            set.entries.push_back({SourceTag::Block, static_cast<int>(n), 0,
                                   state.blocks[n]});
        }
        trace.output_alpha = attn_weights(po.query, set, po.norm);
    }
    trace.final_blocks = std::move(state.blocks);
    return trace;
}

}  // namespace attnres
