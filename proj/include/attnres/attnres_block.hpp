#pragma once

#include <optional>
#include <span>

#include "attnres/attnres_full.hpp"

namespace attnres {

/// Running state of the block variant. blocks holds [b_0, ..., b_{n-1}] with
/// b_0 the token embedding; partial is the intra-block running sum b_n^i and
/// is absent exactly at the first layer of a block. layer_index is the
/// 1-based sub-layer about to run; boundaries fall every block_size
/// sub-layers (attention and MLP slots each count one).
struct BlockState {
    std::vector<Vec> blocks;
    std::optional<Vec> partial;
    int layer_index = 1;
    int block_size = 1;

    static BlockState initial(const Vec& embedding, int block_size);

    /// Block number (1-based) the current layer belongs to.
    int block_number() const;
    /// Position of the current layer within its block (1-based).
    int intra_position() const;
    bool at_block_boundary() const;
};

/// partial += layer_output (or starts the sum when absent).
BlockState intra_accumulate(BlockState state, const Vec& layer_output);

/// Sources for the i-th layer of the current block: [b_0..b_{n-1}] when
/// i = 1, with the partial sum b_n^{i-1} appended for i >= 2.
SourceSet value_matrix(const BlockState& state, int i);

/// Softmax attention over value_matrix(state, i).
Vec block_attnres_input(const Vec& query, const BlockState& state, int i,
                        const RmsNorm& norm);

/// One sub-layer step: fold the completed partial into blocks at a boundary,
/// attend, apply f, accumulate its output into the partial sum.
struct LayerStepResult {
    BlockState state;
    Vec input;
    Vec output;
    std::vector<double> alpha;
    std::vector<Source> sources;
};
LayerStepResult block_forward_layer(BlockState state, const LayerFn& f,
                                    const DepthAttnParams& params);

/// Output aggregation over all block representations [b_0 .. b_N]. The last
/// partial must already be folded (block_forward does this; a trailing
/// partial from a ragged tail counts as the last block).
Vec final_aggregate(const Vec& query, const BlockState& state, const RmsNorm& norm);

/// Runs L sub-layers with block-size block_size. params holds L+1 entries
/// (the last one drives the output aggregation). When block_size does not
/// divide L, the leftover sub-layers form a short final block.
ForwardTrace block_forward(std::span<const LayerFn> layers, const Vec& embedding,
                           int block_size, std::span<const DepthAttnParams> params);

}  // namespace attnres
