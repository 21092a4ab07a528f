#pragma once

#include <cstdint>
#include <span>

#include "attnres/attnres_block.hpp"

namespace attnres {

/// Memory-traffic counter at d-vector granularity. The two-phase schedules
/// charge one read/write per hidden vector the residual mechanism touches;
/// the internals of the layer functions are never charged.
struct IoCounter {
    std::int64_t reads = 0;
    std::int64_t writes = 0;

    std::int64_t total() const { return reads + writes; }
};

struct TwoPhaseOptions {
    IoCounter* counter = nullptr;
    /// Negative control for equivalence harnesses: skips the max-rescaling
    /// when combining the two phases, which is wrong whenever the running
    /// maxima differ.
    bool corrupt_merge = false;
};

/// Inter-block attention results for every layer of one block, with the
/// statistics needed to fold in the intra-block sources later.
struct Phase1Result {
    std::vector<SoftmaxStats> stats;  // one per layer of the block
};

/// Batched inter-block pass: each layer's query attends over the shared
/// block representations (keys normalized per layer). The block list is
/// traversed once for the whole batch.
Phase1Result phase1_batch(std::span<const DepthAttnParams> layer_params,
                          std::span<const Vec> blocks);

/// Sequential intra-block pass for one block: the first layer uses the
/// inter-block result alone (h = out/lse); later layers attend to the single
/// running partial sum and merge with phase 1 via online softmax. Partial
/// sums are updated with each layer's output.
struct Phase2Result {
    std::vector<Vec> inputs;    // h_l for each layer of the block
    std::vector<Vec> outputs;   // f_l(h_l)
    std::vector<Vec> partials;  // partial sum after each layer
    Vec block_sum;              // completed block representation
};
Phase2Result phase2_sequential(const Phase1Result& phase1,
                               std::span<const LayerFn> layers,
                               std::span<const DepthAttnParams> layer_params,
                               const TwoPhaseOptions& opt = {});

/// Full run of the block variant under the two-phase schedule. Produces a
/// trace elementwise equal to block_forward (attention rows are not
/// materialized on this path).
ForwardTrace two_phase_block_schedule(std::span<const LayerFn> layers,
                                      const Vec& embedding, int block_size,
                                      std::span<const DepthAttnParams> params,
                                      const TwoPhaseOptions& opt = {});

/// Two-phase schedule for the full variant: layers are grouped into blocks of
/// group_size purely for scheduling. Phase 1 of a group batches attention
/// over all individual layer outputs preceding the group; phase 2 folds in
/// the intra-group outputs sequentially. The architecture is unchanged, so
/// the trace equals full_forward elementwise.
ForwardTrace two_phase_full_schedule(std::span<const LayerFn> layers,
                                     const Vec& embedding, int group_size,
                                     std::span<const DepthAttnParams> params,
                                     const TwoPhaseOptions& opt = {});

}  // namespace attnres
