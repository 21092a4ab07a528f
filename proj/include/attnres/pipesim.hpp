#pragma once

#include <string>
#include <vector>

#include "attnres/rational.hpp"

namespace attnres {

/// Interleaved pipeline shape: P physical stages, V virtual stages per
/// physical stage (C = P*V chunks), with an average of Np block
/// representations of dimension d produced per chunk.
struct PipelineConfig {
    int physical_stages = 1;  // P
    int virtual_stages = 1;   // V
    Rational blocks_per_chunk = Rational(1);  // Np
    int hidden_dim = 1;  // d

    int chunks() const { return physical_stages * virtual_stages; }
    void validate() const;
};

struct Transfer {
    int from_chunk = 0;
    int to_chunk = 0;
    int from_rank = 0;
    int to_rank = 0;
    Rational blocks;
    Rational elements;            // blocks * d
    std::vector<int> block_ids;   // explicit schedules only
};

struct TransferLog {
    bool caching = false;
    std::vector<Transfer> transfers;
    /// Cache contents each rank holds while running each of its chunks,
    /// incoming transfer applied (counts for uniform runs, sorted id sets
    /// for explicit runs).
    std::vector<std::vector<Rational>> cache_counts;          // [rank][virtual stage]
    std::vector<std::vector<std::vector<int>>> cache_sets;    // [rank][virtual stage]
    Rational total_blocks;
    Rational total_elements;
    Rational peak_blocks;  // largest single-transition payload

    std::string to_csv() const;
    std::string to_json() const;
};

/// Walks one token through all C chunks. Without caching every transition
/// carries the full accumulated history; with caching each rank retains what
/// it received in earlier virtual stages and transitions carry only the
/// increment.
TransferLog simulate(const PipelineConfig& cfg, bool caching);

/// C(C-1)/2 * Np * d
Rational comm_naive(const PipelineConfig& cfg);

/// P(P-1)/2 * Np * d + (V-1) * P^2 * Np * d
Rational comm_cached(const PipelineConfig& cfg);

/// Explicit block-completion schedule for misaligned boundaries: chunk c
/// completes exactly completions[c] (block ids), and initial_blocks (the
/// embedding) are present from the start on rank 0.
struct ExplicitSchedule {
    int physical_stages = 1;
    int virtual_stages = 1;
    int hidden_dim = 1;
    std::vector<int> initial_blocks;
    std::vector<std::vector<int>> completions;  // one entry per chunk

    void validate() const;
};
TransferLog simulate(const ExplicitSchedule& sched, bool caching);

}  // namespace attnres
