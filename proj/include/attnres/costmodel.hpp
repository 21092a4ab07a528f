#pragma once

#include <optional>
#include <string>
#include <vector>

#include "attnres/rational.hpp"

namespace attnres {

/// Affine-in-d memory cost: d_coeff * d + constant, in element units.
struct CostPair {
    Rational d_coeff;
    Rational constant;

    Rational eval(std::int64_t d) const { return d_coeff * Rational(d) + constant; }
    CostPair operator+(const CostPair& o) const {
        return {d_coeff + o.d_coeff, constant + o.constant};
    }
    /// "3d", "34d+48", "5.5d" style rendering.
    std::string str() const;
};

/// Per-token per-layer memory access of the residual mechanism, split into
/// reads and writes with one labeled component per accounted operation.
struct CostExpr {
    std::string scheme;
    std::string symbolic;  // total in terms of S, N, m
    CostPair read;
    CostPair write;

    struct Component {
        std::string label;
        CostPair read;
        CostPair write;
    };
    std::vector<Component> components;

    CostPair total() const { return read + write; }
};

struct SchemeSpec {
    enum class Kind { Standard, Mhc, AttnResFull, AttnResBlock };
    Kind kind = Kind::Standard;
    int m = 0;  // mhc streams
    int L = 0;  // total sub-layers (attnres schemes)
    int N = 0;  // blocks (attnres schemes)

    static SchemeSpec standard();
    static SchemeSpec mhc(int m);
    static SchemeSpec attnres_full(int L, int N);
    static SchemeSpec attnres_block(int L, int N);
};

/// Closed-form per-layer cost for each scheme. The attention schemes assume
/// the two-phase schedule with S = L/N (non-integral S is an error).
CostExpr io_cost(const SchemeSpec& spec);

/// Two-phase traffic for the full variant, accumulated by explicit summation
/// over blocks and layers (vector units; multiply by d for elements).
struct TwoPhaseIoReport {
    int L = 0;
    int N = 0;
    int S = 0;
    Rational read_inter_total;      // sum over blocks of 2(n-1)S
    Rational write_inter_total;     // one output per layer
    Rational read_intra_per_block;  // S(S-1)
    Rational write_intra_per_block; // S
    Rational per_layer_read;
    Rational per_layer_write;
    Rational per_layer_total;       // = S + N
};
TwoPhaseIoReport full_twophase_io(int L, int N);

/// Bytes per device for cached block representations during prefill:
/// N * (min(T, chunk)/P_shard) * d * bytes_per_element.
double prefill_memory(int blocks, std::int64_t seq_len, int hidden_dim,
                      int bytes_per_element, int shard_devices,
                      std::optional<std::int64_t> chunk = std::nullopt);

/// CSV table of all four schemes (Read, Write, Symbolic, Typical columns),
/// one line per accounted operation.
std::string cost_table_csv(int L, int N, int m, int d);

}  // namespace attnres
