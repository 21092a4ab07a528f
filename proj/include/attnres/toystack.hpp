#pragma once

#include <cstdint>
#include <string>

#include "attnres/attnres_block.hpp"

namespace attnres {

enum class ResidualMode { Standard, Full, Block };

std::string to_string(ResidualMode mode);
ResidualMode residual_mode_from_string(const std::string& name);

/// Affine + tanh sub-layer. The kind only labels the slot (attention or MLP
/// position); both kinds compute tanh(W x + b).
struct ToyLayer {
    enum class Kind { AttnSlot, MlpSlot };
    std::vector<double> weight;  // d x d, row-major
    Vec bias;
    Kind kind = Kind::AttnSlot;

    Vec apply(const Vec& x) const;
};

/// A small depth stack wired in one of the three residual modes. attn holds
/// L+1 parameter sets (per sub-layer plus output aggregation); they are
/// carried in every mode so parameter layout does not depend on the mode.
struct ToyStack {
    int d = 0;
    int L = 0;
    int block_size = 1;
    ResidualMode mode = ResidualMode::Standard;
    std::vector<ToyLayer> layers;
    std::vector<DepthAttnParams> attn;

    ForwardTrace forward(const Vec& embedding) const;
};

/// Weights iid uniform[-0.5, 0.5]/sqrt(d), biases zero, pseudo-queries zero,
/// norm gains one. randomize_attention replaces the mandated zero/one
/// attention init with small random values so gradient checks also exercise
/// the key-normalization path.
ToyStack make_random_stack(int d, int L, ResidualMode mode, int block_size,
                           std::uint64_t seed, bool randomize_attention = false);

/// Deterministic random embedding/target helpers sharing the stack's RNG
/// scheme.
Vec random_vec(int d, std::uint64_t seed);

struct Gradients {
    double loss = 0.0;
    std::vector<std::vector<double>> dweight;  // per layer, d*d
    std::vector<Vec> dbias;                    // per layer
    std::vector<Vec> dquery;                   // L+1
    std::vector<Vec> dgain;                    // L+1
    Vec dembedding;
    std::vector<Vec> dinputs;  // dL/dh_l per sub-layer (diagnostic)
};

/// loss = 0.5 * ||final_output - target||^2 with exact reverse-mode
/// gradients for every weight, bias, pseudo-query and norm gain.
Gradients loss_and_grad(const ToyStack& stack, const Vec& embedding, const Vec& target);

struct GradReport {
    std::vector<std::string> names;
    std::vector<double> analytic;
    std::vector<double> fd;
    double max_rel_error = 0.0;
    std::string worst_param;
};

/// Central finite differences over every parameter (and the embedding).
/// Relative error uses denominator max(|analytic|, |fd|, 1e-8).
GradReport gradient_check(const ToyStack& stack, const Vec& embedding,
                          const Vec& target, double step = 1e-5);

struct NormProfile {
    std::vector<double> input_norms;   // ||h_l||
    std::vector<double> output_norms;  // ||f_l(h_l)||
    std::string to_csv() const;
};
NormProfile norm_profile(const ForwardTrace& trace);

/// Mean attention weight per (destination sub-layer, source) over a batch of
/// traces. Full mode columns are [embedding, y_1 .. y_L]; block mode columns
/// are [embedding, b_1 .. b_N, partial]. The last row is the output
/// aggregation.
struct Heatmap {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // row-major
    std::vector<std::string> col_names;

    double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::string to_csv() const;
};
Heatmap weight_heatmap(std::span<const ForwardTrace> traces, ResidualMode mode);

}  // namespace attnres
