#include "attnres/costmodel.hpp"

#include <algorithm>
#include <stdexcept>

#include "attnres/csvio.hpp"

namespace attnres {

std::string CostPair::str() const {
    std::string s;
    if (d_coeff.num != 0) {
        if (d_coeff == Rational(1)) {
            s = "d";
        } else if (d_coeff.is_integer()) {
            s = d_coeff.str() + "d";
        } else {
            s = fmt_double(d_coeff.to_double()) + "d";
        }
    }
    if (constant.num != 0) {
        if (!s.empty()) s += "+";
        s += constant.is_integer() ? constant.str() : fmt_double(constant.to_double());
    }
    if (s.empty()) s = "0";
    return s;
}

SchemeSpec SchemeSpec::standard() { return {Kind::Standard, 0, 0, 0}; }
SchemeSpec SchemeSpec::mhc(int m) { return {Kind::Mhc, m, 0, 0}; }
SchemeSpec SchemeSpec::attnres_full(int L, int N) { return {Kind::AttnResFull, 0, L, N}; }
SchemeSpec SchemeSpec::attnres_block(int L, int N) { return {Kind::AttnResBlock, 0, L, N}; }

static int checked_group_size(int L, int N) {
    if (L < 1 || N < 1) throw std::invalid_argument("io_cost: L and N must be >= 1");
    if (L % N != 0) {
        throw std::invalid_argument("io_cost: block count must divide the layer count");
    }
    return L / N;
}

CostExpr io_cost(const SchemeSpec& spec) {
    CostExpr e;
    switch (spec.kind) {
        case SchemeSpec::Kind::Standard: {
            e.scheme = "standard";
            e.symbolic = "3d";
            e.components.push_back({"residual merge", {Rational(2), 0}, {Rational(1), 0}});
            break;
        }
        case SchemeSpec::Kind::Mhc: {
            const std::int64_t m = spec.m;
            if (m < 1) throw std::invalid_argument("io_cost: mhc needs m >= 1");
            e.scheme = "mhc";
            e.symbolic = "(8m+2)d+2m^2+4m";
            e.components.push_back({"compute mixing coefficients",
                                    {Rational(m), 0},
                                    {Rational(0), Rational(m * m + 2 * m)}});
            e.components.push_back({"apply input mix",
                                    {Rational(m), Rational(m)},
                                    {Rational(1), 0}});
            e.components.push_back({"apply output distribution",
                                    {Rational(1), Rational(m)},
                                    {Rational(m), 0}});
            e.components.push_back({"apply stream transition",
                                    {Rational(m), Rational(m * m)},
                                    {Rational(m), 0}});
            e.components.push_back({"residual merge",
                                    {Rational(2 * m), 0},
                                    {Rational(m), 0}});
            break;
        }
        case SchemeSpec::Kind::AttnResFull: {
            const int S = checked_group_size(spec.L, spec.N);
            e.scheme = "attnres-full";
            e.symbolic = "(S+N)d";
            e.components.push_back({"phase 1 (amortized)",
                                    {Rational(spec.N - 1), 0},
                                    {Rational(1), 0}});
            e.components.push_back({"phase 2",
                                    {Rational(S - 1), 0},
                                    {Rational(1), 0}});
            break;
        }
        case SchemeSpec::Kind::AttnResBlock: {
            const int S = checked_group_size(spec.L, spec.N);
            e.scheme = "attnres-block";
            e.symbolic = "(N/S+5)d";
            e.components.push_back({"phase 1 (amortized)",
                                    {Rational(spec.N, S), 0},
                                    {Rational(1), 0}});
            e.components.push_back({"phase 2",
                                    {Rational(3), 0},
                                    {Rational(1), 0}});
            break;
        }
    }
    for (const auto& c : e.components) {
        e.read = e.read + c.read;
        e.write = e.write + c.write;
    }
    return e;
}

TwoPhaseIoReport full_twophase_io(int L, int N) {
    TwoPhaseIoReport r;
    r.L = L;
    r.N = N;
    r.S = checked_group_size(L, N);

    r.read_inter_total = Rational(0);
    r.write_inter_total = Rational(0);
    for (int n = 1; n <= N; ++n) {
        // block n re-reads key and value of each of the (n-1)S preceding
        // outputs once for its whole batch of queries
        r.read_inter_total = r.read_inter_total + Rational(2LL * (n - 1) * r.S);
        r.write_inter_total = r.write_inter_total + Rational(r.S);
    }
    r.read_intra_per_block = Rational(0);
    r.write_intra_per_block = Rational(0);
    for (int t = 1; t <= r.S; ++t) {
        r.read_intra_per_block = r.read_intra_per_block + Rational(2LL * (t - 1));
        r.write_intra_per_block = r.write_intra_per_block + Rational(1);
    }

    const Rational layers(L);
    r.per_layer_read = (r.read_inter_total + Rational(N) * r.read_intra_per_block) / layers;
    r.per_layer_write =
        (r.write_inter_total + Rational(N) * r.write_intra_per_block) / layers;
    r.per_layer_total = r.per_layer_read + r.per_layer_write;
    return r;
}

double prefill_memory(int blocks, std::int64_t seq_len, int hidden_dim,
                      int bytes_per_element, int shard_devices,
                      std::optional<std::int64_t> chunk) {
    if (blocks < 1 || seq_len < 1 || hidden_dim < 1 || bytes_per_element < 1 ||
        shard_devices < 1) {
        throw std::invalid_argument("prefill_memory: arguments must be positive");
    }
    std::int64_t tokens = seq_len;
    if (chunk) {
        if (*chunk < 1) throw std::invalid_argument("prefill_memory: chunk must be positive");
        tokens = std::min(tokens, *chunk);
    }
    return static_cast<double>(blocks) *
           (static_cast<double>(tokens) / static_cast<double>(shard_devices)) *
           static_cast<double>(hidden_dim) * static_cast<double>(bytes_per_element);
}

std::string cost_table_csv(int L, int N, int m, int d) {
    std::string s = "# L=" + std::to_string(L) + " N=" + std::to_string(N) +
                    " m=" + std::to_string(m) + " d=" + std::to_string(d) + "\n";
    s += "scheme,operation,read,write,total_symbolic,total_typical,total_elements\n";
    const SchemeSpec specs[] = {
        SchemeSpec::standard(),
        SchemeSpec::mhc(m),
        SchemeSpec::attnres_full(L, N),
        SchemeSpec::attnres_block(L, N),
    };
    for (const SchemeSpec& spec : specs) {
        CostExpr e = io_cost(spec);
        const CostPair total = e.total();
        for (const auto& c : e.components) {
            s += e.scheme + "," + c.label + "," + c.read.str() + "," + c.write.str() +
                 "," + e.symbolic + "," + total.str() + "," +
                 fmt_double(total.eval(d).to_double()) + "\n";
        }
    }
    return s;
}

}  // namespace attnres
