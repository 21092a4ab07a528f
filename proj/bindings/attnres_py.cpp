#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "attnres/analysis.hpp"
#include "attnres/costmodel.hpp"
#include "attnres/mixmat.hpp"
#include "attnres/pipesim.hpp"
#include "attnres/toystack.hpp"
#include "attnres/twophase.hpp"

namespace py = pybind11;
using namespace attnres;

namespace {

RmsNorm make_norm(const Vec& gain, double eps) {
    RmsNorm n;
    n.gain = gain;
    n.eps = eps;
    return n;
}

SourceSet sources_from_values(const std::vector<Vec>& values) {
    SourceSet set;
    int i = 0;
    for (const Vec& v : values) {
        set.entries.push_back({i == 0 ? SourceTag::Embedding : SourceTag::LayerOutput,
                               i, 0, v});
        ++i;
    }
    return set;
}

py::dict trace_to_dict(const ForwardTrace& t) {
    py::dict d;
    d["inputs"] = t.inputs;
    d["outputs"] = t.outputs;
    d["alphas"] = t.alphas;
    d["output"] = t.output;
    d["output_alpha"] = t.output_alpha;
    d["final_blocks"] = t.final_blocks;
    return d;
}

py::dict log_to_dict(const TransferLog& log) {
    py::dict d;
    d["caching"] = log.caching;
    d["total_blocks"] = log.total_blocks.to_double();
    d["total_elements"] = log.total_elements.to_double();
    d["peak_blocks"] = log.peak_blocks.to_double();
    py::list transfers;
    for (const Transfer& t : log.transfers) {
        py::dict jt;
        jt["from_chunk"] = t.from_chunk;
        jt["to_chunk"] = t.to_chunk;
        jt["from_rank"] = t.from_rank;
        jt["to_rank"] = t.to_rank;
        jt["blocks"] = t.blocks.to_double();
        jt["elements"] = t.elements.to_double();
        jt["block_ids"] = t.block_ids;
        transfers.append(jt);
    }
    d["transfers"] = transfers;
    if (!log.cache_sets.empty()) d["rank_caches"] = log.cache_sets;
    return d;
}

}  // namespace

PYBIND11_MODULE(_attnres, m) {
    m.doc() = "depth-wise softmax attention residuals: kernels, schedules and cost models";

    // numerics
    m.def("rmsnorm", &rmsnorm, py::arg("x"), py::arg("gain"), py::arg("eps") = 1e-6);
    m.def("softmax_with_stats", [](const std::vector<double>& logits) {
        SoftmaxScalars s = softmax_with_stats(logits);
        return py::make_tuple(s.probs, s.m, s.lse);
    });

    py::class_<SoftmaxStats>(m, "SoftmaxStats")
        .def_readonly("out", &SoftmaxStats::out)
        .def_readonly("m", &SoftmaxStats::m)
        .def_readonly("lse", &SoftmaxStats::lse);
    m.def("attn_with_stats",
          [](const Vec& q, const std::vector<Vec>& keys, const std::vector<Vec>& values) {
              return attn_with_stats(q, keys, values);
          },
          py::arg("q"), py::arg("keys"), py::arg("values"));
    m.def("online_merge", &online_merge);
    m.def("finalize", &finalize);

    // depth attention
    m.def("attn_weights",
          [](const Vec& query, const std::vector<Vec>& values, const Vec& gain,
             double eps) {
              return attn_weights(query, sources_from_values(values), make_norm(gain, eps));
          },
          py::arg("query"), py::arg("values"), py::arg("gain"), py::arg("eps") = 1e-6);
    m.def("full_attnres_input",
          [](const Vec& query, const Vec& embedding, const std::vector<Vec>& priors,
             const Vec& gain, double eps) {
              return full_attnres_input(query, embedding, priors, make_norm(gain, eps));
          },
          py::arg("query"), py::arg("embedding"), py::arg("prior_outputs"),
          py::arg("gain"), py::arg("eps") = 1e-6);

    // toy stack + schedules
    py::enum_<ResidualMode>(m, "ResidualMode")
        .value("STANDARD", ResidualMode::Standard)
        .value("FULL", ResidualMode::Full)
        .value("BLOCK", ResidualMode::Block);

    py::class_<ToyStack>(m, "ToyStack")
        .def_readonly("d", &ToyStack::d)
        .def_readonly("L", &ToyStack::L)
        .def_readonly("block_size", &ToyStack::block_size)
        .def("forward",
             [](const ToyStack& s, const Vec& emb) { return trace_to_dict(s.forward(emb)); })
        .def("loss_and_grad", [](const ToyStack& s, const Vec& emb, const Vec& target) {
            Gradients g = loss_and_grad(s, emb, target);
            py::dict d;
            d["loss"] = g.loss;
            d["dweight"] = g.dweight;
            d["dbias"] = g.dbias;
            d["dquery"] = g.dquery;
            d["dgain"] = g.dgain;
            d["dembedding"] = g.dembedding;
            return d;
        })
        .def("gradient_check", [](const ToyStack& s, const Vec& emb, const Vec& target) {
            GradReport r = gradient_check(s, emb, target);
            return py::make_tuple(r.max_rel_error, r.worst_param);
        });
    m.def("make_random_stack", &make_random_stack, py::arg("d"), py::arg("L"),
          py::arg("mode"), py::arg("block_size"), py::arg("seed"),
          py::arg("randomize_attention") = false);
    m.def("random_vec", &random_vec, py::arg("d"), py::arg("seed"));

    m.def("two_phase_block",
          [](const ToyStack& stack, const Vec& emb, int block_size) {
              std::vector<LayerFn> fns;
              for (const ToyLayer& layer : stack.layers) {
                  fns.push_back([&layer](const Vec& x) { return layer.apply(x); });
              }
              return trace_to_dict(two_phase_block_schedule(fns, emb, block_size, stack.attn));
          },
          py::arg("stack"), py::arg("embedding"), py::arg("block_size"));
    m.def("two_phase_full",
          [](const ToyStack& stack, const Vec& emb, int group_size) {
              std::vector<LayerFn> fns;
              for (const ToyLayer& layer : stack.layers) {
                  fns.push_back([&layer](const Vec& x) { return layer.apply(x); });
              }
              return trace_to_dict(two_phase_full_schedule(fns, emb, group_size, stack.attn));
          },
          py::arg("stack"), py::arg("embedding"), py::arg("group_size"));

    // mixing matrices
    py::class_<DepthMixMatrix>(m, "DepthMixMatrix")
        .def_readonly("L", &DepthMixMatrix::L)
        .def_readonly("variant", &DepthMixMatrix::variant)
        .def("rows",
             [](const DepthMixMatrix& M) {
                 std::vector<std::vector<double>> rows(M.L, std::vector<double>(M.L));
                 for (int r = 0; r < M.L; ++r) {
                     for (int c = 0; c < M.L; ++c) rows[r][c] = M.at(r, c);
                 }
                 return rows;
             })
        .def("apply",
             [](const DepthMixMatrix& M, const std::vector<Vec>& values) {
                 return M.apply(values);
             })
        .def("to_csv", &DepthMixMatrix::to_csv);
    m.def("mix_standard", &mix_standard);
    m.def("mix_highway",
          [](const std::vector<double>& gates) { return mix_highway(gates); });
    m.def("mix_mhc",
          [](const std::vector<Vec>& alphas, const std::vector<Vec>& betas,
             const std::vector<std::vector<double>>& As, int streams,
             bool require_doubly_stochastic) {
              MhcParams p;
              p.alphas = alphas;
              p.betas = betas;
              p.As = As;
              p.m = streams;
              p.require_doubly_stochastic = require_doubly_stochastic;
              return mix_mhc(p);
          },
          py::arg("alphas"), py::arg("betas"), py::arg("As"), py::arg("m"),
          py::arg("require_doubly_stochastic") = false);
    m.def("mix_attnres_full",
          [](const std::vector<Vec>& queries, const std::vector<Vec>& keys,
             const Vec& gain, double eps) {
              return mix_attnres_full(queries, keys, make_norm(gain, eps));
          },
          py::arg("queries"), py::arg("keys"), py::arg("gain"), py::arg("eps") = 1e-6);
    m.def("mix_attnres_block",
          [](const ToyStack& stack, const Vec& embedding, int block_size) {
              return mix_attnres_block(block_size, stack.forward(embedding));
          },
          py::arg("stack"), py::arg("embedding"), py::arg("block_size"));
    m.def("semiseparable_rank", &semiseparable_rank, py::arg("M"), py::arg("tol") = 1e-9);
    m.def("numerical_rank", &numerical_rank, py::arg("M"), py::arg("tol") = 1e-9);

    // pipeline communication
    m.def("comm_naive",
          [](int P, int V, double Np, int d) {
              PipelineConfig c{P, V, Rational(static_cast<std::int64_t>(Np)), d};
              return comm_naive(c).to_double();
          },
          py::arg("P"), py::arg("V"), py::arg("Np") = 1.0, py::arg("d") = 1);
    m.def("comm_cached",
          [](int P, int V, double Np, int d) {
              PipelineConfig c{P, V, Rational(static_cast<std::int64_t>(Np)), d};
              return comm_cached(c).to_double();
          },
          py::arg("P"), py::arg("V"), py::arg("Np") = 1.0, py::arg("d") = 1);
    m.def("simulate_pipeline",
          [](int P, int V, double Np, int d, bool caching) {
              PipelineConfig c{P, V, Rational(static_cast<std::int64_t>(Np)), d};
              return log_to_dict(simulate(c, caching));
          },
          py::arg("P"), py::arg("V"), py::arg("Np"), py::arg("d"), py::arg("caching"));

    // cost model
    m.def("io_cost",
          [](const std::string& scheme, int L, int N, int mm) {
              SchemeSpec spec;
              if (scheme == "standard") spec = SchemeSpec::standard();
              else if (scheme == "mhc") spec = SchemeSpec::mhc(mm);
              else if (scheme == "attnres-full") spec = SchemeSpec::attnres_full(L, N);
              else if (scheme == "attnres-block") spec = SchemeSpec::attnres_block(L, N);
              else throw std::invalid_argument("unknown scheme: " + scheme);
              CostExpr e = io_cost(spec);
              py::dict d;
              d["scheme"] = e.scheme;
              d["symbolic"] = e.symbolic;
              d["read_d"] = e.read.d_coeff.to_double();
              d["read_const"] = e.read.constant.to_double();
              d["write_d"] = e.write.d_coeff.to_double();
              d["write_const"] = e.write.constant.to_double();
              d["total_d"] = e.total().d_coeff.to_double();
              d["total_const"] = e.total().constant.to_double();
              return d;
          },
          py::arg("scheme"), py::arg("L") = 0, py::arg("N") = 0, py::arg("m") = 0);
    m.def("full_twophase_io", [](int L, int N) {
        TwoPhaseIoReport r = full_twophase_io(L, N);
        py::dict d;
        d["L"] = r.L;
        d["N"] = r.N;
        d["S"] = r.S;
        d["read_inter_total"] = r.read_inter_total.to_double();
        d["write_inter_total"] = r.write_inter_total.to_double();
        d["read_intra_per_block"] = r.read_intra_per_block.to_double();
        d["write_intra_per_block"] = r.write_intra_per_block.to_double();
        d["per_layer_total"] = r.per_layer_total.to_double();
        return d;
    });
    m.def("prefill_memory",
          [](int blocks, std::int64_t seq_len, int hidden_dim, int bytes_per_element,
             int shard_devices, std::optional<std::int64_t> chunk) {
              return prefill_memory(blocks, seq_len, hidden_dim, bytes_per_element,
                                    shard_devices, chunk);
          },
          py::arg("blocks"), py::arg("seq_len"), py::arg("hidden_dim"),
          py::arg("bytes_per_element"), py::arg("shard_devices"),
          py::arg("chunk") = std::nullopt);

    // scaling analysis
    py::class_<PowerLawFit>(m, "PowerLawFit")
        .def_readonly("A", &PowerLawFit::A)
        .def_readonly("alpha", &PowerLawFit::alpha)
        .def_readonly("residual", &PowerLawFit::residual)
        .def("loss_at", &PowerLawFit::loss_at);
    m.def("fit_power_law", [](const std::vector<std::pair<double, double>>& pts) {
        return fit_power_law(pts);
    });
    m.def("estimate_compute", &estimate_compute, py::arg("active_params"),
          py::arg("tokens"));
    m.def("compute_advantage", &compute_advantage, py::arg("fit_a"), py::arg("fit_b"),
          py::arg("c_ref"));
}
