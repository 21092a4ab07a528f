#include "attnres/toystack.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "attnres/csvio.hpp"

namespace attnres {

std::string to_string(ResidualMode mode) {
    switch (mode) {
        case ResidualMode::Standard: return "standard";
        case ResidualMode::Full: return "full";
        case ResidualMode::Block: return "block";
    }
    return "?";
}

ResidualMode residual_mode_from_string(const std::string& name) {
    if (name == "standard") return ResidualMode::Standard;
    if (name == "full") return ResidualMode::Full;
    if (name == "block") return ResidualMode::Block;
    throw std::invalid_argument("unknown residual mode: " + name);
}

Vec ToyLayer::apply(const Vec& x) const {
    const std::size_t d = bias.size();
    if (x.size() != d) throw std::invalid_argument("ToyLayer: dimension mismatch");
    Vec y(d);
    for (std::size_t r = 0; r < d; ++r) {
        double z = bias[r];
        const double* w = weight.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) z += w[c] * x[c];
        y[r] = std::tanh(z);
    }
    return y;
}

namespace {

// 53-bit uniform in [0, 1); independent of the standard library's
// distribution implementation, so seeds reproduce everywhere.
double uniform01(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

std::vector<LayerFn> layer_fns(const ToyStack& stack) {
    std::vector<LayerFn> fns;
    fns.reserve(stack.layers.size());
    for (const ToyLayer& layer : stack.layers) {
        fns.push_back([&layer](const Vec& x) { return layer.apply(x); });
    }
    return fns;
}

ForwardTrace standard_forward(const ToyStack& stack, const Vec& embedding) {
    ForwardTrace trace;
    Vec h = embedding;
    for (const ToyLayer& layer : stack.layers) {
        Vec y = layer.apply(h);
        if (!all_finite(y)) throw std::runtime_error("standard forward: non-finite output");
        trace.inputs.push_back(h);
        trace.outputs.push_back(y);
        h = add(h, y);
    }
    trace.output = h;
    return trace;
}

}  // namespace

ForwardTrace ToyStack::forward(const Vec& embedding) const {
    std::vector<LayerFn> fns = layer_fns(*this);
    switch (mode) {
        case ResidualMode::Standard: return standard_forward(*this, embedding);
        case ResidualMode::Full: return full_forward(fns, embedding, attn);
        case ResidualMode::Block: return block_forward(fns, embedding, block_size, attn);
    }
    throw std::logic_error("unreachable");
}

ToyStack make_random_stack(int d, int L, ResidualMode mode, int block_size,
                           std::uint64_t seed, bool randomize_attention) {
    if (d < 1 || L < 1) throw std::invalid_argument("make_random_stack: bad dims");
    ToyStack stack;
    stack.d = d;
    stack.L = L;
    stack.block_size = block_size;
    stack.mode = mode;

    std::mt19937_64 rng(seed);
    const double ws = 1.0 / std::sqrt(static_cast<double>(d));
    for (int l = 0; l < L; ++l) {
        ToyLayer layer;
        layer.kind = (l % 2 == 0) ? ToyLayer::Kind::AttnSlot : ToyLayer::Kind::MlpSlot;
        layer.weight.resize(static_cast<std::size_t>(d) * d);
        for (double& w : layer.weight) w = (uniform01(rng) - 0.5) * ws;
        layer.bias.assign(d, 0.0);
        stack.layers.push_back(std::move(layer));
    }
    for (int l = 0; l < L + 1; ++l) {
        DepthAttnParams p = DepthAttnParams::zero_init(static_cast<std::size_t>(d));
        if (randomize_attention) {
            for (double& q : p.query) q = (uniform01(rng) - 0.5);
            for (double& g : p.norm.gain) g = 1.0 + 0.2 * (uniform01(rng) - 0.5);
        }
        stack.attn.push_back(std::move(p));
    }
    return stack;
}

Vec random_vec(int d, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Vec v(d);
    for (double& x : v) x = 2.0 * uniform01(rng) - 1.0;
    return v;
}

namespace {

// One attention site with everything the backward pass needs.
struct AttnSite {
    const DepthAttnParams* params = nullptr;
    int param_index = 0;
    std::vector<Source> sources;
    std::vector<double> alpha;
    Vec h;
};

struct BackCtx {
    const ToyStack& stack;
    Gradients& g;
    std::vector<Vec>& dy;  // adjoint of each layer output
    Vec& demb;
};

// Routes an adjoint for source `src` into the embedding / layer-output
// accumulators. Block and partial sources fan out to their member outputs.
void route_source_adjoint(BackCtx& ctx, const Source& src, const Vec& dv) {
    switch (src.tag) {
        case SourceTag::Embedding:
            for (std::size_t k = 0; k < dv.size(); ++k) ctx.demb[k] += dv[k];
            return;
        case SourceTag::LayerOutput: {
            Vec& acc = ctx.dy[static_cast<std::size_t>(src.index) - 1];
            for (std::size_t k = 0; k < dv.size(); ++k) acc[k] += dv[k];
            return;
        }
        case SourceTag::Block: {
            const int first = (src.index - 1) * ctx.stack.block_size + 1;
            const int last = std::min(src.index * ctx.stack.block_size, ctx.stack.L);
            for (int c = first; c <= last; ++c) {
                Vec& acc = ctx.dy[static_cast<std::size_t>(c) - 1];
                for (std::size_t k = 0; k < dv.size(); ++k) acc[k] += dv[k];
            }
            return;
        }
        case SourceTag::Partial: {
            const int first = (src.index - 1) * ctx.stack.block_size + 1;
            const int last = first + src.sub - 1;
            for (int c = first; c <= last; ++c) {
                Vec& acc = ctx.dy[static_cast<std::size_t>(c) - 1];
                for (std::size_t k = 0; k < dv.size(); ++k) acc[k] += dv[k];
            }
            return;
        }
    }
}

// Backward through h = sum_j alpha_j v_j with alpha = softmax(q . rmsnorm(v)).
// Both the value path and the key path (through the shared RMSNorm) feed the
// source adjoints.
void backprop_attention(BackCtx& ctx, const AttnSite& site, const Vec& dh) {
    const std::size_t d = dh.size();
    const std::size_t n = site.sources.size();
    const Vec& query = site.params->query;
    const Vec& gain = site.params->norm.gain;
    const double eps = site.params->norm.eps;

    std::vector<double> dalpha(n);
    for (std::size_t j = 0; j < n; ++j) dalpha[j] = dot(dh, site.sources[j].value);
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += site.alpha[j] * dalpha[j];

    Vec& dquery = ctx.g.dquery[static_cast<std::size_t>(site.param_index)];
    Vec& dgain = ctx.g.dgain[static_cast<std::size_t>(site.param_index)];

    for (std::size_t j = 0; j < n; ++j) {
        const Vec& x = site.sources[j].value;
        const double a = site.alpha[j];
        const double dlogit = a * (dalpha[j] - s);

        double ms = 0.0;
        for (double v : x) ms += v * v;
        ms /= static_cast<double>(d);
        const double r = std::sqrt(ms + eps);

        Vec dv(d);
        for (std::size_t k = 0; k < d; ++k) dv[k] = a * dh[k];  // value path

        if (dlogit != 0.0) {
            // dquery += dlogit * rmsnorm(x); dn = dlogit * query
            double ux = 0.0;  // (dn . gain first) dotted with x
            for (std::size_t k = 0; k < d; ++k) {
                const double dn = dlogit * query[k];
                dquery[k] += dlogit * gain[k] * x[k] / r;
                dgain[k] += dn * x[k] / r;
                ux += dn * gain[k] * x[k];
            }
            const double c = ux / (static_cast<double>(d) * r * r * r);
            for (std::size_t k = 0; k < d; ++k) {
                dv[k] += dlogit * query[k] * gain[k] / r - c * x[k];
            }
        }
        route_source_adjoint(ctx, site.sources[j], dv);
    }
}

// tanh(Wx + b) backward; returns the input adjoint.
Vec backprop_layer(const ToyLayer& layer, const Vec& input, const Vec& output,
                   const Vec& doutput, std::vector<double>& dweight, Vec& dbias) {
    const std::size_t d = input.size();
    Vec dx(d, 0.0);
    for (std::size_t r = 0; r < d; ++r) {
        const double dz = doutput[r] * (1.0 - output[r] * output[r]);
        dbias[r] += dz;
        double* dw = dweight.data() + r * d;
        const double* w = layer.weight.data() + r * d;
        for (std::size_t c = 0; c < d; ++c) {
            dw[c] += dz * input[c];
            dx[c] += dz * w[c];
        }
    }
    return dx;
}

std::vector<Source> final_sources(const ToyStack& stack, const Vec& embedding,
                                  const ForwardTrace& trace) {
    std::vector<Source> srcs;
    if (stack.mode == ResidualMode::Full) {
        srcs.push_back({SourceTag::Embedding, 0, 0, embedding});
        for (int i = 1; i <= stack.L; ++i) {
            srcs.push_back({SourceTag::LayerOutput, i, 0,
                            trace.outputs[static_cast<std::size_t>(i) - 1]});
        }
    } else {
        srcs.push_back({SourceTag::Embedding, 0, 0, trace.final_blocks[0]});
        for (std::size_t n = 1; n < trace.final_blocks.size(); ++n) {
            srcs.push_back({SourceTag::Block, static_cast<int>(n), 0,
                            trace.final_blocks[n]});
        }
    }
    return srcs;
}

}  // namespace

Gradients loss_and_grad(const ToyStack& stack, const Vec& embedding, const Vec& target) {
    if (static_cast<int>(embedding.size()) != stack.d ||
        static_cast<int>(target.size()) != stack.d) {
        throw std::invalid_argument("loss_and_grad: dimension mismatch");
    }
    const std::size_t d = embedding.size();
    const std::size_t L = stack.layers.size();

    ForwardTrace trace = stack.forward(embedding);

    Gradients g;
    g.dweight.assign(L, std::vector<double>(d * d, 0.0));
    g.dbias.assign(L, Vec(d, 0.0));
    g.dquery.assign(L + 1, Vec(d, 0.0));
    g.dgain.assign(L + 1, Vec(d, 0.0));
    g.dembedding.assign(d, 0.0);
    g.dinputs.assign(L, Vec(d, 0.0));

    Vec dfinal(d);
    g.loss = 0.0;
    for (std::size_t k = 0; k < d; ++k) {
        dfinal[k] = trace.output[k] - target[k];
        g.loss += 0.5 * dfinal[k] * dfinal[k];
    }

    if (stack.mode == ResidualMode::Standard) {
        Vec carry = dfinal;  // adjoint of h_{l+1}
        for (std::size_t l = L; l-- > 0;) {
            Vec dx = backprop_layer(stack.layers[l], trace.inputs[l], trace.outputs[l],
                                    carry, g.dweight[l], g.dbias[l]);
            for (std::size_t k = 0; k < d; ++k) carry[k] += dx[k];
            g.dinputs[l] = carry;
        }
        g.dembedding = carry;
        return g;
    }

    std::vector<Vec> dy(L, Vec(d, 0.0));
    BackCtx ctx{stack, g, dy, g.dembedding};

    AttnSite final_site;
    final_site.params = &stack.attn[L];
    final_site.param_index = static_cast<int>(L);
    final_site.sources = final_sources(stack, embedding, trace);
    final_site.alpha = trace.output_alpha;
    backprop_attention(ctx, final_site, dfinal);

    for (std::size_t l = L; l-- > 0;) {
        Vec dh = backprop_layer(stack.layers[l], trace.inputs[l], trace.outputs[l],
                                dy[l], g.dweight[l], g.dbias[l]);
        g.dinputs[l] = dh;

        AttnSite site;
        site.params = &stack.attn[l];
        site.param_index = static_cast<int>(l);
        site.sources = trace.sources[l];
        site.alpha = trace.alphas[l];
        backprop_attention(ctx, site, dh);
    }
    return g;
}

GradReport gradient_check(const ToyStack& stack, const Vec& embedding,
                          const Vec& target, double step) {
    Gradients g = loss_and_grad(stack, embedding, target);

    ToyStack probe = stack;
    Vec emb = embedding;

    struct Slot {
        double* p;
        double analytic;
        std::string name;
    };
    std::vector<Slot> slots;
    for (std::size_t l = 0; l < probe.layers.size(); ++l) {
        auto& layer = probe.layers[l];
        for (std::size_t i = 0; i < layer.weight.size(); ++i) {
            slots.push_back({&layer.weight[i], g.dweight[l][i],
                             "layer" + std::to_string(l + 1) + ".weight[" + std::to_string(i) + "]"});
        }
        for (std::size_t i = 0; i < layer.bias.size(); ++i) {
            slots.push_back({&layer.bias[i], g.dbias[l][i],
                             "layer" + std::to_string(l + 1) + ".bias[" + std::to_string(i) + "]"});
        }
    }
    for (std::size_t l = 0; l < probe.attn.size(); ++l) {
        auto& p = probe.attn[l];
        for (std::size_t i = 0; i < p.query.size(); ++i) {
            slots.push_back({&p.query[i], g.dquery[l][i],
                             "attn" + std::to_string(l) + ".query[" + std::to_string(i) + "]"});
        }
        for (std::size_t i = 0; i < p.norm.gain.size(); ++i) {
            slots.push_back({&p.norm.gain[i], g.dgain[l][i],
                             "attn" + std::to_string(l) + ".gain[" + std::to_string(i) + "]"});
        }
    }
    for (std::size_t i = 0; i < emb.size(); ++i) {
        slots.push_back({&emb[i], g.dembedding[i], "embedding[" + std::to_string(i) + "]"});
    }

    auto loss_at = [&]() {
        ForwardTrace t = probe.forward(emb);
        double loss = 0.0;
        for (std::size_t k = 0; k < t.output.size(); ++k) {
            const double e = t.output[k] - target[k];
            loss += 0.5 * e * e;
        }
        return loss;
    };

    GradReport report;
    report.names.reserve(slots.size());
    report.analytic.reserve(slots.size());
    report.fd.reserve(slots.size());
    for (Slot& s : slots) {
        const double saved = *s.p;
        *s.p = saved + step;
        const double lp = loss_at();
        *s.p = saved - step;
        const double lm = loss_at();
        *s.p = saved;
        const double fd = (lp - lm) / (2.0 * step);
        const double rel = std::abs(s.analytic - fd) /
                           std::max({std::abs(s.analytic), std::abs(fd), 1e-8});
        report.names.push_back(s.name);
        report.analytic.push_back(s.analytic);
        report.fd.push_back(fd);
        if (rel > report.max_rel_error) {
            report.max_rel_error = rel;
            report.worst_param = s.name;
        }
    }
    return report;
}

NormProfile norm_profile(const ForwardTrace& trace) {
    NormProfile p;
    for (const Vec& h : trace.inputs) p.input_norms.push_back(l2_norm(h));
    for (const Vec& y : trace.outputs) p.output_norms.push_back(l2_norm(y));
    return p;
}

std::string NormProfile::to_csv() const {
    std::string s = "sublayer,input_norm,output_norm\n";
    for (std::size_t l = 0; l < input_norms.size(); ++l) {
        s += std::to_string(l + 1) + "," + fmt_double(input_norms[l]) + "," +
             fmt_double(output_norms[l]) + "\n";
    }
    return s;
}

Heatmap weight_heatmap(std::span<const ForwardTrace> traces, ResidualMode mode) {
    if (traces.empty()) throw std::invalid_argument("weight_heatmap: no traces");
    if (mode == ResidualMode::Standard) {
        throw std::invalid_argument("weight_heatmap: depth-attention modes only");
    }
    const int L = static_cast<int>(traces[0].alphas.size());

    Heatmap hm;
    hm.rows = L + 1;
    if (mode == ResidualMode::Full) {
        hm.cols = L + 1;
        hm.col_names.push_back("emb");
        for (int i = 1; i <= L; ++i) hm.col_names.push_back("y" + std::to_string(i));
    } else {
        const int n_blocks = static_cast<int>(traces[0].final_blocks.size()) - 1;
        hm.cols = n_blocks + 2;
        hm.col_names.push_back("emb");
        for (int n = 1; n <= n_blocks; ++n) hm.col_names.push_back("b" + std::to_string(n));
        hm.col_names.push_back("partial");
    }
    hm.data.assign(static_cast<std::size_t>(hm.rows) * hm.cols, 0.0);

    auto column = [&](const Source& src) {
        switch (src.tag) {
            case SourceTag::Embedding: return 0;
            case SourceTag::LayerOutput: return src.index;
            case SourceTag::Block: return src.index;
            case SourceTag::Partial: return hm.cols - 1;
        }
        return 0;
    };

    for (const ForwardTrace& t : traces) {
        for (int l = 0; l < L; ++l) {
            for (std::size_t s = 0; s < t.sources[l].size(); ++s) {
                hm.data[static_cast<std::size_t>(l) * hm.cols + column(t.sources[l][s])] +=
                    t.alphas[l][s];
            }
        }
        // final aggregation row: embedding followed by layer outputs / blocks
        for (std::size_t s = 0; s < t.output_alpha.size(); ++s) {
            hm.data[static_cast<std::size_t>(L) * hm.cols + static_cast<int>(s)] +=
                t.output_alpha[s];
        }
    }
    const double inv = 1.0 / static_cast<double>(traces.size());
    for (double& v : hm.data) v *= inv;
    return hm;
}

std::string Heatmap::to_csv() const {
    std::string s = "sublayer";
    for (const std::string& c : col_names) s += "," + c;
    s += "\n";
    for (int r = 0; r < rows; ++r) {
        s += (r < rows - 1) ? std::to_string(r + 1) : std::string("output");
        for (int c = 0; c < cols; ++c) s += "," + fmt_double(at(r, c));
        s += "\n";
    }
    return s;
}

}  // namespace attnres
