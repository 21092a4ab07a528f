// Command-line front end: equivalence and gradient verification plus CSV/JSON
// emitters for the cost table, pipeline simulator, scaling fits, mixing
// matrices, weight heatmaps and norm profiles.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "attnres/analysis.hpp"
#include "attnres/costmodel.hpp"
#include "attnres/csvio.hpp"
#include "attnres/mixmat.hpp"
#include "attnres/pipesim.hpp"
#include "attnres/toystack.hpp"
#include "attnres/twophase.hpp"

namespace {

using namespace attnres;

constexpr int kExitOk = 0;
constexpr int kExitVerificationFailed = 1;
constexpr int kExitUsage = 2;

std::string resolve_output(const std::string& path) {
    if (path.empty()) return path;
    std::filesystem::path p(path);
    if (p.is_relative()) {
        if (const char* dir = std::getenv("ATTNRES_OUT_DIR")) {
            return (std::filesystem::path(dir) / p).string();
        }
    }
    return path;
}

void emit(const std::string& path, const std::string& content) {
    if (path.empty()) {
        std::cout << content;
        return;
    }
    const std::string resolved = resolve_output(path);
    std::ofstream out(resolved, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + resolved);
    out << content;
}

Rational parse_rational(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos) return Rational(std::stoll(s));
    return Rational(std::stoll(s.substr(0, slash)), std::stoll(s.substr(slash + 1)));
}

nlohmann::json load_config(const std::string& path) {
    if (path.empty()) return nlohmann::json::object();
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    nlohmann::json j;
    in >> j;
    return j;
}

// flags override config-file values: apply the config only where the user
// did not pass the flag
template <typename T>
void apply_config(const CLI::App& app, const nlohmann::json& cfg,
                  const std::string& flag, const std::string& key, T& value) {
    const CLI::Option* opt = app.get_option_no_throw("--" + flag);
    if (opt != nullptr && opt->count() > 0) return;
    if (cfg.contains(key)) value = cfg.at(key).get<T>();
}

void check_block_size(int L, int S, bool allow_ragged) {
    if (S >= 1 && L % S != 0 && !allow_ragged) {
        throw std::runtime_error("block size " + std::to_string(S) + " does not divide L=" +
                                 std::to_string(L) + " (pass --allow-ragged for a short tail)");
    }
}

double max_abs_diff(const Vec& a, const Vec& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

double trace_deviation(const ForwardTrace& a, const ForwardTrace& b) {
    double m = max_abs_diff(a.output, b.output);
    for (std::size_t l = 0; l < a.inputs.size(); ++l) {
        m = std::max(m, max_abs_diff(a.inputs[l], b.inputs[l]));
        m = std::max(m, max_abs_diff(a.outputs[l], b.outputs[l]));
    }
    return m;
}

int run_equiv(int d, int L, int S, int seeds, std::uint64_t seed0, bool corrupt,
              double threshold) {
    double worst = 0.0;
    for (int s = 0; s < seeds; ++s) {
        const std::uint64_t seed = seed0 + static_cast<std::uint64_t>(s);
        const Vec emb = random_vec(d, seed * 7919 + 1);

        ToyStack full = make_random_stack(d, L, ResidualMode::Full, S, seed, true);
        std::vector<LayerFn> fns;
        for (const ToyLayer& layer : full.layers) {
            fns.push_back([&layer](const Vec& x) { return layer.apply(x); });
        }
        TwoPhaseOptions opt;
        opt.corrupt_merge = corrupt;

        ForwardTrace naive_full = full_forward(fns, emb, full.attn);
        ForwardTrace fast_full = two_phase_full_schedule(fns, emb, S, full.attn, opt);
        const double dev_full = trace_deviation(naive_full, fast_full);

        ForwardTrace naive_block = block_forward(fns, emb, S, full.attn);
        ForwardTrace fast_block = two_phase_block_schedule(fns, emb, S, full.attn, opt);
        const double dev_block = trace_deviation(naive_block, fast_block);

        std::cout << "seed " << seed << ": full two-phase deviation " << fmt_double(dev_full)
                  << ", block two-phase deviation " << fmt_double(dev_block) << "\n";
        worst = std::max({worst, dev_full, dev_block});
    }
    std::cout << "max deviation " << fmt_double(worst) << " (threshold "
              << fmt_double(threshold) << ")\n";
    return worst < threshold ? kExitOk : kExitVerificationFailed;
}

int run_gradcheck(int d, int L, int S, int seeds, double threshold) {
    double worst = 0.0;
    std::string worst_desc;
    for (ResidualMode mode :
         {ResidualMode::Standard, ResidualMode::Full, ResidualMode::Block}) {
        for (int s = 0; s < seeds; ++s) {
            ToyStack stack = make_random_stack(d, L, mode, S, static_cast<std::uint64_t>(s));
            const Vec emb = random_vec(d, 1000 + s);
            const Vec target = random_vec(d, 2000 + s);
            GradReport report = gradient_check(stack, emb, target);
            std::cout << to_string(mode) << " seed " << s << ": max rel error "
                      << fmt_double(report.max_rel_error) << " at " << report.worst_param
                      << "\n";
            if (report.max_rel_error > worst) {
                worst = report.max_rel_error;
                worst_desc = to_string(mode) + "/" + report.worst_param;
            }
        }
    }
    std::cout << "max relative error " << fmt_double(worst) << " (" << worst_desc
              << ", threshold " << fmt_double(threshold) << ")\n";
    return worst < threshold ? kExitOk : kExitVerificationFailed;
}

ToyStack cli_stack(int d, int L, ResidualMode mode, int S, std::uint64_t seed,
                   bool random_attention) {
    return make_random_stack(d, L, mode, S, seed, random_attention);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"attention-residual reference tool"};
    app.require_subcommand(1);

    // ---- equiv-check ----
    auto* equiv = app.add_subcommand(
        "equiv-check", "verify two-phase schedules against the naive forward");
    int eq_d = 8, eq_L = 8, eq_S = 4, eq_seeds = 3;
    std::uint64_t eq_seed = 0;
    bool eq_corrupt = false;
    std::string eq_config;
    equiv->add_option("--d", eq_d, "hidden dimension");
    equiv->add_option("--L", eq_L, "number of sub-layers");
    equiv->add_option("--S", eq_S, "block / scheduling group size");
    equiv->add_option("--seeds", eq_seeds, "number of seeds");
    equiv->add_option("--seed", eq_seed, "base seed");
    equiv->add_option("--config", eq_config, "JSON config file");
    equiv->add_flag("--corrupt-merge", eq_corrupt,
                    "negative control: corrupt the online merge and expect failure");
    bool eq_ragged = false;
    equiv->add_flag("--allow-ragged", eq_ragged, "allow a short final block");

    // ---- gradcheck ----
    auto* grad = app.add_subcommand(
        "gradcheck", "verify reverse-mode gradients against central differences");
    int gc_d = 6, gc_L = 8, gc_S = 2, gc_seeds = 3;
    std::string gc_config;
    grad->add_option("--d", gc_d, "hidden dimension");
    grad->add_option("--L", gc_L, "number of sub-layers");
    grad->add_option("--S", gc_S, "block size for block mode");
    grad->add_option("--seeds", gc_seeds, "number of seeds");
    grad->add_option("--config", gc_config, "JSON config file");
    bool gc_ragged = false;
    grad->add_flag("--allow-ragged", gc_ragged, "allow a short final block");

    // ---- cost-table ----
    auto* cost = app.add_subcommand("cost-table",
                                    "per-layer memory access table (CSV)");
    std::string ct_params, ct_out;
    cost->add_option("--params", ct_params, "overrides, e.g. L=128,N=8,m=4,d=1");
    cost->add_option("--out", ct_out, "output path (default stdout)");

    // ---- pipeline-sim ----
    auto* pipe = app.add_subcommand("pipeline-sim",
                                    "block traffic under interleaved pipelining");
    int ps_P = 4, ps_V = 2, ps_d = 1;
    std::string ps_np = "1", ps_caching = "on", ps_format = "json", ps_out, ps_config;
    bool ps_backward = false;
    pipe->add_option("--P", ps_P, "physical stages");
    pipe->add_option("--V", ps_V, "virtual stages per physical stage");
    pipe->add_option("--Np", ps_np, "blocks per chunk (rational, e.g. 1/2)");
    pipe->add_option("--d", ps_d, "hidden dimension");
    pipe->add_option("--caching", ps_caching, "on|off")
        ->check(CLI::IsMember({"on", "off"}));
    pipe->add_option("--format", ps_format, "csv|json")
        ->check(CLI::IsMember({"csv", "json"}));
    pipe->add_option("--out", ps_out, "output path (default stdout)");
    pipe->add_option("--config", ps_config,
                     "JSON config; may carry an explicit completion schedule");
    pipe->add_flag("--include-backward", ps_backward,
                   "also report totals doubled for the mirrored backward pass");

    // ---- scaling-fit ----
    auto* fit = app.add_subcommand("scaling-fit", "power-law fit of loss vs compute");
    std::string sf_in, sf_out;
    fit->add_option("--in", sf_in, "CSV of compute,loss or params,tokens,loss")
        ->required();
    fit->add_option("--out", sf_out, "output path (default stdout)");

    // ---- mix-matrix ----
    auto* mix = app.add_subcommand("mix-matrix", "depth mixing matrix (CSV)");
    std::string mm_variant = "standard", mm_out, mm_config;
    int mm_L = 8, mm_m = 2, mm_S = 2;
    std::uint64_t mm_seed = 0;
    mix->add_option("--variant", mm_variant, "standard|highway|mhc|attnres-full|attnres-block")
        ->check(CLI::IsMember({"standard", "highway", "mhc", "attnres-full", "attnres-block"}));
    mix->add_option("--L", mm_L, "matrix size");
    mix->add_option("--m", mm_m, "streams (mhc)");
    mix->add_option("--S", mm_S, "block size (attnres-block)");
    mix->add_option("--seed", mm_seed, "seed for gates / parameters / stacks");
    mix->add_option("--out", mm_out, "output path (default stdout)");
    mix->add_option("--config", mm_config, "JSON config file");

    // ---- heatmap ----
    auto* heat = app.add_subcommand("heatmap", "mean depth-attention weights (CSV)");
    int hm_d = 8, hm_L = 8, hm_S = 2, hm_batch = 4;
    std::uint64_t hm_seed = 0;
    std::string hm_mode = "full", hm_out, hm_config;
    bool hm_random_attention = false;
    heat->add_option("--mode", hm_mode, "full|block")
        ->check(CLI::IsMember({"full", "block"}));
    heat->add_option("--d", hm_d, "hidden dimension");
    heat->add_option("--L", hm_L, "number of sub-layers");
    heat->add_option("--S", hm_S, "block size (block mode)");
    heat->add_option("--batch", hm_batch, "number of token embeddings");
    heat->add_option("--seed", hm_seed, "seed");
    heat->add_flag("--random-attention", hm_random_attention,
                   "randomize queries/gains instead of the zero init");
    bool hm_ragged = false;
    heat->add_flag("--allow-ragged", hm_ragged, "allow a short final block");
    heat->add_option("--out", hm_out, "output path (default stdout)");
    heat->add_option("--config", hm_config, "JSON config file");

    // ---- norm-profile ----
    auto* norm = app.add_subcommand("norm-profile", "per-sub-layer norms (CSV)");
    int np_d = 8, np_L = 8, np_S = 2;
    std::uint64_t np_seed = 0;
    std::string np_mode = "standard", np_out, np_config;
    norm->add_option("--mode", np_mode, "standard|full|block")
        ->check(CLI::IsMember({"standard", "full", "block"}));
    norm->add_option("--d", np_d, "hidden dimension");
    norm->add_option("--L", np_L, "number of sub-layers");
    norm->add_option("--S", np_S, "block size (block mode)");
    norm->add_option("--seed", np_seed, "seed");
    bool np_ragged = false;
    norm->add_flag("--allow-ragged", np_ragged, "allow a short final block");
    norm->add_option("--out", np_out, "output path (default stdout)");
    norm->add_option("--config", np_config, "JSON config file");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kExitUsage;
    }

    try {
        if (equiv->parsed()) {
            nlohmann::json cfg = load_config(eq_config);
            apply_config(*equiv, cfg, "d", "d", eq_d);
            apply_config(*equiv, cfg, "L", "L", eq_L);
            apply_config(*equiv, cfg, "S", "S", eq_S);
            apply_config(*equiv, cfg, "seeds", "seeds", eq_seeds);
            apply_config(*equiv, cfg, "seed", "seed", eq_seed);
            check_block_size(eq_L, eq_S, eq_ragged);
            return run_equiv(eq_d, eq_L, eq_S, eq_seeds, eq_seed, eq_corrupt, 1e-10);
        }
        if (grad->parsed()) {
            nlohmann::json cfg = load_config(gc_config);
            apply_config(*grad, cfg, "d", "d", gc_d);
            apply_config(*grad, cfg, "L", "L", gc_L);
            apply_config(*grad, cfg, "S", "S", gc_S);
            apply_config(*grad, cfg, "seeds", "seeds", gc_seeds);
            check_block_size(gc_L, gc_S, gc_ragged);
            return run_gradcheck(gc_d, gc_L, gc_S, gc_seeds, 1e-5);
        }
        if (cost->parsed()) {
            int L = 128, N = 8, m = 4, d = 1;
            std::stringstream ss(ct_params);
            std::string kv;
            while (std::getline(ss, kv, ',')) {
                if (kv.empty()) continue;
                const auto pos = kv.find('=');
                if (pos == std::string::npos) {
                    throw std::runtime_error("bad --params entry: " + kv);
                }
                const std::string key = kv.substr(0, pos);
                const int value = std::stoi(kv.substr(pos + 1));
                if (key == "L") L = value;
                else if (key == "N") N = value;
                else if (key == "m") m = value;
                else if (key == "d") d = value;
                else throw std::runtime_error("unknown --params key: " + key);
            }
            emit(ct_out, cost_table_csv(L, N, m, d));
            return kExitOk;
        }
        if (pipe->parsed()) {
            nlohmann::json cfg = load_config(ps_config);
            apply_config(*pipe, cfg, "P", "P", ps_P);
            apply_config(*pipe, cfg, "V", "V", ps_V);
            apply_config(*pipe, cfg, "d", "d", ps_d);
            apply_config(*pipe, cfg, "Np", "Np", ps_np);
            apply_config(*pipe, cfg, "caching", "caching", ps_caching);
            const bool caching = ps_caching == "on";

            TransferLog log;
            if (cfg.contains("completions")) {
                ExplicitSchedule sched;
                sched.physical_stages = ps_P;
                sched.virtual_stages = ps_V;
                sched.hidden_dim = ps_d;
                sched.initial_blocks = cfg.value("initial_blocks", std::vector<int>{});
                sched.completions = cfg.at("completions").get<std::vector<std::vector<int>>>();
                log = simulate(sched, caching);
            } else {
                PipelineConfig pc;
                pc.physical_stages = ps_P;
                pc.virtual_stages = ps_V;
                pc.blocks_per_chunk = parse_rational(ps_np);
                pc.hidden_dim = ps_d;
                log = simulate(pc, caching);
            }
            std::string body = (ps_format == "csv") ? log.to_csv() : log.to_json();
            if (ps_format == "csv") {
                body = "# P=" + std::to_string(ps_P) + " V=" + std::to_string(ps_V) +
                       " Np=" + ps_np + " d=" + std::to_string(ps_d) + "\n" + body;
            }
            if (ps_backward) {
                const Rational both = log.total_elements * Rational(2);
                if (ps_format == "csv") {
                    body += "# forward_plus_backward_elements=" + both.str() + "\n";
                } else {
                    nlohmann::json j = nlohmann::json::parse(body);
                    j["forward_plus_backward_elements"] = both.str();
                    body = j.dump(2) + "\n";
                }
            }
            emit(ps_out, body);
            return kExitOk;
        }
        if (fit->parsed()) {
            std::ifstream in(sf_in);
            if (!in) throw std::runtime_error("cannot open input: " + sf_in);
            auto points = load_scaling_csv(in);
            PowerLawFit f = fit_power_law(points);
            emit(sf_out, f.to_json() + "\n");
            return kExitOk;
        }
        if (mix->parsed()) {
            nlohmann::json cfg = load_config(mm_config);
            apply_config(*mix, cfg, "variant", "variant", mm_variant);
            apply_config(*mix, cfg, "L", "L", mm_L);
            apply_config(*mix, cfg, "m", "m", mm_m);
            apply_config(*mix, cfg, "S", "S", mm_S);
            apply_config(*mix, cfg, "seed", "seed", mm_seed);

            DepthMixMatrix M;
            if (mm_variant == "standard") {
                M = mix_standard(mm_L);
            } else if (mm_variant == "highway") {
                Vec gates = random_vec(mm_L - 1, mm_seed);
                for (double& g : gates) g = 0.5 * (g + 1.0);  // map to [0, 1)
                M = mix_highway(gates);
            } else if (mm_variant == "mhc") {
                MhcParams p;
                p.m = mm_m;
                for (int l = 0; l < mm_L; ++l) {
                    p.alphas.push_back(random_vec(mm_m, mm_seed + 17 * l + 1));
                    p.betas.push_back(random_vec(mm_m, mm_seed + 17 * l + 2));
                }
                for (int l = 0; l + 1 < mm_L; ++l) {
                    Vec a = random_vec(mm_m * mm_m, mm_seed + 17 * l + 3);
                    p.As.push_back(std::vector<double>(a.begin(), a.end()));
                }
                M = mix_mhc(p);
            } else if (mm_variant == "attnres-full") {
                std::vector<Vec> queries, keys;
                for (int l = 0; l < mm_L; ++l) {
                    queries.push_back(random_vec(8, mm_seed + 31 * l + 1));
                    keys.push_back(random_vec(8, mm_seed + 31 * l + 2));
                }
                M = mix_attnres_full(queries, keys, RmsNorm::ones(8));
            } else {
                ToyStack stack = cli_stack(8, mm_L, ResidualMode::Block, mm_S, mm_seed, true);
                ForwardTrace trace = stack.forward(random_vec(8, mm_seed + 5));
                M = mix_attnres_block(mm_S, trace);
            }
            emit(mm_out, M.to_csv());
            return kExitOk;
        }
        if (heat->parsed()) {
            nlohmann::json cfg = load_config(hm_config);
            apply_config(*heat, cfg, "mode", "mode", hm_mode);
            apply_config(*heat, cfg, "d", "d", hm_d);
            apply_config(*heat, cfg, "L", "L", hm_L);
            apply_config(*heat, cfg, "S", "S", hm_S);
            apply_config(*heat, cfg, "batch", "batch", hm_batch);
            apply_config(*heat, cfg, "seed", "seed", hm_seed);
            const ResidualMode mode = residual_mode_from_string(hm_mode);
            if (mode == ResidualMode::Block) check_block_size(hm_L, hm_S, hm_ragged);
            ToyStack stack = cli_stack(hm_d, hm_L, mode, hm_S, hm_seed, hm_random_attention);
            std::vector<ForwardTrace> traces;
            for (int b = 0; b < hm_batch; ++b) {
                traces.push_back(stack.forward(random_vec(hm_d, hm_seed + 101 * (b + 1))));
            }
            std::string body = "# mode=" + hm_mode + " d=" + std::to_string(hm_d) +
                               " L=" + std::to_string(hm_L) + " S=" + std::to_string(hm_S) +
                               " batch=" + std::to_string(hm_batch) +
                               " seed=" + std::to_string(hm_seed) + "\n";
            emit(hm_out, body + weight_heatmap(traces, mode).to_csv());
            return kExitOk;
        }
        if (norm->parsed()) {
            nlohmann::json cfg = load_config(np_config);
            apply_config(*norm, cfg, "mode", "mode", np_mode);
            apply_config(*norm, cfg, "d", "d", np_d);
            apply_config(*norm, cfg, "L", "L", np_L);
            apply_config(*norm, cfg, "S", "S", np_S);
            apply_config(*norm, cfg, "seed", "seed", np_seed);
            const ResidualMode mode = residual_mode_from_string(np_mode);
            if (mode == ResidualMode::Block) check_block_size(np_L, np_S, np_ragged);
            ToyStack stack = cli_stack(np_d, np_L, mode, np_S, np_seed, false);
            ForwardTrace trace = stack.forward(random_vec(np_d, np_seed + 11));
            std::string body = "# mode=" + np_mode + " d=" + std::to_string(np_d) +
                               " L=" + std::to_string(np_L) + " S=" + std::to_string(np_S) +
                               " seed=" + std::to_string(np_seed) + "\n";
            emit(np_out, body + norm_profile(trace).to_csv());
            return kExitOk;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitUsage;
    }
    return kExitUsage;
}
