#include "attnres/mixmat.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <stdexcept>

#include "attnres/csvio.hpp"

namespace attnres {

std::vector<Vec> DepthMixMatrix::apply(std::span<const Vec> values) const {
    if (static_cast<int>(values.size()) != L) {
        throw std::invalid_argument("DepthMixMatrix::apply: need exactly L source values");
    }
    const std::size_t d = values.empty() ? 0 : values[0].size();
    std::vector<Vec> h(L, Vec(d, 0.0));
    for (int r = 0; r < L; ++r) {
        for (int c = 0; c < L; ++c) {
            const double w = at(r, c);
            if (w == 0.0) continue;
            for (std::size_t k = 0; k < d; ++k) h[r][k] += w * values[c][k];
        }
    }
    return h;
}

std::string DepthMixMatrix::to_csv() const {
    std::string s = "# variant=" + variant + " L=" + std::to_string(L) + "\n";
    for (int c = 0; c < L; ++c) {
        s += (c ? ",v" : "v") + std::to_string(c);
    }
    s += "\n";
    for (int r = 0; r < L; ++r) {
        for (int c = 0; c < L; ++c) {
            if (c) s += ",";
            s += fmt_double(at(r, c));
        }
        s += "\n";
    }
    return s;
}

static DepthMixMatrix make(int L, std::string variant) {
    if (L < 1) throw std::invalid_argument("mix matrix: L must be >= 1");
    DepthMixMatrix M;
    M.L = L;
    M.variant = std::move(variant);
    M.data.assign(static_cast<std::size_t>(L) * L, 0.0);
    return M;
}

DepthMixMatrix mix_standard(int L) {
    DepthMixMatrix M = make(L, "standard");
    for (int r = 0; r < L; ++r) {
        for (int c = 0; c <= r; ++c) M.at(r, c) = 1.0;
    }
    return M;
}

DepthMixMatrix mix_highway(std::span<const double> gates) {
    const int L = static_cast<int>(gates.size()) + 1;
    for (double g : gates) {
        if (!(g >= 0.0 && g <= 1.0)) {
            throw std::invalid_argument("mix_highway: gate outside [0, 1]");
        }
    }
    DepthMixMatrix M = make(L, "highway");
    // gates[j] is g_{j+2}; carry(i -> l) = prod_{j=i+1}^{l} (1 - g_j)
    auto gate = [&](int j) { return gates[j - 2]; };  // j in 2..L
    for (int l = 1; l <= L; ++l) {
        double carry = 1.0;  // prod_{j=i+2}^{l} (1 - g_j), built downward from i=l-1
        for (int i = l - 1; i >= 0; --i) {
            if (i >= 1) {
                M.at(l - 1, i) = gate(i + 1) * carry;
                carry *= 1.0 - gate(i + 1);
            } else {
                M.at(l - 1, 0) = carry;  // embedding keeps the pure carry path
            }
        }
    }
    return M;
}

DepthMixMatrix mix_mhc(const MhcParams& p) {
    const int L = static_cast<int>(p.alphas.size());
    const int m = p.m;
    if (m < 1) throw std::invalid_argument("mix_mhc: m must be >= 1");
    if (static_cast<int>(p.betas.size()) != L ||
        static_cast<int>(p.As.size()) != L - 1) {
        throw std::invalid_argument("mix_mhc: need L alphas, L betas and L-1 transitions");
    }
    for (const Vec& a : p.alphas) {
        if (static_cast<int>(a.size()) != m) throw std::invalid_argument("mix_mhc: alpha dim");
    }
    for (const Vec& b : p.betas) {
        if (static_cast<int>(b.size()) != m) throw std::invalid_argument("mix_mhc: beta dim");
    }
    for (const auto& A : p.As) {
        if (static_cast<int>(A.size()) != m * m) {
            throw std::invalid_argument("mix_mhc: transition dim");
        }
    }
    if (p.require_doubly_stochastic) {
        for (const auto& A : p.As) {
            for (int r = 0; r < m; ++r) {
                double rs = 0.0, cs = 0.0;
                for (int c = 0; c < m; ++c) {
                    rs += A[static_cast<std::size_t>(r) * m + c];
                    cs += A[static_cast<std::size_t>(c) * m + r];
                }
                if (std::abs(rs - 1.0) > p.stochastic_tol ||
                    std::abs(cs - 1.0) > p.stochastic_tol) {
                    throw std::invalid_argument("mix_mhc: transition not doubly stochastic");
                }
            }
        }
    }

    auto matvec = [&](const std::vector<double>& A, const Vec& x) {
        Vec y(m, 0.0);
        for (int r = 0; r < m; ++r) {
            for (int c = 0; c < m; ++c) y[r] += A[static_cast<std::size_t>(r) * m + c] * x[c];
        }
        return y;
    };

    DepthMixMatrix M = make(L, "mhc");
    for (int l = 1; l <= L; ++l) {
        Vec u = p.alphas[l - 1];  // cumulative A_{i+2} ... A_l applied to alpha_l
        for (int i = l - 1; i >= 0; --i) {
            M.at(l - 1, i) = dot(p.betas[i], u);
            if (i >= 1) u = matvec(p.As[i - 1], u);  // prepend A_{i+1}
        }
    }
    return M;
}

DepthMixMatrix mix_attnres_full(std::span<const Vec> queries, std::span<const Vec> keys,
                                const RmsNorm& norm) {
    const int L = static_cast<int>(queries.size());
    if (static_cast<int>(keys.size()) != L) {
        throw std::invalid_argument("mix_attnres_full: need one key per row");
    }
    DepthMixMatrix M = make(L, "attnres-full");
    for (int l = 1; l <= L; ++l) {
        SourceSet set;
        set.entries.push_back({SourceTag::Embedding, 0, 0, keys[0]});
        for (int i = 1; i < l; ++i) {
            set.entries.push_back({SourceTag::LayerOutput, i, 0, keys[i]});
        }
        std::vector<double> row = attn_weights(queries[l - 1], set, norm);
        for (int i = 0; i < l; ++i) M.at(l - 1, i) = row[i];
    }
    return M;
}

DepthMixMatrix mix_attnres_block(int block_size, const ForwardTrace& trace) {
    const int L = static_cast<int>(trace.alphas.size());
    if (block_size < 1) throw std::invalid_argument("mix_attnres_block: bad block size");
    DepthMixMatrix M = make(L, "attnres-block");
    for (int l = 1; l <= L; ++l) {
        const auto& alpha = trace.alphas[l - 1];
        const auto& sources = trace.sources[l - 1];
        for (std::size_t s = 0; s < sources.size(); ++s) {
            const Source& src = sources[s];
            switch (src.tag) {
                case SourceTag::Embedding:
                    M.at(l - 1, 0) = alpha[s];
                    break;
                case SourceTag::Block: {
                    // members of block n: sub-layers (n-1)S+1 .. min(nS, L)
                    const int first = (src.index - 1) * block_size + 1;
                    const int last = std::min(src.index * block_size, L);
                    for (int c = first; c <= last; ++c) M.at(l - 1, c) = alpha[s];
                    break;
                }
                case SourceTag::Partial: {
                    const int first = (src.index - 1) * block_size + 1;
                    const int last = first + src.sub - 1;
                    for (int c = first; c <= last; ++c) M.at(l - 1, c) = alpha[s];
                    break;
                }
                case SourceTag::LayerOutput:
                    M.at(l - 1, src.index) = alpha[s];
                    break;
            }
        }
    }
    return M;
}

static int rank_of(const Eigen::MatrixXd& A, double tol) {
    if (A.rows() == 0 || A.cols() == 0) return 0;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double cut = tol * sv(0);
    int r = 0;
    for (int i = 0; i < sv.size(); ++i) {
        if (sv(i) > cut) ++r;
    }
    return r;
}

int semiseparable_rank(const DepthMixMatrix& M, double tol) {
    int best = 0;
    for (int t = 0; t + 1 < M.L; ++t) {
        Eigen::MatrixXd sub(M.L - t - 1, t + 1);
        for (int r = t + 1; r < M.L; ++r) {
            for (int c = 0; c <= t; ++c) sub(r - t - 1, c) = M.at(r, c);
        }
        best = std::max(best, rank_of(sub, tol));
    }
    return best;
}

int numerical_rank(const DepthMixMatrix& M, double tol) {
    Eigen::MatrixXd A(M.L, M.L);
    for (int r = 0; r < M.L; ++r) {
        for (int c = 0; c < M.L; ++c) A(r, c) = M.at(r, c);
    }
    return rank_of(A, tol);
}

}  // namespace attnres
