#include "attnres/numerics.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace attnres {

double dot(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) {
        throw std::invalid_argument("dot: dimension mismatch (" +
                                    std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()) + ")");
    }
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

bool all_finite(std::span<const double> v) {
    for (double x : v) {
        if (!std::isfinite(x)) return false;
    }
    return true;
}

Vec add(const Vec& a, const Vec& b) {
    if (a.size() != b.size()) throw std::invalid_argument("add: dimension mismatch");
    Vec r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + b[i];
    return r;
}

Vec scale(const Vec& v, double c) {
    Vec r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i] * c;
    return r;
}

RmsNorm RmsNorm::ones(std::size_t d, double eps) {
    RmsNorm n;
    n.gain.assign(d, 1.0);
    n.eps = eps;
    return n;
}

Vec RmsNorm::apply(const Vec& x) const { return rmsnorm(x, gain, eps); }

Vec rmsnorm(const Vec& x, const Vec& gain, double eps) {
    if (x.size() != gain.size()) {
        throw std::invalid_argument("rmsnorm: dimension mismatch");
    }
    if (x.empty()) throw std::invalid_argument("rmsnorm: empty input");
    if (eps < 0.0) throw std::invalid_argument("rmsnorm: negative eps");
    double ms = 0.0;
    for (double v : x) ms += v * v;
    ms /= static_cast<double>(x.size());
    const double inv = 1.0 / std::sqrt(ms + eps);
    Vec r(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) r[i] = gain[i] * x[i] * inv;
    return r;
}

SoftmaxScalars softmax_with_stats(std::span<const double> logits) {
    if (logits.empty()) throw std::invalid_argument("softmax: empty logits");
    if (!all_finite(logits)) throw std::invalid_argument("softmax: non-finite logit");
    SoftmaxScalars r;
    r.m = logits[0];
    for (double l : logits) r.m = std::max(r.m, l);
    r.probs.resize(logits.size());
    r.lse = 0.0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        r.probs[i] = std::exp(logits[i] - r.m);
        r.lse += r.probs[i];
    }
    for (double& p : r.probs) p /= r.lse;
    return r;
}

SoftmaxStats SoftmaxStats::empty(std::size_t d) {
    SoftmaxStats s;
    s.out.assign(d, 0.0);
    s.m = -std::numeric_limits<double>::infinity();
    s.lse = 0.0;
    return s;
}

SoftmaxStats attn_with_stats(const Vec& q, std::span<const Vec> keys,
                             std::span<const Vec> values) {
    if (keys.size() != values.size()) {
        throw std::invalid_argument("attn_with_stats: keys/values size mismatch");
    }
    if (keys.empty()) throw std::invalid_argument("attn_with_stats: no sources");

    std::vector<double> logits(keys.size());
    for (std::size_t j = 0; j < keys.size(); ++j) logits[j] = dot(q, keys[j]);

    double m = logits[0];
    for (double l : logits) m = std::max(m, l);

    SoftmaxStats s;
    s.out.assign(q.size(), 0.0);
    s.m = m;
    s.lse = 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
        if (values[j].size() != q.size()) {
            throw std::invalid_argument("attn_with_stats: value dimension mismatch");
        }
        const double w = std::exp(logits[j] - m);
        s.lse += w;
        for (std::size_t i = 0; i < s.out.size(); ++i) s.out[i] += w * values[j][i];
    }
    return s;
}

SoftmaxStats online_merge(const SoftmaxStats& a, const SoftmaxStats& b) {
    if (a.out.size() != b.out.size()) {
        throw std::invalid_argument("online_merge: dimension mismatch");
    }
    if (a.is_empty()) return b;
    if (b.is_empty()) return a;

    SoftmaxStats r;
    r.m = std::max(a.m, b.m);
    const double ca = std::exp(a.m - r.m);
    const double cb = std::exp(b.m - r.m);
    r.lse = ca * a.lse + cb * b.lse;
    r.out.resize(a.out.size());
    for (std::size_t i = 0; i < r.out.size(); ++i) {
        r.out[i] = ca * a.out[i] + cb * b.out[i];
    }
    return r;
}

Vec finalize(const SoftmaxStats& s) {
    if (!(s.lse > 0.0)) throw std::runtime_error("finalize: empty softmax stats");
    Vec r(s.out.size());
    for (std::size_t i = 0; i < r.size(); ++i) r[i] = s.out[i] / s.lse;
    return r;
}

}  // namespace attnres
