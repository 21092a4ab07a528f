#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "attnres/numerics.hpp"

using namespace attnres;

namespace {

// independent single-pass softmax average: probabilities first, then the
// weighted sum (a different arithmetic path than the stats-based kernel)
Vec naive_softmax_average(const std::vector<double>& logits, const std::vector<Vec>& values) {
    double m = logits[0];
    for (double l : logits) m = std::max(m, l);
    double z = 0.0;
    for (double l : logits) z += std::exp(l - m);
    Vec out(values[0].size(), 0.0);
    for (std::size_t j = 0; j < logits.size(); ++j) {
        const double p = std::exp(logits[j] - m) / z;
        for (std::size_t k = 0; k < out.size(); ++k) out[k] += p * values[j][k];
    }
    return out;
}

std::mt19937_64 rng_for(unsigned seed) { return std::mt19937_64(seed); }

double unit(std::mt19937_64& rng) { return (rng() >> 11) * 0x1.0p-53 * 2.0 - 1.0; }

}  // namespace

TEST_CASE("rmsnorm all-ones is a fixed point at eps=0") {
    Vec x(4, 1.0), gain(4, 1.0);
    Vec y = rmsnorm(x, gain, 0.0);
    for (double v : y) CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("rmsnorm keeps the zero vector at zero under the eps guard") {
    Vec x(5, 0.0), gain(5, 1.0);
    Vec y = rmsnorm(x, gain, 1e-6);
    for (double v : y) CHECK(v == 0.0);
}

TEST_CASE("rmsnorm is invariant to positive rescaling at eps=0") {
    auto rng = rng_for(42);
    Vec x(8), gain(8, 1.0);
    for (double& v : x) v = unit(rng);
    Vec base = rmsnorm(x, gain, 0.0);
    for (double c : {0.5, 3.0, 100.0}) {
        Vec scaled = rmsnorm(scale(x, c), gain, 0.0);
        for (std::size_t i = 0; i < x.size(); ++i) {
            CHECK(std::abs(scaled[i] - base[i]) < 1e-12);
        }
    }
}

TEST_CASE("rmsnorm output has unit rms for generic input") {
    auto rng = rng_for(7);
    Vec x(16), gain(16, 1.0);
    for (double& v : x) v = unit(rng);
    Vec y = rmsnorm(x, gain, 0.0);
    double ms = 0.0;
    for (double v : y) ms += v * v;
    CHECK(std::sqrt(ms / 16.0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rmsnorm rejects mismatched dimensions") {
    CHECK_THROWS_AS(rmsnorm(Vec(3, 1.0), Vec(4, 1.0), 1e-6), std::invalid_argument);
}

TEST_CASE("softmax of equal logits is uniform with m=0 lse=n") {
    auto s = softmax_with_stats(std::vector<double>{0.0, 0.0, 0.0});
    CHECK(s.m == 0.0);
    CHECK(s.lse == 3.0);
    for (double p : s.probs) CHECK(p == 1.0 / 3.0);
}

TEST_CASE("softmax of a singleton") {
    auto s = softmax_with_stats(std::vector<double>{5.0});
    CHECK(s.m == 5.0);
    CHECK(s.lse == 1.0);
    CHECK(s.probs[0] == 1.0);
}

TEST_CASE("softmax is shift invariant") {
    auto a = softmax_with_stats(std::vector<double>{1.0, 2.0, 3.0});
    auto b = softmax_with_stats(std::vector<double>{101.0, 102.0, 103.0});
    for (int i = 0; i < 3; ++i) CHECK(std::abs(a.probs[i] - b.probs[i]) < 1e-12);
}

TEST_CASE("softmax rejects empty and non-finite input") {
    CHECK_THROWS_AS(softmax_with_stats(std::vector<double>{}), std::invalid_argument);
    CHECK_THROWS_AS(softmax_with_stats(std::vector<double>{1.0, std::nan("")}),
                    std::invalid_argument);
}

TEST_CASE("softmax output is a probability vector on random logits") {
    auto rng = rng_for(11);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> logits(1 + static_cast<int>(rng() % 9));
        for (double& l : logits) l = 10.0 * unit(rng);
        auto s = softmax_with_stats(logits);
        double sum = 0.0;
        for (double p : s.probs) {
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
    }
}

TEST_CASE("online merge with the empty element is the identity") {
    auto rng = rng_for(3);
    std::vector<Vec> values(3, Vec(4));
    std::vector<Vec> keys(3, Vec(4));
    Vec q(4);
    for (auto& v : values)
        for (double& x : v) x = unit(rng);
    for (auto& k : keys)
        for (double& x : k) x = unit(rng);
    for (double& x : q) x = unit(rng);

    SoftmaxStats a = attn_with_stats(q, keys, values);
    SoftmaxStats merged = online_merge(a, SoftmaxStats::empty(4));
    Vec lhs = finalize(merged), rhs = finalize(a);
    for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(lhs[i] == rhs[i]);

    merged = online_merge(SoftmaxStats::empty(4), a);
    lhs = finalize(merged);
    for (std::size_t i = 0; i < lhs.size(); ++i) CHECK(lhs[i] == rhs[i]);
}

TEST_CASE("online merge over disjoint halves equals the single-pass softmax") {
    auto rng = rng_for(17);
    const int n = 8, d = 6;
    std::vector<double> logits(n);
    std::vector<Vec> values(n, Vec(d));
    for (double& l : logits) l = 5.0 * unit(rng);
    for (auto& v : values)
        for (double& x : v) x = unit(rng);

    // build per-half stats directly from the logits via unit-key trick:
    // q=[logit], keys=[[1]] will not reproduce multi-d, so assemble stats
    // from scratch the way the kernel defines them
    auto stats_for = [&](int lo, int hi) {
        SoftmaxStats s = SoftmaxStats::empty(d);
        double m = logits[lo];
        for (int j = lo; j < hi; ++j) m = std::max(m, logits[j]);
        s.m = m;
        s.out.assign(d, 0.0);
        s.lse = 0.0;
        for (int j = lo; j < hi; ++j) {
            const double w = std::exp(logits[j] - m);
            s.lse += w;
            for (int k = 0; k < d; ++k) s.out[k] += w * values[j][k];
        }
        return s;
    };

    SoftmaxStats g1 = stats_for(0, 3), g2 = stats_for(3, 8);
    Vec merged = finalize(online_merge(g1, g2));
    Vec oracle = naive_softmax_average(logits, values);
    for (int k = 0; k < d; ++k) CHECK(std::abs(merged[k] - oracle[k]) < 1e-12);

    // merge order must not matter
    Vec swapped = finalize(online_merge(g2, g1));
    for (int k = 0; k < d; ++k) CHECK(std::abs(swapped[k] - merged[k]) < 1e-12);
}

TEST_CASE("online merge exactness over random partitions") {
    auto rng = rng_for(23);
    const int d = 5;
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 2 + static_cast<int>(rng() % 9);
        std::vector<double> logits(n);
        std::vector<Vec> values(n, Vec(d));
        for (double& l : logits) l = 30.0 * unit(rng);
        for (auto& v : values)
            for (double& x : v) x = unit(rng);

        SoftmaxStats g1 = SoftmaxStats::empty(d), g2 = SoftmaxStats::empty(d);
        auto add_to = [&](SoftmaxStats& s, int j) {
            SoftmaxStats one;
            one.m = logits[j];
            one.lse = 1.0;
            one.out = values[j];
            s = online_merge(s, one);
        };
        for (int j = 0; j < n; ++j) add_to(rng() % 2 ? g1 : g2, j);
        if (g1.is_empty() || g2.is_empty()) continue;

        Vec merged = finalize(online_merge(g1, g2));
        Vec oracle = naive_softmax_average(logits, values);
        for (int k = 0; k < d; ++k) CHECK(std::abs(merged[k] - oracle[k]) < 1e-12);
    }
}

TEST_CASE("merged statistics stay consistent") {
    SoftmaxStats a, b;
    a.m = 1.0;
    a.lse = 2.0;
    a.out = {1.0, 0.0};
    b.m = 3.0;
    b.lse = 0.5;
    b.out = {0.0, 1.0};
    SoftmaxStats r = online_merge(a, b);
    CHECK(r.m == 3.0);
    CHECK(r.lse >= std::max(a.lse * std::exp(a.m - r.m), b.lse * std::exp(b.m - r.m)));
    CHECK(r.lse <= a.lse * std::exp(a.m - r.m) + b.lse * std::exp(b.m - r.m) + 1e-15);
}

TEST_CASE("finalize rejects empty stats") {
    CHECK_THROWS_AS(finalize(SoftmaxStats::empty(3)), std::runtime_error);
}
