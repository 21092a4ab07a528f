#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "attnres/costmodel.hpp"
#include "attnres/toystack.hpp"
#include "attnres/twophase.hpp"

using namespace attnres;

namespace {

std::vector<LayerFn> fns_of(const ToyStack& stack) {
    std::vector<LayerFn> fns;
    for (const ToyLayer& layer : stack.layers) {
        fns.push_back([&layer](const Vec& x) { return layer.apply(x); });
    }
    return fns;
}

}  // namespace

TEST_CASE("standard scheme costs three vectors per layer") {
    CostExpr e = io_cost(SchemeSpec::standard());
    CHECK(e.read.d_coeff == Rational(2));
    CHECK(e.write.d_coeff == Rational(1));
    CHECK(e.total().d_coeff == Rational(3));
    CHECK(e.total().constant == Rational(0));
    CHECK(e.total().eval(1) == Rational(3));
}

TEST_CASE("multi-stream scheme coefficient breakdown") {
    CostExpr e = io_cost(SchemeSpec::mhc(4));
    CHECK(e.total().d_coeff == Rational(34));
    CHECK(e.total().constant == Rational(48));
    CHECK(e.components.size() == 5);

    // symbolic total (8m+2)d + 2m^2 + 4m for any m
    for (int m = 1; m <= 6; ++m) {
        CostExpr em = io_cost(SchemeSpec::mhc(m));
        CHECK(em.total().d_coeff == Rational(8 * m + 2));
        CHECK(em.total().constant == Rational(2 * m * m + 4 * m));
    }
}

TEST_CASE("attention scheme costs at the reference configuration") {
    CostExpr full = io_cost(SchemeSpec::attnres_full(128, 8));
    CHECK(full.total().d_coeff == Rational(24));  // S + N = 16 + 8
    CHECK(full.read.d_coeff == Rational(22));     // (N-1) + (S-1)
    CHECK(full.write.d_coeff == Rational(2));

    CostExpr block = io_cost(SchemeSpec::attnres_block(128, 8));
    CHECK(block.total().d_coeff == Rational(11, 2));  // N/S + 5 = 5.5
    CHECK(block.read.d_coeff == Rational(1, 2) + Rational(3));
    CHECK(block.write.d_coeff == Rational(2));
}

TEST_CASE("non-integral block size is a hard error") {
    CHECK_THROWS_AS(io_cost(SchemeSpec::attnres_full(10, 3)), std::invalid_argument);
    CHECK_THROWS_AS(io_cost(SchemeSpec::attnres_block(8, 3)), std::invalid_argument);
}

TEST_CASE("series summation matches the boxed closed form") {
    for (auto [L, N] : {std::pair{128, 8}, {8, 2}, {8, 4}, {16, 4}, {12, 3}, {64, 8}}) {
        TwoPhaseIoReport r = full_twophase_io(L, N);
        const int S = L / N;
        CHECK(r.read_inter_total == Rational(static_cast<std::int64_t>(L) * (N - 1)));
        CHECK(r.write_inter_total == Rational(L));
        CHECK(r.read_intra_per_block == Rational(static_cast<std::int64_t>(S) * (S - 1)));
        CHECK(r.write_intra_per_block == Rational(S));
        CHECK(r.per_layer_read == Rational(S + N - 2));
        CHECK(r.per_layer_write == Rational(2));
        CHECK(r.per_layer_total == Rational(S + N));

        // cross-validation against the closed-form per-layer cost
        CostExpr e = io_cost(SchemeSpec::attnres_full(L, N));
        CHECK(e.total().d_coeff == r.per_layer_total);
    }
}

TEST_CASE("degenerate unit-group schedule has no intra reads") {
    TwoPhaseIoReport r = full_twophase_io(8, 8);  // S = 1
    CHECK(r.read_intra_per_block == Rational(0));
    CHECK(r.per_layer_total == Rational(1 + 8));
}

TEST_CASE("worked example at L=12 N=3") {
    TwoPhaseIoReport r = full_twophase_io(12, 3);
    CHECK(r.read_inter_total == Rational(24));  // 12 * 2
    CHECK(r.per_layer_read == Rational(5));     // S + N - 2 = 4 + 3 - 2
    CHECK(r.per_layer_write == Rational(2));
    CHECK(r.per_layer_total == Rational(7));
}

TEST_CASE("instrumented full schedule counts match the formula exactly") {
    for (auto [L, N] : {std::pair{8, 2}, {8, 4}, {16, 4}}) {
        const int S = L / N;
        ToyStack stack = make_random_stack(8, L, ResidualMode::Full, S, 1, true);
        Vec emb = random_vec(8, 5);
        IoCounter counter;
        TwoPhaseOptions opt;
        opt.counter = &counter;
        two_phase_full_schedule(fns_of(stack), emb, S, stack.attn, opt);

        const Rational expected = io_cost(SchemeSpec::attnres_full(L, N)).total().d_coeff *
                                  Rational(L);
        REQUIRE(expected.is_integer());
        CHECK(counter.total() == expected.num);
    }
}

TEST_CASE("instrumented block schedule counts match the formula exactly") {
    for (auto [L, N] : {std::pair{8, 2}, {8, 4}, {16, 4}}) {
        const int S = L / N;
        ToyStack stack = make_random_stack(8, L, ResidualMode::Block, S, 2, true);
        Vec emb = random_vec(8, 6);
        IoCounter counter;
        TwoPhaseOptions opt;
        opt.counter = &counter;
        two_phase_block_schedule(fns_of(stack), emb, S, stack.attn, opt);

        const Rational expected = io_cost(SchemeSpec::attnres_block(L, N)).total().d_coeff *
                                  Rational(L);
        REQUIRE(expected.is_integer());
        CHECK(counter.total() == expected.num);
    }
}

TEST_CASE("full-scheme per-layer total is minimized near balanced splits") {
    // fixed L: (S + N) over integral divisors is convex with minimum near
    // S = sqrt(L)
    const int L = 64;
    std::vector<std::pair<int, Rational>> totals;  // (N, S+N)
    for (int N = 1; N <= L; ++N) {
        if (L % N) continue;
        totals.emplace_back(N, io_cost(SchemeSpec::attnres_full(L, N)).total().d_coeff);
    }
    // minimum at N = 8 (S = 8 = sqrt(64))
    Rational best = totals[0].second;
    int best_n = totals[0].first;
    for (auto& [n, t] : totals) {
        if (t.to_double() < best.to_double()) {
            best = t;
            best_n = n;
        }
    }
    CHECK(best_n == 8);
    // convex over the divisor chain: decreasing then increasing
    bool increasing = false;
    for (std::size_t i = 1; i < totals.size(); ++i) {
        if (totals[i].second.to_double() > totals[i - 1].second.to_double()) {
            increasing = true;
        } else {
            CHECK(!increasing);  // never decrease after an increase
        }
    }
}

TEST_CASE("prefill memory at the reference configuration") {
    const double full = prefill_memory(8, 131072, 7168, 2, 1);
    CHECK(full == doctest::Approx(15.032e9).epsilon(0.002));
    CHECK(std::abs(full - 15e9) / 15e9 < 0.02);

    const double sharded = prefill_memory(8, 131072, 7168, 2, 8);
    CHECK(sharded == doctest::Approx(1.879e9).epsilon(0.002));
    CHECK(std::abs(sharded - 1.9e9) / 1.9e9 < 0.02);

    const double chunked = prefill_memory(8, 131072, 7168, 2, 8, 16384);
    CHECK(chunked == doctest::Approx(0.2349e9).epsilon(0.002));
    CHECK(chunked < 0.3e9);
}

TEST_CASE("prefill memory validates arguments") {
    CHECK_THROWS_AS(prefill_memory(0, 1, 1, 1, 1), std::invalid_argument);
    CHECK_THROWS_AS(prefill_memory(1, 1, 1, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(prefill_memory(1, 1, 1, 1, 1, 0), std::invalid_argument);
}

TEST_CASE("cost table emits the typical column") {
    const std::string csv = cost_table_csv(128, 8, 4, 1);
    CHECK(csv.find("standard,residual merge,2d,d,3d,3d,3") != std::string::npos);
    CHECK(csv.find("(8m+2)d+2m^2+4m,34d+48,82") != std::string::npos);
    CHECK(csv.find("(S+N)d,24d,24") != std::string::npos);
    CHECK(csv.find("(N/S+5)d,5.5d,5.5") != std::string::npos);
}
