#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>

#include "polyint/integrators.hpp"
#include "polyint/reference.hpp"

using namespace polyint;

namespace {

PolynomialSystem decay() { return PolynomialSystem(1, 1, {{0, -1.0, Monomial{{1}}}}); }

PolynomialSystem lorenz() { return lorenz63(10.0, 28.0, 8.0 / 3.0); }

}  // namespace

TEST_CASE("classical rk4 step matches the hand derivation") {
    const auto next =
        classical_rk_step(decay(), ButcherTableau::rk4(0.1), StateVector({1.0}), true);
    CHECK(next[0] == doctest::Approx(0.9048375).epsilon(1e-12));
    const auto naive =
        classical_rk_step(decay(), ButcherTableau::rk4(0.1), StateVector({1.0}), false);
    CHECK(naive[0] == doctest::Approx(0.9048375).epsilon(1e-12));
}

TEST_CASE("zero-weight tableau leaves the state unchanged") {
    ButcherTableau tab;
    tab.s = 2;
    tab.h = 0.5;
    tab.a = {{0.0, 0.0}, {0.5, 0.0}};
    tab.b = {0.0, 0.0};
    const StateVector x({1.25, -3.5, 0.0});
    const auto next = classical_rk_step(lorenz(), tab, x, false);
    CHECK(bit_equal(next, x));
    const auto matched = classical_rk_step(lorenz(), tab, x, true, WeightEncoding::Direct);
    CHECK(bit_equal(matched, x));
}

TEST_CASE("matched classical rk4 equals the neural circuit bitwise") {
    const auto sys = lorenz();
    const PolyNet net = compile(sys);
    RkCircuit rk = build_rk4(net, 0.01);
    const StateVector x0({1.0, 1.0, 1.0});

    SUBCASE("single step") {
        const Trajectory neural = integrate(rk, x0, 1);
        const auto classical = classical_rk_step(sys, ButcherTableau::rk4(0.01), x0, true);
        CHECK(bit_equal(neural.states[1], classical));
    }
    SUBCASE("trajectory") {
        const Trajectory neural = integrate(rk, x0, 500);
        const Trajectory classical =
            classical_rk_integrate(sys, ButcherTableau::rk4(0.01), x0, 500, true);
        REQUIRE(neural.size() == classical.size());
        for (std::size_t k = 0; k < neural.size(); ++k)
            REQUIRE(bit_equal(neural.states[k], classical.states[k]));
    }
}

TEST_CASE("matched classical abm2 equals the neural circuit bitwise") {
    const auto sys = lorenz();
    const PolyNet net = compile(sys);
    AbmCircuit abm = build_abm2(net, 0.01);
    const StateVector x0({1.0, 1.0, 1.0});
    const Trajectory neural = integrate(abm, x0, 1000, SeedPolicy::Rk4Bootstrap);
    const Trajectory classical = classical_abm2_integrate(sys, x0, 1000, 0.01, true, true);
    REQUIRE(neural.size() == classical.size());
    for (std::size_t k = 0; k < neural.size(); ++k)
        REQUIRE(bit_equal(neural.states[k], classical.states[k]));
}

TEST_CASE("classical abm2 hand values") {
    Abm2Cache cache;
    CHECK_THROWS_AS(
        classical_abm2_step(decay(), StateVector({1.0}), cache, 0.1, true),
        std::invalid_argument);
    cache.prev_deriv = {-1.0};  // f(x0) for x0 = 1
    cache.seeded = true;
    const auto [x2, next_cache] =
        classical_abm2_step(decay(), StateVector({0.9048374}), cache, 0.1, true);
    CHECK(x2[0] == doctest::Approx(0.8186399).epsilon(1e-7));
    CHECK(next_cache.prev_deriv[0] == -0.9048374);
    SUBCASE("zero system is the identity") {
        Abm2Cache zc{{0.0}, true};
        const auto [next, unused] = classical_abm2_step(
            PolynomialSystem(1, 1, {}), StateVector({4.25}), zc, 0.1, true);
        CHECK(bit_equal(next[0], 4.25));
    }
}

TEST_CASE("naive and matched agree closely at first and then diverge on lorenz") {
    const auto sys = lorenz();
    const auto tab = ButcherTableau::rk4(0.01);
    const StateVector x0({1.0, 1.0, 1.0});
    const Trajectory matched = classical_rk_integrate(sys, tab, x0, 100, true);
    const Trajectory naive = classical_rk_integrate(sys, tab, x0, 100, false);
    const auto early = divergence(matched, naive);
    for (double d : early.distances) CHECK(d <= 1e-13);

    const Trajectory matched_long = classical_rk_integrate(sys, tab, x0, 40000, true);
    const Trajectory naive_long = classical_rk_integrate(sys, tab, x0, 40000, false);
    const auto late = divergence(matched_long, naive_long);
    CHECK(*std::max_element(late.distances.begin(), late.distances.end()) >= 1.0);
}

TEST_CASE("divergence basics") {
    Trajectory a;
    a.times = {0.0, 0.1};
    a.states = {StateVector({1.0, 2.0, 2.0}), StateVector({0.0, 1.0, 0.0})};
    SUBCASE("identical trajectories give zeros") {
        const auto series = divergence(a, a);
        CHECK(series.distances == std::vector<double>{0.0, 0.0});
    }
    SUBCASE("constant offset (0.3, 0, 0.4) gives 0.5 everywhere") {
        Trajectory b = a;
        for (auto& s : b.states) {
            auto v = s.values();
            v[0] += 0.3;
            v[2] += 0.4;
            s = StateVector(v);
        }
        const auto series = divergence(a, b);
        for (double d : series.distances) CHECK(d == doctest::Approx(0.5).epsilon(1e-15));
    }
    SUBCASE("symmetry") {
        Trajectory b = a;
        auto v = b.states[1].values();
        v[1] -= 0.75;
        b.states[1] = StateVector(v);
        const auto ab = divergence(a, b);
        const auto ba = divergence(b, a);
        CHECK(ab.distances == ba.distances);
    }
    SUBCASE("grid mismatch is rejected") {
        Trajectory b = a;
        b.times[1] = 0.2;
        CHECK_THROWS_AS(divergence(a, b), std::invalid_argument);
        Trajectory c = a;
        c.times.pop_back();
        c.states.pop_back();
        CHECK_THROWS_AS(divergence(a, c), std::invalid_argument);
    }
}

TEST_CASE("richardson slopes recover the method orders") {
    const auto sys = decay();
    const std::vector<double> hs = {0.1, 0.05, 0.025};
    const double exact = std::exp(-1.0);

    std::vector<double> rk4_err, abm_err, euler_err;
    for (double h : hs) {
        const auto steps = static_cast<std::int64_t>(std::llround(1.0 / h));
        rk4_err.push_back(std::fabs(classical_rk_integrate(sys, ButcherTableau::rk4(h),
                                                           StateVector({1.0}), steps, true)
                                        .states.back()[0] -
                                    exact));
        abm_err.push_back(std::fabs(classical_abm2_integrate(sys, StateVector({1.0}), steps,
                                                             h, true, true)
                                        .states.back()[0] -
                                    exact));
        euler_err.push_back(std::fabs(classical_rk_integrate(sys, ButcherTableau::euler(h),
                                                             StateVector({1.0}), steps, true)
                                          .states.back()[0] -
                                      exact));
    }
    CHECK(fit_order(hs, rk4_err) == doctest::Approx(4.0).epsilon(0.05));
    CHECK(fit_order(hs, abm_err) == doctest::Approx(2.0).epsilon(0.05));
    CHECK(fit_order(hs, euler_err) == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("fit_order validates input") {
    const std::vector<double> hs = {0.1};
    const std::vector<double> errs = {1e-3};
    CHECK_THROWS_AS(fit_order(hs, errs), std::invalid_argument);
    const std::vector<double> hs2 = {0.1, 0.05};
    const std::vector<double> bad = {1e-3, 0.0};
    CHECK_THROWS_AS(fit_order(hs2, bad), std::invalid_argument);
}

TEST_CASE("perturbation experiment on a short lorenz horizon") {
    const auto sys = lorenz();
    const StateVector x0 = spin_up(sys, StateVector({1.0, 1.0, 1.0}), 1000, 0.01);
    const std::vector<double> deltas = {0.0, 1e-8};
    const auto result =
        perturbation_experiment(sys, MethodKind::Rk4, 0.01, 2000, x0, deltas, 0);
    REQUIRE(result.perturbed.size() == 2);

    SUBCASE("zero delta gives the all-zero series") {
        CHECK(result.realized_deltas[0] == 0.0);
        for (double d : result.perturbed[0].distances) CHECK(d == 0.0);
    }
    SUBCASE("nonzero delta grows on a chaotic attractor") {
        CHECK(result.realized_deltas[1] > 0.0);
        CHECK(result.perturbed[1].distances[0] == result.realized_deltas[1]);
        CHECK(*std::max_element(result.perturbed[1].distances.begin(),
                                result.perturbed[1].distances.end()) >
              1e3 * result.realized_deltas[1]);
    }
    SUBCASE("neural-vs-naive series starts at zero and stays finite") {
        CHECK(result.neural_vs_naive.distances[0] == 0.0);
        CHECK(result.neural_vs_naive.distances.size() == 2001);
    }
    SUBCASE("empty deltas are rejected") {
        CHECK_THROWS_AS(
            perturbation_experiment(sys, MethodKind::Rk4, 0.01, 10, x0, {}, 0),
            std::invalid_argument);
    }
}

TEST_CASE("divergence csv format") {
    DivergenceSeries series{{0.0, 0.01}, {0.0, 1.5e-9}};
    std::ostringstream out;
    write_csv(series, out);
    CHECK(out.str() == "t,distance\n0,0\n0.01,1.5e-09\n");
}

TEST_CASE("trajectory csv round-trips bitwise") {
    const auto sys = lorenz();
    const Trajectory traj = classical_rk_integrate(sys, ButcherTableau::rk4(0.01),
                                                   StateVector({1.0, 1.0, 1.0}), 50, true);
    std::ostringstream out;
    write_csv(traj, out);
    std::istringstream in(out.str());
    const Trajectory back = read_csv(in);
    REQUIRE(back.size() == traj.size());
    for (std::size_t k = 0; k < traj.size(); ++k) {
        REQUIRE(bit_equal(back.states[k], traj.states[k]));
        REQUIRE(bit_equal(back.times[k], traj.times[k]));
    }
    SUBCASE("header is pinned") {
        CHECK(out.str().rfind("step,t,x0,x1,x2\n", 0) == 0);
    }
}

TEST_CASE("spin_up runs the matched rk4") {
    const auto sys = lorenz();
    const auto x = spin_up(sys, StateVector({1.0, 1.0, 1.0}), 100, 0.01);
    const auto direct = classical_rk_integrate(sys, ButcherTableau::rk4(0.01),
                                               StateVector({1.0, 1.0, 1.0}), 100, true);
    CHECK(bit_equal(x, direct.states.back()));
}
