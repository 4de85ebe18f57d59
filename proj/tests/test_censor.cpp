#include "fixtures.hpp"

#include "rhem/censor.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace rhem;
using fixtures::ids;

namespace {

EventHistory two_actor(std::vector<double> times)
{
    EventHistory h;
    h.universe = fixtures::letters(2);
    for (double t : times) h.events.push_back({{0}, 1, t});
    return h;
}

} // namespace

TEST_CASE("wave grid")
{
    const WaveGrid g({0.0, 2.0, 8.0, 20.0, 32.0});
    CHECK(g.waves() == 4);
    CHECK(g.length(2) == 6.0);
    CHECK(g.midpoint(3) == 14.0);
    CHECK(g.wave_of(0.0) == 0);
    CHECK(g.wave_of(2.0) == 1);
    CHECK(g.wave_of(2.5) == 2);
    CHECK(g.wave_of(32.0) == 4);
    CHECK(g.wave_of(33.0) == 0);
    CHECK_THROWS_AS(WaveGrid({1.0}), InvalidInput);
    CHECK_THROWS_AS(WaveGrid({0.0, 1.0, 1.0}), InvalidInput);
}

TEST_CASE("wave counts and censoring")
{
    const EventHistory h = two_actor({0.5, 1.5, 1.6});
    const RiskSet risk = enumerate_risk_set(h.universe, 1);
    const auto counts = wave_counts(h, WaveGrid({0.0, 1.0, 2.0}), constant_risk_sets(risk, 2));
    CHECK(counts.counts[0](0) == 1.0);
    CHECK(counts.counts[1](0) == 2.0);
    CHECK(counts.counts[0](1) == 0.0);
    CHECK(right_censor(counts.counts[1])(0) == 1.0);

    const auto empty = wave_counts(two_actor({}), WaveGrid({0.0, 1.0, 2.0}), constant_risk_sets(risk, 2));
    CHECK(empty.counts[0].isZero());

    CHECK_THROWS_AS(wave_counts(two_actor({2.5}), WaveGrid({0.0, 1.0, 2.0}), constant_risk_sets(risk, 2)),
                    InvalidInput);
    CHECK_THROWS_AS(wave_counts(h, WaveGrid({0.0, 1.0, 2.0}), constant_risk_sets(risk, 1)), InvalidInput);

    Eigen::VectorXd c(3);
    c << 0, 1, 7;
    CHECK(right_censor(c) == Eigen::Vector3d(0, 1, 1));
    c(0) = -1;
    CHECK_THROWS_AS(right_censor(c), InvalidInput);
}

TEST_CASE("strategies")
{
    CHECK(covariate_at_strategy(2, 4, EvalStrategy::average) == 3);
    CHECK(covariate_at_strategy(2, 4, EvalStrategy::past) == 2);
    CHECK(covariate_at_strategy(2, 4, EvalStrategy::current) == 4);
    CHECK(parse_strategy("current") == EvalStrategy::current);
    CHECK_THROWS_AS(parse_strategy("middle"), InvalidInput);
}

TEST_CASE("panel layout and offsets")
{
    const EventHistory fig = fixtures::three_events();
    const RiskSet risk = enumerate_risk_set(fig.universe, 2);

    const CensoredPanel uneven =
        build_panel(fig, WaveGrid({0.0, 2.0, 8.0, 20.0, 32.0}), constant_risk_sets(risk, 4), {{Statistic::rd, Transform::identity}});
    CHECK(uneven.rows() == 4 * risk.candidates.size());
    const double expected[] = {std::log(2.0), std::log(6.0), std::log(12.0), std::log(12.0)};
    for (std::size_t i = 0; i < uneven.rows(); ++i)
        CHECK(uneven.offset(static_cast<Eigen::Index>(i)) == expected[uneven.wave[i] - 1]);

    const CensoredPanel unit = build_panel(fig, WaveGrid::unit(6), constant_risk_sets(risk, 6), {});
    CHECK(unit.rows() == 6 * risk.candidates.size());
    CHECK(unit.offset.isZero());
    CHECK(unit.factors.at("class").size() == unit.rows());
    CHECK(unit.wave.front() == 1);
    CHECK(unit.wave.back() == 6);

    // differing risk sets per wave
    std::vector<RiskSet> varying{risk, enumerate_risk_set(fig.universe, 1)};
    const CensoredPanel mixed = build_panel(fig, WaveGrid({0.0, 2.0, 4.0}), varying, {});
    CHECK(mixed.rows() == risk.candidates.size() + varying[1].candidates.size());
}

TEST_CASE("panel covariates follow the strategy")
{
    // one event at 0.5 (wave 1) and one at exactly 2 (wave 2's right edge)
    EventHistory h = two_actor({0.5, 2.0});
    const RiskSet risk = enumerate_risk_set(h.universe, 1);
    const auto sets = constant_risk_sets(risk, 2);
    const WaveGrid grid({0.0, 1.0, 2.0});
    const std::vector<StatisticSpec> rd{{Statistic::rd, Transform::identity}};
    auto value = [&](EvalStrategy s, int wave) {
        PanelOptions o;
        o.strategy = s;
        const auto p = build_panel(h, grid, sets, rd, o);
        for (std::size_t i = 0; i < p.rows(); ++i)
            if (p.wave[i] == wave && p.receiver[i] == "b") return p.covariates(static_cast<Eigen::Index>(i), 0);
        return -1.0;
    };
    CHECK(value(EvalStrategy::past, 1) == 0.0);
    CHECK(value(EvalStrategy::current, 1) == 1.0);
    CHECK(value(EvalStrategy::average, 1) == 0.5);
    CHECK(value(EvalStrategy::past, 2) == 1.0);
    CHECK(value(EvalStrategy::current, 2) == 2.0);

    // time covariate: wave start, end, midpoint; transform before averaging
    PanelOptions o;
    o.strategy = EvalStrategy::average;
    const auto p = build_panel(h, grid, sets, {{Statistic::time, Transform::identity}, {Statistic::time, Transform::log1p}}, o);
    CHECK(p.covariates(0, 0) == 0.5);
    CHECK(p.covariates(0, 1) == 0.5 * std::log1p(1.0));
}

TEST_CASE("panel is invariant to within-wave relocation of events")
{
    std::mt19937_64 rng(31);
    for (int trial = 0; trial < 10; ++trial) {
        EventHistory h = fixtures::random_history(rng, 5, 40);
        for (auto& e : h.events) e.time = std::min(std::max(e.time, 0.01), 10.0);
        const WaveGrid grid({0.0, 2.5, 5.0, 7.5, 10.0});
        const RiskSet risk = enumerate_risk_set(h.universe, 2);
        const auto sets = constant_risk_sets(risk, 4);
        const auto before = build_panel(h, grid, sets, {});

        EventHistory moved = h;
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        for (auto& e : moved.events) {
            const int k = grid.wave_of(e.time);
            e.time = grid.start(k) + (0.001 + 0.998 * unit(rng)) * grid.length(k);
        }
        std::stable_sort(moved.events.begin(), moved.events.end(),
                         [](const Hyperevent& a, const Hyperevent& b) { return a.time < b.time; });
        const auto after = build_panel(moved, grid, sets, {});
        CHECK(before.y == after.y);
        CHECK(before.count == after.count);
    }
}

TEST_CASE("past strategy ignores the current wave")
{
    std::mt19937_64 rng(37);
    for (int trial = 0; trial < 10; ++trial) {
        EventHistory h = fixtures::random_history(rng, 5, 40);
        for (auto& e : h.events) e.time = std::clamp(e.time, 0.01, 10.0);
        const WaveGrid grid({0.0, 2.5, 5.0, 7.5, 10.0});
        const RiskSet risk = enumerate_risk_set(h.universe, 2);
        const std::vector<StatisticSpec> specs{{Statistic::rd, Transform::identity}, {Statistic::sub_rep, Transform::identity},
                                               {Statistic::tc, Transform::identity}};
        PanelOptions o;
        o.strategy = EvalStrategy::past;
        const auto full = build_panel(h, grid, constant_risk_sets(risk, 4), specs, o);

        const int k = 3;
        EventHistory truncated = h;
        std::erase_if(truncated.events, [&](const Hyperevent& e) { return e.time > grid.start(k); });
        const auto cut = build_panel(truncated, grid, constant_risk_sets(risk, 4), specs, o);
        for (std::size_t i = 0; i < full.rows(); ++i)
            if (full.wave[i] == k)
                CHECK(full.covariates.row(static_cast<Eigen::Index>(i)) == cut.covariates.row(static_cast<Eigen::Index>(i)));
    }
}

TEST_CASE("panel grouping columns")
{
    const EventHistory fig = fixtures::three_events();
    const auto p = build_panel(fig, WaveGrid::unit(3), constant_risk_sets(enumerate_risk_set(fig.universe, 1), 3), {});
    CHECK(p.grouping("receiver").size() == p.rows());
    CHECK(p.grouping("wave").front() == "1");
    CHECK(p.grouping("class").front() == "c1");
    CHECK_THROWS_AS(p.grouping("school"), InvalidInput);
    CHECK_THROWS_AS(p.covariate_index("rd"), InvalidInput);
}
