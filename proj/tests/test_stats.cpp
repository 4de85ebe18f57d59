#include "fixtures.hpp"
#include "naive_stats.hpp"

#include "rhem/stats.hpp"

#include <doctest.h>

#include <random>

using namespace rhem;
using fixtures::three_events;
using fixtures::ids;

namespace {

EventHistory named(std::initializer_list<const char*> names)
{
    std::vector<Actor> actors;
    for (const char* n : names) actors.push_back({n, Gender::female, 15.0, std::string("c")});
    return {Universe(actors), {}};
}

void add(EventHistory& h, std::initializer_list<const char*> senders, const char* receiver, double t)
{
    h.events.push_back({ids(h.universe, senders), h.universe.index_of(receiver), t});
}

const Statistic kEndogenous[] = {Statistic::sd, Statistic::rd, Statistic::rep, Statistic::sub_rep, Statistic::rec,
                                 Statistic::tc, Statistic::cc, Statistic::sb, Statistic::rb};

} // namespace

TEST_CASE("hyperdegree and worked-example values")
{
    const EventHistory h = three_events();
    const Universe& u = h.universe;
    const ActorIndex e = u.index_of("e"), f = u.index_of("f");
    const double t0 = 1.0, t1 = 2.0, t2 = 3.0;

    CHECK(hyper_degree(EventHistory{u, {}}, ids(u, {"a"}), f, 5.0) == 0);
    CHECK(hyper_degree(h, ids(u, {"a", "b"}), f, t2) == 1);
    CHECK(hyper_degree(h, ids(u, {"a", "b"}), f, t0) == 0);

    CHECK(receiver_degree(h, f, t0) == 0);
    CHECK(receiver_degree(h, f, t2) == 1);
    CHECK(reciprocity(h, ids(u, {"c", "d", "f"}), e, t1) == 1.0 / 3.0);
    CHECK(reciprocity(h, ids(u, {"a", "b", "c", "e"}), f, t2) == 1.0 / 4.0);

    CHECK(sender_degree(h, ids(u, {"a", "b"}), std::nextafter(t2, 10.0)) == 1.0);
    CHECK(sender_degree(h, ids(u, {"a", "b", "e"}), t1) == 1.0 / 3.0);
    CHECK(repetition(h, ids(u, {"a", "b", "c", "e"}), f, t2) == 0.0);
    CHECK(repetition(h, ids(u, {"a", "b", "e"}), f, t2) == 1.0 / 3.0);

    CHECK(subset_repetition(h, ids(u, {"a", "b", "c", "e"}), f, t2) == 1.5);
    CHECK(subset_repetition(h, ids(u, {"a", "b", "c", "e"}), f, t2, SubsetRule::exact) == 0.25);
}

TEST_CASE("simple statistic examples")
{
    EventHistory h = named({"a", "b", "c"});
    add(h, {"a", "b"}, "c", 1.0);
    CHECK(repetition(h, ids(h.universe, {"a", "b"}), h.universe.index_of("c"), 2.0) == 0.5);
    EventHistory single = named({"a", "b"});
    add(single, {"a"}, "b", 1.0);
    CHECK(subset_repetition(single, ids(single.universe, {"a"}), 1, 2.0) == 1.0);
    CHECK(sender_degree(h, ids(h.universe, {"a", "b"}), 2.0) == 0.5);
    const EventHistory empty = named({"a", "b", "c"});
    for (Statistic s : kEndogenous) CHECK(evaluate_statistic(empty, s, {{0, 1}, 2}, 3.0) == 0.0);
}

TEST_CASE("triadic statistics")
{
    SUBCASE("transitive closure")
    {
        EventHistory h = named({"s1", "s2", "a", "x", "r"});
        add(h, {"s1", "s2"}, "a", 1.0);
        add(h, {"a", "x"}, "r", 2.0);
        const auto S = ids(h.universe, {"s1", "s2"});
        const auto r = h.universe.index_of("r");
        CHECK(transitive_closure(h, S, r, 3.0) == 1.0);
        CHECK(transitive_closure(h, S, r, 1.5) == 0.0);
    }
    SUBCASE("cyclic closure and direction")
    {
        EventHistory h = named({"s", "r", "y", "a", "z"});
        add(h, {"r", "y"}, "a", 1.0);
        add(h, {"a", "z"}, "s", 2.0);
        const auto s = ids(h.universe, {"s"});
        const auto r = h.universe.index_of("r");
        CHECK(cyclic_closure(h, s, r, 3.0) == 1.0);

        EventHistory reversed = named({"s", "r", "y", "a", "z"});
        add(reversed, {"a"}, "r", 1.0);
        add(reversed, {"a", "z"}, "s", 2.0);
        CHECK(cyclic_closure(reversed, s, r, 3.0) == 0.0);
    }
    SUBCASE("sender balance")
    {
        EventHistory h = named({"s", "r", "a"});
        add(h, {"a"}, "s", 1.0);
        add(h, {"a"}, "r", 2.0);
        const auto s = ids(h.universe, {"s"});
        CHECK(sender_balance(h, s, h.universe.index_of("r"), 3.0) == 1.0);
        add(h, {"a"}, "s", 2.5);
        CHECK(sender_balance(h, s, h.universe.index_of("r"), 3.0) == 1.0);
    }
    SUBCASE("receiver balance")
    {
        EventHistory h = named({"s1", "s2", "r", "w", "a"});
        add(h, {"s1", "s2"}, "a", 1.0);
        add(h, {"r", "w"}, "a", 2.0);
        const auto S = ids(h.universe, {"s1", "s2"});
        CHECK(receiver_balance(h, S, h.universe.index_of("r"), 3.0) == 1.0);
        EventHistory none = named({"s1", "s2", "r", "w", "a"});
        add(none, {"s1", "s2"}, "a", 1.0);
        CHECK(receiver_balance(none, S, none.universe.index_of("r"), 3.0) == 0.0);
    }
    SUBCASE("intermediaries inside the sender set")
    {
        // s2 relays to r: allowed by default, excluded with exclude_senders
        EventHistory h = named({"s1", "s2", "r"});
        add(h, {"s1"}, "s2", 1.0);
        add(h, {"s2"}, "r", 2.0);
        const auto S = ids(h.universe, {"s1"});
        const auto S2 = ids(h.universe, {"s1", "s2"});
        const auto r = h.universe.index_of("r");
        CHECK(transitive_closure(h, S, r, 3.0) == 1.0);
        CHECK(sender_balance(h, S2, r, 3.0, TriadScope::exclude_current_pair) ==
              naive::evaluate(h, Statistic::sb, S2, r, 3.0));
        CHECK(sender_balance(h, S2, r, 3.0, TriadScope::exclude_senders) ==
              naive::evaluate(h, Statistic::sb, S2, r, 3.0, {true, false}));
    }
    SUBCASE("reversal swaps transitive into cyclic pattern on a 3-actor case")
    {
        EventHistory h = named({"s", "a", "r"});
        add(h, {"s"}, "a", 1.0);
        add(h, {"a"}, "r", 2.0);
        const auto s = ids(h.universe, {"s"});
        const auto r = h.universe.index_of("r");
        CHECK(transitive_closure(h, s, r, 3.0) == 1.0);
        CHECK(cyclic_closure(h, s, r, 3.0) == 0.0);
        EventHistory rev = named({"s", "a", "r"});
        add(rev, {"a"}, "s", 1.0);
        add(rev, {"r"}, "a", 2.0);
        CHECK(transitive_closure(rev, s, r, 3.0) == 0.0);
        CHECK(cyclic_closure(rev, s, r, 3.0) == 1.0);
    }
}

TEST_CASE("exogenous statistics")
{
    std::vector<Actor> actors{{"a", Gender::female, 15.0, {}},
                              {"b", Gender::female, 16.0, {}},
                              {"c", Gender::female, 17.0, {}},
                              {"d", Gender::male, 17.0, {}}};
    const Universe u(actors);
    CHECK(girl_ego(u, {0, 1, 2}) == 1.0);
    CHECK(girl_ego(u, {0, 3}) == 0.5);
    CHECK(avg_age(u, {0, 1}, 2) == 16.0);
    CHECK(girl_alter(u[3]) == 0.0);
    CHECK(girl_alter(u[0]) == 1.0);

    const Universe bare({{"a", {}, {}, {}}, {"b", {}, {}, {}}});
    CHECK_THROWS_AS(girl_alter(bare[0]), InvalidInput);
    CHECK_THROWS_AS(avg_age(bare, {0}, 1), InvalidInput);
    CHECK_THROWS_AS(girl_ego(bare, {0}), InvalidInput);
}

TEST_CASE("spec parsing and transforms")
{
    CHECK(parse_spec("rd").name == Statistic::rd);
    CHECK(parse_spec("rep_log1p").transform == Transform::log1p);
    CHECK(parse_spec("sub_rep:log1p").name == Statistic::sub_rep);
    CHECK(column_name({Statistic::tc, Transform::log1p}) == "tc_log1p");
    CHECK_THROWS_AS(parse_spec("bogus"), InvalidInput);
    CHECK(parse_spec_list("sd,rb_log1p").size() == 2);
    CHECK(apply_transform(Transform::log1p, 0.0) == 0.0);
    CHECK(apply_transform(Transform::log1p, 1.5) == std::log1p(1.5));
    CHECK_THROWS_AS(apply_transform(Transform::log1p, -1.0), InvalidInput);
}

TEST_CASE("batch statistics on the three-event history")
{
    const EventHistory h = three_events();
    RiskSet risk;
    risk.candidates.push_back({ids(h.universe, {"a", "b", "c", "e"}), h.universe.index_of("f")});
    const auto table = compute_panel_statistics(h, risk, std::vector<double>{1.0, 3.0}, {{Statistic::rd, Transform::identity}});
    CHECK(table.values[0](0, 0) == 0.0);
    CHECK(table.values[1](0, 0) == 1.0);
    CHECK_THROWS_AS(compute_panel_statistics(h, risk, std::vector<double>{3.0, 1.0}, {{Statistic::rd, Transform::identity}}),
                    InvalidInput);
}

TEST_CASE("batch engine equals per-call evaluation")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 40; ++trial) {
        const EventHistory h = fixtures::random_history(rng, 8, 50);
        const RiskSet risk = enumerate_risk_set(h.universe, 3);
        std::vector<StatisticSpec> specs;
        for (Statistic s : kEndogenous) specs.push_back({s, Transform::identity});
        specs.push_back({Statistic::girl_ego, Transform::identity});
        specs.push_back({Statistic::avg_age, Transform::identity});
        specs.push_back({Statistic::rep, Transform::log1p});
        const std::vector<double> times{0.0, 2.5, 5.0, 10.5};
        const auto table = compute_panel_statistics(h, risk, times, specs);
        for (std::size_t k = 0; k < times.size(); ++k)
            for (std::size_t i = 0; i < risk.candidates.size(); i += 7)
                for (std::size_t j = 0; j < specs.size(); ++j) {
                    double expected = evaluate_statistic(h, specs[j].name, risk.candidates[i], times[k]);
                    expected = apply_transform(specs[j].transform, expected);
                    CHECK(table.values[k](static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) == expected);
                }
    }
}

TEST_CASE("engine equals the brute-force evaluator, including option variants and large sender sets")
{
    std::mt19937_64 rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        const EventHistory h = fixtures::random_history(rng, 9, 50, 8);
        for (bool exclude : {false, true})
            for (bool exact : {false, true})
                for (std::size_t cap : {std::size_t(2), std::size_t(6)}) {
                    StatisticsOptions opt;
                    opt.triad_scope = exclude ? TriadScope::exclude_senders : TriadScope::exclude_current_pair;
                    opt.subset_rule = exact ? SubsetRule::exact : SubsetRule::containment;
                    opt.subset_cap = cap;
                    StatisticsEngine engine(h, opt);
                    engine.advance_to({5.0, false});
                    for (int q = 0; q < 30; ++q) {
                        auto e = h.events.empty() ? Hyperevent{{0, 1}, 2, 0.0} : h.events[static_cast<std::size_t>(q) % h.events.size()];
                        const Candidate c{e.senders, e.receiver};
                        for (Statistic s : kEndogenous)
                            CHECK(engine.value(s, c) == naive::evaluate(h, s, c.senders, c.receiver, 5.0, {exclude, exact}));
                    }
                }
    }
}

TEST_CASE("strict past: an event at t does not change statistics at t")
{
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 20; ++trial) {
        EventHistory h = fixtures::random_history(rng, 6, 30);
        const double t = h.events.empty() ? 1.0 : h.events.back().time + 0.5;
        const RiskSet risk = enumerate_risk_set(h.universe, 2);
        std::vector<StatisticSpec> specs;
        for (Statistic s : kEndogenous) specs.push_back({s, Transform::identity});
        const auto before = compute_panel_statistics(h, risk, std::vector<double>{t}, specs);
        h.events.push_back({{0, 1}, 2, t});
        const auto after = compute_panel_statistics(h, risk, std::vector<double>{t}, specs);
        CHECK(before.values[0] == after.values[0]);
        // just after t the new event counts
        const auto later = compute_panel_statistics(h, risk, std::vector<EvalPoint>{{t, true}}, specs);
        CHECK(later.values[0] != after.values[0]);
    }
}

TEST_CASE("monotone statistics are nondecreasing in time")
{
    std::mt19937_64 rng(29);
    const Statistic monotone[] = {Statistic::rd, Statistic::sd, Statistic::rep, Statistic::sub_rep, Statistic::rec};
    for (int trial = 0; trial < 20; ++trial) {
        const EventHistory h = fixtures::random_history(rng, 6, 40);
        const RiskSet risk = enumerate_risk_set(h.universe, 2);
        std::vector<StatisticSpec> specs;
        for (Statistic s : monotone) specs.push_back({s, Transform::identity});
        std::vector<double> times;
        for (int k = 0; k <= 12; ++k) times.push_back(k);
        const auto table = compute_panel_statistics(h, risk, times, specs);
        for (std::size_t k = 1; k < times.size(); ++k) CHECK((table.values[k].array() >= table.values[k - 1].array()).all());
        for (const auto& v : table.values) CHECK((v.array() >= 0.0).all());
    }
}
