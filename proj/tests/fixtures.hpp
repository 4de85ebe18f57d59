#ifndef RHEM_TESTS_FIXTURES_HPP
#define RHEM_TESTS_FIXTURES_HPP

#include "rhem/censor.hpp"
#include "rhem/core.hpp"
#include "rhem/sim.hpp"

#include <algorithm>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

using namespace rhem;

inline Universe letters(std::size_t n)
{
    std::vector<Actor> actors;
    for (std::size_t i = 0; i < n; ++i) {
        Actor a;
        a.id = std::string(1, static_cast<char>('a' + i));
        a.gender = i % 2 ? Gender::male : Gender::female;
        a.age = 14.0 + static_cast<double>(i) * 0.5;
        a.class_id = "c1";
        actors.push_back(a);
    }
    return Universe(std::move(actors));
}

inline SenderSet ids(const Universe& u, std::initializer_list<const char*> names)
{
    std::vector<ActorIndex> out;
    for (const char* n : names) out.push_back(u.index_of(n));
    return make_sender_set(out);
}

// {a,b,e} -> f at 1, {c,d,f} -> e at 2, {a,b,c,e} -> f at 3
inline EventHistory three_events()
{
    EventHistory h;
    h.universe = letters(6);
    const Universe& u = h.universe;
    h.events.push_back({ids(u, {"a", "b", "e"}), u.index_of("f"), 1.0});
    h.events.push_back({ids(u, {"c", "d", "f"}), u.index_of("e"), 2.0});
    h.events.push_back({ids(u, {"a", "b", "c", "e"}), u.index_of("f"), 3.0});
    return h;
}

/// Up to `max_events` events on a coarse time grid, so ties occur.
inline EventHistory random_history(std::mt19937_64& rng, std::size_t actors, std::size_t max_events,
                                   std::size_t max_senders = 4)
{
    EventHistory h;
    h.universe = letters(actors);
    std::uniform_int_distribution<std::size_t> count(0, max_events);
    std::uniform_int_distribution<int> tick(0, 40);
    const std::size_t m = count(rng);
    std::vector<double> times;
    for (std::size_t i = 0; i < m; ++i) times.push_back(0.25 * tick(rng));
    std::sort(times.begin(), times.end());
    for (double t : times) {
        std::vector<ActorIndex> order(actors);
        for (std::size_t i = 0; i < actors; ++i) order[i] = static_cast<ActorIndex>(i);
        std::shuffle(order.begin(), order.end(), rng);
        std::uniform_int_distribution<std::size_t> size(1, std::min(max_senders, actors - 1));
        const std::size_t k = size(rng);
        h.events.push_back({make_sender_set({order.begin(), order.begin() + static_cast<long>(k)}), order[k], t});
    }
    return h;
}

/// A censored panel from a simulated history: 8 actors by default, exogenous
/// and endogenous covariates, unit waves.
inline CensoredPanel random_panel(std::uint64_t seed, int waves = 6, std::size_t actors = 8, int max_size = 3,
                                  double lambda0 = 5.0)
{
    auto rng = make_rng(seed, 0, 9);
    const Universe u = random_school_class(actors, rng);
    IntensityModel model;
    model.baseline = lambda0;
    model.linear_terms.push_back({{Statistic::girl_alter, Transform::identity}, 0.7});
    model.linear_terms.push_back({{Statistic::avg_age, Transform::identity}, -0.3});
    SimConfig config;
    config.horizon = waves;
    config.max_sender_size = max_size;
    config.seed = seed;
    const EventHistory h = simulate_gillespie(u, model, config);
    const RiskSet risk = enumerate_risk_set(u, max_size);
    return build_panel(h, WaveGrid::unit(waves), constant_risk_sets(risk, waves),
                       {{Statistic::girl_alter, Transform::identity},
                        {Statistic::avg_age, Transform::identity},
                        {Statistic::rd, Transform::log1p},
                        {Statistic::rep, Transform::log1p}});
}

} // namespace fixtures

#endif
