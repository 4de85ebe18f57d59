// Brute-force statistics straight from the defining sums. Every endogenous
// statistic is a rational number; it is accumulated exactly and converted
// with one division so results can be compared bit for bit.
#ifndef RHEM_TESTS_NAIVE_STATS_HPP
#define RHEM_TESTS_NAIVE_STATS_HPP

#include "rhem/core.hpp"
#include "rhem/stats.hpp"

#include <boost/rational.hpp>

#include <algorithm>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <vector>

namespace naive {

using Q = boost::rational<std::int64_t>;
using rhem::ActorIndex;
using rhem::EventHistory;

inline double to_double(const Q& q) { return static_cast<double>(q.numerator()) / static_cast<double>(q.denominator()); }

inline bool subset_of(const std::vector<ActorIndex>& a, const std::vector<ActorIndex>& b)
{
    std::set<ActorIndex> bs(b.begin(), b.end());
    for (ActorIndex x : a)
        if (!bs.count(x)) return false;
    return true;
}

inline bool same_set(const std::vector<ActorIndex>& a, const std::vector<ActorIndex>& b)
{
    return std::set<ActorIndex>(a.begin(), a.end()) == std::set<ActorIndex>(b.begin(), b.end());
}

inline bool member(const std::vector<ActorIndex>& a, ActorIndex x) { return std::find(a.begin(), a.end(), x) != a.end(); }

// #{i : t_i < t, S' within S_i, r_i = r}
inline std::int64_t hy_deg(const EventHistory& h, const std::vector<ActorIndex>& sub, ActorIndex r, double t)
{
    std::int64_t n = 0;
    for (const auto& e : h.events)
        if (e.time < t && e.receiver == r && subset_of(sub, e.senders)) ++n;
    return n;
}

inline std::int64_t hy_deg_exact(const EventHistory& h, const std::vector<ActorIndex>& sub, ActorIndex r, double t)
{
    std::int64_t n = 0;
    for (const auto& e : h.events)
        if (e.time < t && e.receiver == r && same_set(sub, e.senders)) ++n;
    return n;
}

inline std::int64_t choose(std::int64_t n, std::int64_t k)
{
    std::int64_t c = 1;
    for (std::int64_t i = 1; i <= k; ++i) c = c * (n - k + i) / i;
    return c;
}

struct Options {
    bool exclude_senders = false;
    bool exact_subsets = false;
};

inline double evaluate(const EventHistory& h, rhem::Statistic stat, const std::vector<ActorIndex>& S, ActorIndex r,
                       double t, Options opt = {})
{
    using rhem::Statistic;
    const auto size = static_cast<std::int64_t>(S.size());
    const auto n = static_cast<ActorIndex>(h.universe.size());

    auto triad = [&](auto summand) {
        Q total = 0;
        for (ActorIndex s : S)
            for (ActorIndex a = 0; a < n; ++a) {
                if (a == s || a == r) continue;
                if (opt.exclude_senders && member(S, a)) continue;
                total += summand(s, a);
            }
        return to_double(total / size);
    };

    switch (stat) {
    case Statistic::sd: {
        std::int64_t c = 0;
        for (const auto& e : h.events)
            if (e.time < t && subset_of(S, e.senders)) ++c;
        return to_double(Q(c, size));
    }
    case Statistic::rd: {
        std::int64_t c = 0;
        for (const auto& e : h.events)
            if (e.time < t && e.receiver == r) ++c;
        return static_cast<double>(c);
    }
    case Statistic::rep: {
        std::int64_t c = 0;
        for (const auto& e : h.events)
            if (e.time < t && e.receiver == r && same_set(e.senders, S)) ++c;
        return to_double(Q(c, size));
    }
    case Statistic::sub_rep: {
        Q total = 0;
        for (std::int64_t p = 1; p <= size; ++p) {
            std::int64_t sum = 0;
            for (std::uint32_t mask = 1; mask < (1u << size); ++mask) {
                if (__builtin_popcount(mask) != p) continue;
                std::vector<ActorIndex> sub;
                for (std::int64_t j = 0; j < size; ++j)
                    if (mask & (1u << j)) sub.push_back(S[static_cast<std::size_t>(j)]);
                sum += opt.exact_subsets ? hy_deg_exact(h, sub, r, t) : hy_deg(h, sub, r, t);
            }
            total += Q(sum, choose(size, p));
        }
        return to_double(total);
    }
    case Statistic::rec: {
        std::int64_t c = 0;
        for (const auto& e : h.events)
            if (e.time < t && member(e.senders, r) && member(S, e.receiver)) ++c;
        return to_double(Q(c, size));
    }
    case Statistic::tc:
        return triad([&](ActorIndex, ActorIndex a) { return std::min(hy_deg(h, S, a, t), hy_deg(h, {a}, r, t)); });
    case Statistic::cc:
        return triad([&](ActorIndex s, ActorIndex a) { return std::min(hy_deg(h, {r}, a, t), hy_deg(h, {a}, s, t)); });
    case Statistic::sb:
        return triad([&](ActorIndex s, ActorIndex a) { return std::min(hy_deg(h, {a}, s, t), hy_deg(h, {a}, r, t)); });
    case Statistic::rb:
        return triad([&](ActorIndex, ActorIndex a) { return std::min(hy_deg(h, S, a, t), hy_deg(h, {r}, a, t)); });
    case Statistic::girl_alter:
        return h.universe[r].gender.value() == rhem::Gender::female ? 1.0 : 0.0;
    case Statistic::girl_ego: {
        std::int64_t girls = 0;
        for (ActorIndex s : S)
            if (h.universe[s].gender.value() == rhem::Gender::female) ++girls;
        return to_double(Q(girls, size));
    }
    case Statistic::avg_age: {
        double sum = 0.0;
        for (ActorIndex s : S) sum += h.universe[s].age.value();
        sum += h.universe[r].age.value();
        return sum / static_cast<double>(size + 1);
    }
    case Statistic::time:
        return t;
    }
    throw std::logic_error("unhandled statistic");
}

} // namespace naive

#endif
