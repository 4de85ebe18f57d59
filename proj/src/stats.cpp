#include "rhem/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace rhem {

namespace {

constexpr std::pair<Statistic, std::string_view> kNames[] = {
    {Statistic::sd, "sd"},
    {Statistic::rd, "rd"},
    {Statistic::rep, "rep"},
    {Statistic::sub_rep, "sub_rep"},
    {Statistic::rec, "rec"},
    {Statistic::tc, "tc"},
    {Statistic::cc, "cc"},
    {Statistic::sb, "sb"},
    {Statistic::rb, "rb"},
    {Statistic::girl_alter, "girl_alter"},
    {Statistic::girl_ego, "girl_ego"},
    {Statistic::avg_age, "avg_age"},
    {Statistic::time, "time"},
};

bool contains(const SenderSet& set, ActorIndex a)
{
    return std::binary_search(set.begin(), set.end(), a);
}

bool is_subset(const SenderSet& sub, const SenderSet& super)
{
    return std::includes(super.begin(), super.end(), sub.begin(), sub.end());
}

void require_nonempty(const SenderSet& senders)
{
    if (senders.empty()) throw InvalidInput("statistic requires a nonempty sender set");
}

// Calls visit(subset) for every nonempty subset of `set` of size <= max_size.
template <class Visit>
void for_each_subset(const SenderSet& set, std::size_t max_size, Visit&& visit)
{
    SenderSet current;
    auto recurse = [&](auto&& self, std::size_t start) -> void {
        for (std::size_t i = start; i < set.size(); ++i) {
            current.push_back(set[i]);
            visit(static_cast<const SenderSet&>(current));
            if (current.size() < max_size) self(self, i + 1);
            current.pop_back();
        }
    };
    recurse(recurse, 0);
}

// Subsets of exactly size p, in lexicographic order.
template <class Visit>
void for_each_subset_of_size(const SenderSet& set, std::size_t p, Visit&& visit)
{
    SenderSet current;
    auto recurse = [&](auto&& self, std::size_t start) -> void {
        if (current.size() == p) {
            visit(static_cast<const SenderSet&>(current));
            return;
        }
        for (std::size_t i = start; i + (p - current.size()) <= set.size(); ++i) {
            current.push_back(set[i]);
            self(self, i + 1);
            current.pop_back();
        }
    };
    recurse(recurse, 0);
}

// sum_p counts[p-1] / C(m, p) as one correctly rounded division.
double subset_repetition_value(const std::vector<double>& counts_by_size)
{
    const std::size_t m = counts_by_size.size();
    unsigned long long denom = 1;
    for (std::size_t p = 1; p <= m; ++p) denom = std::lcm(denom, static_cast<unsigned long long>(binomial(m, p)));
    long double numer = 0.0L;
    for (std::size_t p = 1; p <= m; ++p)
        numer += static_cast<long double>(counts_by_size[p - 1]) *
                 static_cast<long double>(denom / binomial(m, p));
    return static_cast<double>(numer) / static_cast<double>(denom);
}

template <class HyDeg>
double subset_repetition_with(const SenderSet& senders, ActorIndex receiver, HyDeg&& hy)
{
    std::vector<double> counts(senders.size(), 0.0);
    for (std::size_t p = 1; p <= senders.size(); ++p)
        for_each_subset_of_size(senders, p, [&](const SenderSet& sub) { counts[p - 1] += hy(sub, receiver); });
    return subset_repetition_value(counts);
}

bool intermediary_allowed(TriadScope scope, const SenderSet& senders, ActorIndex s, ActorIndex r,
                          ActorIndex a)
{
    if (a == s || a == r) return false;
    return scope == TriadScope::exclude_current_pair || !contains(senders, a);
}

template <class Summand>
double triad(const Universe& universe, const SenderSet& senders, ActorIndex r, TriadScope scope,
             Summand&& summand)
{
    require_nonempty(senders);
    double total = 0.0;
    for (ActorIndex s : senders) {
        for (ActorIndex a = 0; a < universe.size(); ++a) {
            if (intermediary_allowed(scope, senders, s, r, a)) total += summand(s, a);
        }
    }
    return total / static_cast<double>(senders.size());
}

template <class Pred>
double count_past(const EventHistory& history, double t, Pred&& pred)
{
    double n = 0.0;
    for (const Hyperevent& e : history.events) {
        if (e.time < t && pred(e)) n += 1.0;
    }
    return n;
}

} // namespace

bool is_endogenous(Statistic s)
{
    switch (s) {
    case Statistic::girl_alter:
    case Statistic::girl_ego:
    case Statistic::avg_age:
    case Statistic::time:
        return false;
    default:
        return true;
    }
}

bool is_time_varying(Statistic s) { return is_endogenous(s) || s == Statistic::time; }

std::string_view to_string(Statistic s)
{
    for (auto [stat, name] : kNames)
        if (stat == s) return name;
    return "?";
}

Statistic parse_statistic(std::string_view name)
{
    for (auto [stat, known] : kNames)
        if (known == name) return stat;
    throw InvalidInput("unknown statistic '" + std::string(name) + "'");
}

std::string column_name(const StatisticSpec& spec)
{
    std::string name(to_string(spec.name));
    if (spec.transform == Transform::log1p) name += "_log1p";
    return name;
}

StatisticSpec parse_spec(std::string_view text)
{
    StatisticSpec spec;
    for (std::string_view suffix : {std::string_view("_log1p"), std::string_view(":log1p")}) {
        if (text.size() > suffix.size() && text.substr(text.size() - suffix.size()) == suffix) {
            spec.transform = Transform::log1p;
            text.remove_suffix(suffix.size());
            break;
        }
    }
    spec.name = parse_statistic(text);
    return spec;
}

std::vector<StatisticSpec> parse_spec_list(std::string_view text)
{
    std::vector<StatisticSpec> out;
    while (!text.empty()) {
        auto comma = text.find(',');
        auto item = text.substr(0, comma);
        if (!item.empty()) out.push_back(parse_spec(item));
        if (comma == std::string_view::npos) break;
        text.remove_prefix(comma + 1);
    }
    return out;
}

double apply_transform(Transform transform, double value)
{
    if (transform == Transform::identity) return value;
    if (value < 0.0) throw InvalidInput("log1p transform applied to a negative statistic");
    return std::log1p(value);
}

// Single evaluations ------------------------------------------------------

double hyper_degree(const EventHistory& history, const SenderSet& sub, ActorIndex r, double t)
{
    return count_past(history, t,
                      [&](const Hyperevent& e) { return e.receiver == r && is_subset(sub, e.senders); });
}

double sender_degree(const EventHistory& history, const SenderSet& senders, double t)
{
    require_nonempty(senders);
    return count_past(history, t, [&](const Hyperevent& e) { return is_subset(senders, e.senders); }) /
           static_cast<double>(senders.size());
}

double receiver_degree(const EventHistory& history, ActorIndex r, double t)
{
    return count_past(history, t, [&](const Hyperevent& e) { return e.receiver == r; });
}

double repetition(const EventHistory& history, const SenderSet& senders, ActorIndex r, double t)
{
    require_nonempty(senders);
    return count_past(history, t,
                      [&](const Hyperevent& e) { return e.receiver == r && e.senders == senders; }) /
           static_cast<double>(senders.size());
}

double subset_repetition(const EventHistory& history, const SenderSet& senders, ActorIndex r,
                         double t, SubsetRule rule)
{
    require_nonempty(senders);
    return subset_repetition_with(senders, r, [&](const SenderSet& sub, ActorIndex recv) {
        if (rule == SubsetRule::containment) return hyper_degree(history, sub, recv, t);
        return count_past(history, t,
                          [&](const Hyperevent& e) { return e.receiver == recv && e.senders == sub; });
    });
}

double reciprocity(const EventHistory& history, const SenderSet& senders, ActorIndex r, double t)
{
    require_nonempty(senders);
    return count_past(history, t,
                      [&](const Hyperevent& e) {
                          return contains(e.senders, r) && contains(senders, e.receiver);
                      }) /
           static_cast<double>(senders.size());
}

double transitive_closure(const EventHistory& history, const SenderSet& senders, ActorIndex r,
                          double t, TriadScope scope)
{
    return triad(history.universe, senders, r, scope, [&](ActorIndex, ActorIndex a) {
        return std::min(hyper_degree(history, senders, a, t), hyper_degree(history, {a}, r, t));
    });
}

double cyclic_closure(const EventHistory& history, const SenderSet& senders, ActorIndex r, double t,
                      TriadScope scope)
{
    return triad(history.universe, senders, r, scope, [&](ActorIndex s, ActorIndex a) {
        return std::min(hyper_degree(history, {r}, a, t), hyper_degree(history, {a}, s, t));
    });
}

double sender_balance(const EventHistory& history, const SenderSet& senders, ActorIndex r, double t,
                      TriadScope scope)
{
    return triad(history.universe, senders, r, scope, [&](ActorIndex s, ActorIndex a) {
        return std::min(hyper_degree(history, {a}, s, t), hyper_degree(history, {a}, r, t));
    });
}

double receiver_balance(const EventHistory& history, const SenderSet& senders, ActorIndex r,
                        double t, TriadScope scope)
{
    return triad(history.universe, senders, r, scope, [&](ActorIndex, ActorIndex a) {
        return std::min(hyper_degree(history, senders, a, t), hyper_degree(history, {r}, a, t));
    });
}

double girl_alter(const Actor& receiver)
{
    if (!receiver.gender) throw InvalidInput("actor '" + receiver.id + "' has no gender");
    return *receiver.gender == Gender::female ? 1.0 : 0.0;
}

double girl_ego(const Universe& universe, const SenderSet& senders)
{
    require_nonempty(senders);
    double girls = 0.0;
    for (ActorIndex s : senders) girls += girl_alter(universe[s]);
    return girls / static_cast<double>(senders.size());
}

double avg_age(const Universe& universe, const SenderSet& senders, ActorIndex r)
{
    require_nonempty(senders);
    auto age_of = [&](ActorIndex a) {
        const Actor& actor = universe[a];
        if (!actor.age) throw InvalidInput("actor '" + actor.id + "' has no age");
        return *actor.age;
    };
    double total = 0.0;
    for (ActorIndex s : senders) total += age_of(s);
    total += age_of(r);
    return total / static_cast<double>(senders.size() + 1);
}

double evaluate_statistic(const EventHistory& history, Statistic stat, const Candidate& c, double t,
                          const StatisticsOptions& options)
{
    const auto& S = c.senders;
    const auto r = c.receiver;
    switch (stat) {
    case Statistic::sd: return sender_degree(history, S, t);
    case Statistic::rd: return receiver_degree(history, r, t);
    case Statistic::rep: return repetition(history, S, r, t);
    case Statistic::sub_rep: return subset_repetition(history, S, r, t, options.subset_rule);
    case Statistic::rec: return reciprocity(history, S, r, t);
    case Statistic::tc: return transitive_closure(history, S, r, t, options.triad_scope);
    case Statistic::cc: return cyclic_closure(history, S, r, t, options.triad_scope);
    case Statistic::sb: return sender_balance(history, S, r, t, options.triad_scope);
    case Statistic::rb: return receiver_balance(history, S, r, t, options.triad_scope);
    case Statistic::girl_alter: return girl_alter(history.universe[r]);
    case Statistic::girl_ego: return girl_ego(history.universe, S);
    case Statistic::avg_age: return avg_age(history.universe, S, r);
    case Statistic::time: return t;
    }
    throw InvalidInput("unknown statistic");
}

// Incremental engine ----------------------------------------------------

std::size_t StatisticsEngine::KeyHash::operator()(const SenderSet& key) const noexcept
{
    std::size_t h = 0xcbf29ce484222325ULL;
    for (ActorIndex a : key) {
        h ^= a + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    return h;
}

StatisticsEngine::StatisticsEngine(const EventHistory& history, StatisticsOptions options)
    : history_(&history),
      options_(options),
      receiver_counts_(history.universe.size(), 0.0),
      pair_counts_(Eigen::MatrixXd::Zero(history.universe.size(), history.universe.size()))
{
}

SenderSet StatisticsEngine::keyed(const SenderSet& senders, ActorIndex receiver)
{
    SenderSet key = senders;
    key.push_back(std::numeric_limits<ActorIndex>::max());
    key.push_back(receiver);
    return key;
}

void StatisticsEngine::absorb(const Hyperevent& e)
{
    if (!absorbed_.empty() && e.time < absorbed_.back().time)
        throw InvalidInput("statistics engine: events must be absorbed in time order");
    absorbed_.push_back(e);
    receiver_counts_[e.receiver] += 1.0;
    for (ActorIndex s : e.senders) pair_counts_(s, e.receiver) += 1.0;
    exact_counts_[keyed(e.senders, e.receiver)] += 1.0;
    for_each_subset(e.senders, options_.subset_cap, [&](const SenderSet& sub) {
        superset_counts_[sub] += 1.0;
        sub_receiver_counts_[keyed(sub, e.receiver)] += 1.0;
    });
}

void StatisticsEngine::advance_to(const EvalPoint& point)
{
    if (point.time < time_) throw InvalidInput("statistics engine: evaluation points must be sorted");
    time_ = point.time;
    const auto& events = history_->events;
    while (next_ < events.size()) {
        const double te = events[next_].time;
        if (te < point.time || (point.include_boundary && te == point.time)) {
            absorb(events[next_]);
            ++next_;
        } else {
            break;
        }
    }
}

double StatisticsEngine::hy_deg(const SenderSet& sub, ActorIndex receiver) const
{
    if (sub.size() == 1) return hy_deg_single(sub.front(), receiver);
    if (sub.size() <= options_.subset_cap) {
        auto it = sub_receiver_counts_.find(keyed(sub, receiver));
        return it == sub_receiver_counts_.end() ? 0.0 : it->second;
    }
    double n = 0.0;
    for (const Hyperevent& e : absorbed_)
        if (e.receiver == receiver && is_subset(sub, e.senders)) n += 1.0;
    return n;
}

double StatisticsEngine::hy_deg_single(ActorIndex sender, ActorIndex receiver) const
{
    return pair_counts_(sender, receiver);
}

double StatisticsEngine::exact_count(const SenderSet& senders, ActorIndex receiver) const
{
    auto it = exact_counts_.find(keyed(senders, receiver));
    return it == exact_counts_.end() ? 0.0 : it->second;
}

double StatisticsEngine::superset_count(const SenderSet& senders) const
{
    if (senders.size() <= options_.subset_cap) {
        auto it = superset_counts_.find(senders);
        return it == superset_counts_.end() ? 0.0 : it->second;
    }
    double n = 0.0;
    for (const Hyperevent& e : absorbed_)
        if (is_subset(senders, e.senders)) n += 1.0;
    return n;
}

template <class Summand>
double StatisticsEngine::triad_sum(const Candidate& c, Summand summand) const
{
    return triad(history_->universe, c.senders, c.receiver, options_.triad_scope, summand);
}

double StatisticsEngine::value(Statistic stat, const Candidate& c) const
{
    const auto& S = c.senders;
    const auto r = c.receiver;
    const double size = static_cast<double>(S.size());
    switch (stat) {
    case Statistic::sd:
        require_nonempty(S);
        return superset_count(S) / size;
    case Statistic::rd: return receiver_counts_[r];
    case Statistic::rep:
        require_nonempty(S);
        return exact_count(S, r) / size;
    case Statistic::sub_rep:
        require_nonempty(S);
        if (options_.subset_rule == SubsetRule::exact) {
            return subset_repetition_with(
                S, r, [&](const SenderSet& sub, ActorIndex recv) { return exact_count(sub, recv); });
        }
        return subset_repetition_with(
            S, r, [&](const SenderSet& sub, ActorIndex recv) { return hy_deg(sub, recv); });
    case Statistic::rec: {
        require_nonempty(S);
        // each past event has one receiver, so summing over s in S counts
        // events with r a sender and the receiver in S exactly once
        double n = 0.0;
        for (ActorIndex s : S) n += hy_deg_single(r, s);
        return n / size;
    }
    case Statistic::tc:
        return triad_sum(c, [&](ActorIndex, ActorIndex a) {
            return std::min(hy_deg(S, a), hy_deg_single(a, r));
        });
    case Statistic::cc:
        return triad_sum(c, [&](ActorIndex s, ActorIndex a) {
            return std::min(hy_deg_single(r, a), hy_deg_single(a, s));
        });
    case Statistic::sb:
        return triad_sum(c, [&](ActorIndex s, ActorIndex a) {
            return std::min(hy_deg_single(a, s), hy_deg_single(a, r));
        });
    case Statistic::rb:
        return triad_sum(c, [&](ActorIndex, ActorIndex a) {
            return std::min(hy_deg(S, a), hy_deg_single(r, a));
        });
    case Statistic::girl_alter: return girl_alter(history_->universe[r]);
    case Statistic::girl_ego: return girl_ego(history_->universe, S);
    case Statistic::avg_age: return avg_age(history_->universe, S, r);
    case Statistic::time: return time_;
    }
    throw InvalidInput("unknown statistic");
}

double StatisticsEngine::value(const StatisticSpec& spec, const Candidate& c) const
{
    return apply_transform(spec.transform, value(spec.name, c));
}

StatisticsTable compute_panel_statistics(const EventHistory& history, const RiskSet& risk_set,
                                         const std::vector<EvalPoint>& points,
                                         const std::vector<StatisticSpec>& specs,
                                         const StatisticsOptions& options)
{
    for (std::size_t k = 1; k < points.size(); ++k) {
        const bool ordered = points[k - 1].time < points[k].time ||
                             (points[k - 1].time == points[k].time &&
                              points[k - 1].include_boundary <= points[k].include_boundary);
        if (!ordered) throw InvalidInput("evaluation times must be sorted");
    }
    StatisticsTable table{specs, points, {}};
    StatisticsEngine engine(history, options);
    const auto rows = static_cast<Eigen::Index>(risk_set.candidates.size());
    const auto cols = static_cast<Eigen::Index>(specs.size());
    for (const EvalPoint& point : points) {
        engine.advance_to(point);
        Eigen::MatrixXd values(rows, cols);
        for (Eigen::Index i = 0; i < rows; ++i) {
            const Candidate& c = risk_set.candidates[static_cast<std::size_t>(i)];
            for (Eigen::Index j = 0; j < cols; ++j) values(i, j) = engine.value(specs[static_cast<std::size_t>(j)], c);
        }
        table.values.push_back(std::move(values));
    }
    return table;
}

StatisticsTable compute_panel_statistics(const EventHistory& history, const RiskSet& risk_set,
                                         const std::vector<double>& eval_times,
                                         const std::vector<StatisticSpec>& specs,
                                         const StatisticsOptions& options)
{
    std::vector<EvalPoint> points;
    points.reserve(eval_times.size());
    for (double t : eval_times) points.push_back({t, false});
    return compute_panel_statistics(history, risk_set, points, specs, options);
}

} // namespace rhem
