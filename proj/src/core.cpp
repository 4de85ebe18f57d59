#include "rhem/core.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>
#include <sstream>

namespace rhem {

Universe::Universe(std::vector<Actor> actors) : actors_(std::move(actors))
{
    std::sort(actors_.begin(), actors_.end(),
              [](const Actor& a, const Actor& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < actors_.size(); ++i) {
        const Actor& a = actors_[i];
        if (a.age && !(*a.age > 0.0))
            throw InvalidInput("actor '" + a.id + "' has non-positive age");
        if (!by_id_.emplace(a.id, static_cast<ActorIndex>(i)).second)
            throw InvalidInput("duplicate actor id '" + a.id + "'");
    }
}

std::optional<ActorIndex> Universe::find(const std::string& id) const
{
    auto it = by_id_.find(id);
    if (it == by_id_.end()) return std::nullopt;
    return it->second;
}

ActorIndex Universe::index_of(const std::string& id) const
{
    auto found = find(id);
    if (!found) throw InvalidInput("unknown actor id '" + id + "'");
    return *found;
}

std::vector<std::vector<ActorIndex>> Universe::class_partition() const
{
    bool all_classed = std::all_of(actors_.begin(), actors_.end(),
                                   [](const Actor& a) { return a.class_id.has_value(); });
    if (!all_classed) {
        std::vector<ActorIndex> everyone(actors_.size());
        for (std::size_t i = 0; i < everyone.size(); ++i) everyone[i] = static_cast<ActorIndex>(i);
        return {everyone};
    }
    std::map<std::string, std::vector<ActorIndex>> groups;
    for (std::size_t i = 0; i < actors_.size(); ++i)
        groups[*actors_[i].class_id].push_back(static_cast<ActorIndex>(i));
    std::vector<std::vector<ActorIndex>> out;
    for (auto& [_, members] : groups) out.push_back(std::move(members));
    return out;
}

SenderSet make_sender_set(std::vector<ActorIndex> ids)
{
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

RiskSet enumerate_risk_set(const Universe& universe, int max_sender_size, RiskScope scope,
                           int wave_index)
{
    if (universe.empty()) throw InvalidInput("risk set: empty universe");
    if (max_sender_size < 1) throw InvalidInput("risk set: max_sender_size must be >= 1");

    std::vector<std::vector<ActorIndex>> blocks;
    if (scope == RiskScope::by_class) {
        blocks = universe.class_partition();
    } else {
        blocks.emplace_back(universe.size());
        for (std::size_t i = 0; i < universe.size(); ++i) blocks[0][i] = static_cast<ActorIndex>(i);
    }

    RiskSet risk;
    risk.wave_index = wave_index;
    for (const auto& members : blocks) {
        const std::size_t n = members.size();
        const std::size_t max_size = std::min<std::size_t>(max_sender_size, n);
        SenderSet current;
        // depth-first subset generation in lexicographic order
        std::function<void(std::size_t)> extend = [&](std::size_t start) {
            for (std::size_t i = start; i < n; ++i) {
                current.push_back(members[i]);
                for (ActorIndex r : members) {
                    if (!std::binary_search(current.begin(), current.end(), r))
                        risk.candidates.push_back({current, r});
                }
                if (current.size() < max_size) extend(i + 1);
                current.pop_back();
            }
        };
        extend(0);
    }
    std::sort(risk.candidates.begin(), risk.candidates.end());
    return risk;
}

std::vector<HistoryViolation> validate_history(const EventHistory& history)
{
    using Kind = HistoryViolation::Kind;
    std::vector<HistoryViolation> out;
    const auto n = history.universe.size();
    double last_time = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < history.events.size(); ++k) {
        const Hyperevent& e = history.events[k];
        auto add = [&](Kind kind, std::string msg) {
            out.push_back({kind, k, "event " + std::to_string(k) + ": " + std::move(msg)});
        };
        if (e.senders.empty()) add(Kind::empty_senders, "sender set is empty");
        bool unknown = e.receiver >= n;
        for (ActorIndex s : e.senders) unknown = unknown || s >= n;
        if (unknown) add(Kind::unknown_actor, "actor index outside the universe");
        if (std::adjacent_find(e.senders.begin(), e.senders.end(),
                               std::greater_equal<ActorIndex>()) != e.senders.end())
            add(Kind::duplicate_sender, "sender set is not sorted and duplicate-free");
        if (std::find(e.senders.begin(), e.senders.end(), e.receiver) != e.senders.end())
            add(Kind::receiver_in_senders, "receiver is also a sender");
        if (!std::isfinite(e.time)) {
            add(Kind::non_finite_time, "time is not finite");
            continue;
        }
        if (e.time < 0.0) add(Kind::negative_time, "time is negative");
        if (e.time < last_time) add(Kind::decreasing_time, "time decreases");
        last_time = e.time;
    }
    return out;
}

void require_valid(const EventHistory& history)
{
    auto violations = validate_history(history);
    if (violations.empty()) return;
    std::ostringstream msg;
    msg << "invalid history:";
    for (const auto& v : violations) msg << "\n  " << v.message;
    throw InvalidInput(msg.str());
}

namespace {

using Adjacency = std::vector<SenderSet>;

SenderSet intersect(const SenderSet& a, const SenderSet& b)
{
    SenderSet out;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

SenderSet subtract(const SenderSet& a, const SenderSet& b)
{
    SenderSet out;
    std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
    return out;
}

// Bron-Kerbosch with Tomita pivoting.
void bron_kerbosch(const Adjacency& adj, SenderSet& clique, SenderSet candidates,
                   SenderSet excluded, std::vector<SenderSet>& out)
{
    if (candidates.empty()) {
        if (excluded.empty()) out.push_back(make_sender_set(clique));
        return;
    }
    ActorIndex pivot = candidates.front();
    std::size_t best = 0;
    for (const auto* pool : {&candidates, &excluded}) {
        for (ActorIndex u : *pool) {
            std::size_t hits = intersect(candidates, adj[u]).size();
            if (hits > best) {
                best = hits;
                pivot = u;
            }
        }
    }
    for (ActorIndex v : subtract(candidates, adj[pivot])) {
        clique.push_back(v);
        bron_kerbosch(adj, clique, intersect(candidates, adj[v]), intersect(excluded, adj[v]), out);
        clique.pop_back();
        candidates.erase(std::lower_bound(candidates.begin(), candidates.end(), v));
        excluded.insert(std::lower_bound(excluded.begin(), excluded.end(), v), v);
    }
}

} // namespace

std::vector<SenderSet> sender_groups_from_friendship(const Universe& universe,
                                                     const std::vector<Nomination>& friendship)
{
    const auto n = universe.size();
    std::set<std::pair<ActorIndex, ActorIndex>> close;
    for (const auto& row : friendship) {
        if (row.score < -2 || row.score > 2)
            throw InvalidInput("friendship score out of range for " + row.ego + " -> " + row.alter);
        if (row.score != 2) continue;
        ActorIndex ego = universe.index_of(row.ego);
        ActorIndex alter = universe.index_of(row.alter);
        if (ego != alter) close.emplace(ego, alter);
    }

    Adjacency adj(n);
    for (auto [a, b] : close) {
        if (a < b && close.count({b, a})) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
    }
    for (auto& row : adj) std::sort(row.begin(), row.end());

    SenderSet all(n);
    for (std::size_t i = 0; i < n; ++i) all[i] = static_cast<ActorIndex>(i);
    std::vector<SenderSet> groups;
    SenderSet clique;
    bron_kerbosch(adj, clique, all, {}, groups);
    std::sort(groups.begin(), groups.end());
    return groups;
}

IngestResult hyperevents_from_nominations(const Universe& universe,
                                          const std::vector<Nomination>& bad_talk,
                                          const std::vector<SenderSet>& groups, int wave,
                                          double event_time, GroupRule rule)
{
    IngestResult result;
    std::map<ActorIndex, SenderSet> nominators;
    for (std::size_t row = 0; row < bad_talk.size(); ++row) {
        const Nomination& nom = bad_talk[row];
        if (nom.wave != wave || nom.score <= 0) continue;
        auto ego = universe.find(nom.ego);
        auto alter = universe.find(nom.alter);
        if (!ego || !alter) {
            result.diagnostics.push_back({row, "unknown actor in nomination " + nom.ego + " -> " + nom.alter});
            continue;
        }
        if (*ego == *alter) {
            result.diagnostics.push_back({row, "self nomination by " + nom.ego + " rejected"});
            continue;
        }
        nominators[*alter].push_back(*ego);
    }

    for (auto& [target, who] : nominators) {
        who = make_sender_set(std::move(who));
        std::vector<SenderSet> found;
        for (const SenderSet& group : groups) {
            SenderSet shared = intersect(group, who);
            if (shared.empty()) continue;
            if (rule == GroupRule::whole_group && shared.size() != group.size()) continue;
            found.push_back(std::move(shared));
        }
        std::sort(found.begin(), found.end());
        found.erase(std::unique(found.begin(), found.end()), found.end());
        for (std::size_t i = 0; i < found.size(); ++i) {
            bool dominated = false;
            for (std::size_t j = 0; j < found.size() && !dominated; ++j) {
                dominated = i != j && found[j].size() > found[i].size() &&
                            std::includes(found[j].begin(), found[j].end(), found[i].begin(),
                                          found[i].end());
            }
            if (!dominated) result.events.push_back({found[i], target, event_time});
        }
    }
    return result;
}

std::string format_senders(const Universe& universe, const SenderSet& senders)
{
    std::string out;
    for (std::size_t i = 0; i < senders.size(); ++i) {
        if (i) out += ';';
        out += universe[senders[i]].id;
    }
    return out;
}

} // namespace rhem
