#ifndef RHEM_CORE_HPP
#define RHEM_CORE_HPP

#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace rhem {

class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class UnsupportedModel : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class DegenerateInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

using ActorIndex = std::uint32_t;

/// Sorted, duplicate-free list of actor indices.
using SenderSet = std::vector<ActorIndex>;

enum class Gender { female, male };

struct Actor {
    std::string id;
    std::optional<Gender> gender;
    std::optional<double> age;
    std::optional<std::string> class_id;
};

/*
 * Set of actors. Actors are stored sorted by id, so index order is id order
 * and lexicographic comparison of index vectors matches comparison of the
 * corresponding id vectors.
 */
class Universe {
public:
    Universe() = default;
    explicit Universe(std::vector<Actor> actors);

    std::size_t size() const { return actors_.size(); }
    bool empty() const { return actors_.empty(); }
    const Actor& operator[](ActorIndex i) const { return actors_[i]; }
    const std::vector<Actor>& actors() const { return actors_; }

    std::optional<ActorIndex> find(const std::string& id) const;
    ActorIndex index_of(const std::string& id) const;

    /// Actor indices grouped by class id; one group holding everybody when
    /// any actor lacks a class.
    std::vector<std::vector<ActorIndex>> class_partition() const;

private:
    std::vector<Actor> actors_;
    std::unordered_map<std::string, ActorIndex> by_id_;
};

SenderSet make_sender_set(std::vector<ActorIndex> ids);

struct Hyperevent {
    SenderSet senders;
    ActorIndex receiver = 0;
    double time = 0.0;
};

struct EventHistory {
    Universe universe;
    std::vector<Hyperevent> events;
};

struct Candidate {
    SenderSet senders;
    ActorIndex receiver = 0;

    friend bool operator==(const Candidate&, const Candidate&) = default;
    friend auto operator<=>(const Candidate&, const Candidate&) = default;
};

struct RiskSet {
    std::vector<Candidate> candidates;
    int wave_index = 0;
};

enum class RiskScope { universe, by_class };

/// All (S, r) with 1 <= |S| <= max_sender_size and r not in S, ordered
/// lexicographically by (senders, receiver). With RiskScope::by_class,
/// S and r must share a class.
RiskSet enumerate_risk_set(const Universe& universe, int max_sender_size,
                           RiskScope scope = RiskScope::universe, int wave_index = 0);

inline std::size_t binomial(std::size_t n, std::size_t k)
{
    if (k > n) return 0;
    std::size_t result = 1;
    for (std::size_t i = 1; i <= k; ++i) result = result * (n - k + i) / i;
    return result;
}

struct HistoryViolation {
    enum class Kind {
        empty_senders,
        duplicate_sender,
        receiver_in_senders,
        unknown_actor,
        negative_time,
        decreasing_time,
        non_finite_time
    };
    Kind kind;
    std::size_t event_index;
    std::string message;
};

std::vector<HistoryViolation> validate_history(const EventHistory& history);

/// Throws InvalidInput listing every violation.
void require_valid(const EventHistory& history);

// Survey ingestion --------------------------------------------------------

struct Nomination {
    int wave = 0;
    std::string ego;
    std::string alter;
    int score = 0;
};

/// Maximal cliques of the mutual close-friendship graph (score 2 in both
/// directions). Actors without mutual friends form singleton groups.
/// Output is sorted lexicographically.
std::vector<SenderSet> sender_groups_from_friendship(const Universe& universe,
                                                     const std::vector<Nomination>& friendship);

enum class GroupRule {
    /// one event per inclusion-maximal subset of a group whose members all
    /// nominated the target
    maximal_nominating_subgroup,
    /// one event per whole group all of whose members nominated the target
    whole_group
};

struct IngestDiagnostic {
    std::size_t row;
    std::string message;
};

struct IngestResult {
    std::vector<Hyperevent> events;
    std::vector<IngestDiagnostic> diagnostics;
};

/// Only rows of `wave` with score > 0 count as nominations. Events are
/// sorted by (receiver, senders) and stamped with `event_time`.
IngestResult hyperevents_from_nominations(const Universe& universe,
                                          const std::vector<Nomination>& bad_talk,
                                          const std::vector<SenderSet>& groups, int wave,
                                          double event_time,
                                          GroupRule rule = GroupRule::maximal_nominating_subgroup);

std::string format_senders(const Universe& universe, const SenderSet& senders);

} // namespace rhem

#endif
