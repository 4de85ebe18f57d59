#ifndef RHEM_STATS_HPP
#define RHEM_STATS_HPP

#include "rhem/core.hpp"

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace rhem {

enum class Statistic {
    sd,
    rd,
    rep,
    sub_rep,
    rec,
    tc,
    cc,
    sb,
    rb,
    girl_alter,
    girl_ego,
    avg_age,
    /// the evaluation time itself; with log1p this is x(t) = log(t + 1)
    time
};

enum class Transform { identity, log1p };

struct StatisticSpec {
    Statistic name = Statistic::rd;
    Transform transform = Transform::identity;

    friend bool operator==(const StatisticSpec&, const StatisticSpec&) = default;
};

bool is_endogenous(Statistic s);
bool is_time_varying(Statistic s);
std::string_view to_string(Statistic s);
Statistic parse_statistic(std::string_view name);

/// Column name: the statistic name, with `_log1p` appended when transformed.
std::string column_name(const StatisticSpec& spec);

/// Accepts `name` or `name_log1p` (and `name:log1p`).
StatisticSpec parse_spec(std::string_view text);
std::vector<StatisticSpec> parse_spec_list(std::string_view comma_separated);

double apply_transform(Transform transform, double value);

/// Which intermediaries the triadic statistics sum over.
enum class TriadScope {
    /// a ranges over universe \ {s, r}; a may belong to S
    exclude_current_pair,
    /// a ranges over universe \ (S u {r})
    exclude_senders
};

/// Which hyperdegree enters subset repetition.
enum class SubsetRule {
    /// hy_deg(S', r) counts events with S' a subset of S_i
    containment,
    /// counts events with S' == S_i
    exact
};

struct StatisticsOptions {
    TriadScope triad_scope = TriadScope::exclude_current_pair;
    SubsetRule subset_rule = SubsetRule::containment;
    /// Sub-sender-sets up to this size are indexed incrementally; larger
    /// queries fall back to scanning the history.
    std::size_t subset_cap = 6;
};

// Single evaluations against a history. Every endogenous statistic at time t
// uses only events with time < t.

double hyper_degree(const EventHistory& history, const SenderSet& sub_senders, ActorIndex receiver,
                    double t);
double sender_degree(const EventHistory& history, const SenderSet& senders, double t);
double receiver_degree(const EventHistory& history, ActorIndex receiver, double t);
double repetition(const EventHistory& history, const SenderSet& senders, ActorIndex receiver,
                  double t);
double subset_repetition(const EventHistory& history, const SenderSet& senders, ActorIndex receiver,
                         double t, SubsetRule rule = SubsetRule::containment);
double reciprocity(const EventHistory& history, const SenderSet& senders, ActorIndex receiver,
                   double t);
double transitive_closure(const EventHistory& history, const SenderSet& senders,
                          ActorIndex receiver, double t,
                          TriadScope scope = TriadScope::exclude_current_pair);
double cyclic_closure(const EventHistory& history, const SenderSet& senders, ActorIndex receiver,
                      double t, TriadScope scope = TriadScope::exclude_current_pair);
double sender_balance(const EventHistory& history, const SenderSet& senders, ActorIndex receiver,
                      double t, TriadScope scope = TriadScope::exclude_current_pair);
double receiver_balance(const EventHistory& history, const SenderSet& senders, ActorIndex receiver,
                        double t, TriadScope scope = TriadScope::exclude_current_pair);

double girl_alter(const Actor& receiver);
double girl_ego(const Universe& universe, const SenderSet& senders);
double avg_age(const Universe& universe, const SenderSet& senders, ActorIndex receiver);

/// One untransformed statistic for (S, r) at t.
double evaluate_statistic(const EventHistory& history, Statistic stat, const Candidate& candidate,
                          double t, const StatisticsOptions& options = {});

/// Evaluation instant. With `include_boundary`, events at exactly `time`
/// count as past (the instant just after `time`).
struct EvalPoint {
    double time = 0.0;
    bool include_boundary = false;
};

/*
 * Incremental statistics engine. Events are absorbed in time order into
 * counters keyed by sub-sender-set and receiver; statistics are then cheap
 * lookups. The engine never looks at events it has not absorbed.
 */
class StatisticsEngine {
public:
    /// `history` supplies the universe and the events advance_to() walks;
    /// it must outlive the engine.
    StatisticsEngine(const EventHistory& history, StatisticsOptions options = {});

    /// Absorbs every event strictly before `point` (or at it, when the
    /// boundary is included). Points must be nondecreasing.
    void advance_to(const EvalPoint& point);

    /// Absorbs one event directly, bypassing the history's event list; its
    /// time must not precede already absorbed events.
    void absorb(const Hyperevent& event);

    double value(Statistic stat, const Candidate& candidate) const;
    double value(const StatisticSpec& spec, const Candidate& candidate) const;

    double current_time() const { return time_; }
    std::size_t absorbed() const { return absorbed_.size(); }

private:
    struct KeyHash {
        std::size_t operator()(const SenderSet& key) const noexcept;
    };

    double hy_deg(const SenderSet& sub, ActorIndex receiver) const;
    double hy_deg_single(ActorIndex sender, ActorIndex receiver) const;
    double exact_count(const SenderSet& senders, ActorIndex receiver) const;
    double superset_count(const SenderSet& senders) const;
    template <class Summand>
    double triad_sum(const Candidate& c, Summand summand) const;

    static SenderSet keyed(const SenderSet& senders, ActorIndex receiver);

    const EventHistory* history_;
    StatisticsOptions options_;
    std::size_t next_ = 0;
    double time_ = 0.0;
    std::vector<Hyperevent> absorbed_;
    std::vector<double> receiver_counts_;
    Eigen::MatrixXd pair_counts_; // (sender, receiver) single-actor hyperdegrees
    std::unordered_map<SenderSet, double, KeyHash> sub_receiver_counts_;
    std::unordered_map<SenderSet, double, KeyHash> superset_counts_;
    std::unordered_map<SenderSet, double, KeyHash> exact_counts_;
};

/// values[k] holds one row per candidate and one column per spec, evaluated
/// at points[k].
struct StatisticsTable {
    std::vector<StatisticSpec> specs;
    std::vector<EvalPoint> points;
    std::vector<Eigen::MatrixXd> values;
};

StatisticsTable compute_panel_statistics(const EventHistory& history, const RiskSet& risk_set,
                                         const std::vector<EvalPoint>& points,
                                         const std::vector<StatisticSpec>& specs,
                                         const StatisticsOptions& options = {});

StatisticsTable compute_panel_statistics(const EventHistory& history, const RiskSet& risk_set,
                                         const std::vector<double>& eval_times,
                                         const std::vector<StatisticSpec>& specs,
                                         const StatisticsOptions& options = {});

} // namespace rhem

#endif
