#ifndef RHEM_CENSOR_HPP
#define RHEM_CENSOR_HPP

#include "rhem/core.hpp"
#include "rhem/stats.hpp"

#include <Eigen/Dense>

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace rhem {

/// Survey times t_0 < t_1 < ... < t_K; wave k (1-based) is (t_{k-1}, t_k].
class WaveGrid {
public:
    explicit WaveGrid(std::vector<double> boundaries);

    /// Waves (0, 1], (1, 2], ..., (K-1, K].
    static WaveGrid unit(int waves);

    int waves() const { return static_cast<int>(boundaries_.size()) - 1; }
    double start(int k) const { return boundaries_[static_cast<std::size_t>(k - 1)]; }
    double end(int k) const { return boundaries_[static_cast<std::size_t>(k)]; }
    double length(int k) const { return end(k) - start(k); }
    double midpoint(int k) const { return 0.5 * (start(k) + end(k)); }
    const std::vector<double>& boundaries() const { return boundaries_; }

    /// Wave containing t, or 0 when t lies outside (t_0, t_K].
    int wave_of(double t) const;

private:
    std::vector<double> boundaries_;
};

enum class EvalStrategy { past, current, average };

std::string_view to_string(EvalStrategy s);
EvalStrategy parse_strategy(std::string_view text);

double covariate_at_strategy(double value_at_start, double value_at_end, EvalStrategy strategy);

/// counts[k-1](i) = number of events exactly matching candidate i of
/// risk_sets[k-1] with time in wave k.
struct WaveCounts {
    std::vector<Eigen::VectorXd> counts;
    /// events whose (S, r) is not at risk in their wave
    std::size_t unmatched = 0;
};

WaveCounts wave_counts(const EventHistory& history, const WaveGrid& grid,
                       const std::vector<RiskSet>& risk_sets);

Eigen::VectorXd right_censor(const Eigen::VectorXd& counts);

/*
 * One row per (wave, candidate), waves in order and candidates in risk-set
 * order. `count` keeps the uncensored increments when the panel was built
 * from a history; panels read back from CSV have no counts.
 */
struct CensoredPanel {
    std::vector<int> wave;
    std::vector<std::string> senders;
    std::vector<std::string> receiver;
    Eigen::VectorXd y;
    Eigen::VectorXd offset;
    Eigen::VectorXd count;
    std::vector<std::string> covariate_names;
    Eigen::MatrixXd covariates;
    /// categorical columns usable as random-intercept groupings
    std::map<std::string, std::vector<std::string>> factors;

    std::size_t rows() const { return wave.size(); }
    bool has_counts() const { return count.size() == static_cast<Eigen::Index>(rows()); }
    Eigen::Index covariate_index(const std::string& name) const;
    /// `receiver`, `senders`, `wave` or a stored factor.
    std::vector<std::string> grouping(const std::string& name) const;
};

struct PanelOptions {
    EvalStrategy strategy = EvalStrategy::average;
    StatisticsOptions statistics;
};

/// Covariates are evaluated just after t_{k-1} (events at t_{k-1} included)
/// and just after t_k, transformed, and combined per the strategy. Offsets
/// are log(t_k - t_{k-1}).
CensoredPanel build_panel(const EventHistory& history, const WaveGrid& grid,
                          const std::vector<RiskSet>& risk_sets,
                          const std::vector<StatisticSpec>& specs, const PanelOptions& options = {});

/// The same risk set for every wave.
std::vector<RiskSet> constant_risk_sets(const RiskSet& risk, int waves);

} // namespace rhem

#endif
