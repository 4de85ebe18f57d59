#ifndef RHEM_STUDY_HPP
#define RHEM_STUDY_HPP

#include "rhem/censor.hpp"
#include "rhem/fit.hpp"
#include "rhem/sim.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace rhem {

/// Actors of one replicate: n students in one class, drawn from their own
/// stream so simulation draws do not depend on them.
Universe study_universe(std::uint64_t seed, std::uint64_t replicate, std::size_t actors = 8);

struct Study1Options {
    std::vector<double> lambda0s{0.25, 0.75};
    double beta1 = 0.9;
    int replicates = 100;
    std::uint64_t seed = 1;
    std::size_t actors = 8;
    int max_sender_size = 3;
    int waves = 6;
    int num_basis = 10;
    int threads = 1;
};

struct Study1Replicate {
    double lambda0 = 0.0;
    int replicate = 0;
    std::size_t events = 0;
    std::size_t positive_rows = 0;
    double censored_beta = 0.0;
    double complete_beta = 0.0;
    double age_edf = 0.0;
    bool decreasing = false;
    std::string error;
};

/// Censored panel the study fits for one history: girl_alter and avg_age over
/// unit waves, with the uncensored counts kept.
CensoredPanel study1_panel(const EventHistory& history, int waves, int max_sender_size);
ModelSpec study1_spec(Family family, int num_basis = 10);

/// Common grid [14, 18] restricted to the training range of avg_age.
Eigen::VectorXd study1_age_grid(const FitResult& fit, const CensoredPanel& panel);

/// Negative least-squares slope and f(last) < f(first) on the grid.
bool decreasing_trend(const SmoothCurve& curve);

Study1Replicate run_study1_replicate(const Study1Options& options, double lambda0, int replicate);

struct Study2Options {
    double lambda0 = 0.038;
    double beta = 0.8;
    double tau = 0.1;
    int replicates = 100;
    std::uint64_t seed = 1;
    std::size_t actors = 8;
    int max_sender_size = 3;
    int waves = 6;
    int threads = 1;
};

struct Study2Replicate {
    int replicate = 0;
    std::size_t events = 0;
    /// past, current, average
    double estimate[3] = {0.0, 0.0, 0.0};
    std::string error;
};

ModelSpec study2_spec();
Study2Replicate run_study2_replicate(const Study2Options& options, int replicate);

struct SummaryRow {
    std::string setting;
    std::string estimator;
    std::size_t n = 0;
    double median = 0.0;
    std::optional<double> q1, q3, iqr;
    /// study1 censored rows: replicates with a decreasing age curve
    std::optional<std::size_t> decreasing;
};

/// Median and quartiles (linear interpolation between order statistics);
/// non-finite values are dropped, quartiles need two values.
SummaryRow summarize(std::string setting, std::string estimator, std::vector<double> values);

struct Study1Result {
    std::vector<Study1Replicate> replicates;
    std::vector<SummaryRow> summary;
};

struct Study2Result {
    std::vector<Study2Replicate> replicates;
    std::vector<SummaryRow> summary;
};

Study1Result run_study1(const Study1Options& options);
Study2Result run_study2(const Study2Options& options);

void write_estimates(std::ostream& out, const Study1Result& result);
void write_estimates(std::ostream& out, const Study2Result& result);
void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows);

} // namespace rhem

#endif
