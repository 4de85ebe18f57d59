#ifndef RHEM_SIM_HPP
#define RHEM_SIM_HPP

#include "rhem/core.hpp"
#include "rhem/stats.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace rhem {

/// Named covariate values for one candidate at one instant.
class CovariateVector {
public:
    void set(const StatisticSpec& spec, double value);
    std::optional<double> get(const StatisticSpec& spec) const;
    double at(const StatisticSpec& spec) const;
    std::size_t size() const { return entries_.size(); }

private:
    std::vector<std::pair<StatisticSpec, double>> entries_;
};

struct LinearTerm {
    StatisticSpec covariate;
    double coefficient = 0.0;
};

struct SmoothTerm {
    StatisticSpec covariate;
    std::function<double(double)> shape;
    /// textual description, for run metadata
    std::string label;
};

/// lambda(t) = baseline * exp(sum linear + sum smooth + class offset of r)
struct IntensityModel {
    double baseline = 1.0;
    std::vector<LinearTerm> linear_terms;
    std::vector<SmoothTerm> smooth_terms;
    /// random offsets keyed by the receiver's class id
    std::map<std::string, double> class_offsets;

    std::vector<StatisticSpec> covariates() const;
    bool time_varying() const;
    bool history_dependent() const;
};

/// Rate for one candidate. The at-risk indicator is the caller's business.
double intensity(const IntensityModel& model, const CovariateVector& covariates,
                 double random_offset = 0.0);

struct SimConfig {
    double horizon = 6.0;
    int max_sender_size = 3;
    std::uint64_t seed = 0;
    std::uint64_t replicate = 0;
    std::optional<double> tau;
    RiskScope scope = RiskScope::universe;
};

/// Engine seeded from (seed, replicate, stream) only, so a replicate is
/// identical whether run alone or inside a sweep. Simulation draws use
/// stream 0; other consumers (actor attributes) take their own stream.
std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t replicate, std::uint32_t stream = 0);

/// Exact simulation. Rates are recomputed after each accepted event when
/// the model depends on the history; deterministic-time covariates are
/// rejected with UnsupportedModel.
EventHistory simulate_gillespie(const Universe& universe, const IntensityModel& model,
                                const SimConfig& config);

/// Fixed-step tau-leaping: rates are frozen at each leap's left endpoint and
/// Poisson counts are spread uniformly over the leap.
EventHistory simulate_tau_leap(const Universe& universe, const IntensityModel& model,
                               const SimConfig& config);

// Study models ------------------------------------------------------------

/// lambda0 * exp(beta1 * girl_alter + 1 / (1 + exp(2 (avg_age - 16))))
IntensityModel study1_model(double lambda0, double beta1 = 0.9);

/// lambda0 * exp(beta * log(t + 1))
IntensityModel study2_model(double lambda0 = 0.038, double beta = 0.8);

/// `n` actors, half of them female (assigned at random), ages uniform on
/// [14, 18], all in class "c1".
Universe random_school_class(std::size_t n, std::mt19937_64& rng);

} // namespace rhem

#endif
