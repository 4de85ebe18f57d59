#include "rhem/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace rhem {

void CovariateVector::set(const StatisticSpec& spec, double value)
{
    if (!std::isfinite(value)) throw InvalidInput("covariate " + column_name(spec) + " is not finite");
    for (auto& [key, v] : entries_) {
        if (key == spec) {
            v = value;
            return;
        }
    }
    entries_.emplace_back(spec, value);
}

std::optional<double> CovariateVector::get(const StatisticSpec& spec) const
{
    for (const auto& [key, v] : entries_)
        if (key == spec) return v;
    return std::nullopt;
}

double CovariateVector::at(const StatisticSpec& spec) const
{
    auto v = get(spec);
    if (!v) throw InvalidInput("missing covariate " + column_name(spec));
    return *v;
}

std::vector<StatisticSpec> IntensityModel::covariates() const
{
    std::vector<StatisticSpec> out;
    auto add = [&](const StatisticSpec& s) {
        if (std::find(out.begin(), out.end(), s) == out.end()) out.push_back(s);
    };
    for (const auto& t : linear_terms) add(t.covariate);
    for (const auto& t : smooth_terms) add(t.covariate);
    return out;
}

bool IntensityModel::time_varying() const
{
    auto specs = covariates();
    return std::any_of(specs.begin(), specs.end(), [](const StatisticSpec& s) { return is_time_varying(s.name); });
}

bool IntensityModel::history_dependent() const
{
    auto specs = covariates();
    return std::any_of(specs.begin(), specs.end(), [](const StatisticSpec& s) { return is_endogenous(s.name); });
}

double intensity(const IntensityModel& model, const CovariateVector& covariates, double random_offset)
{
    if (!(model.baseline > 0.0)) throw InvalidInput("intensity: baseline must be positive");
    double eta = random_offset;
    for (const auto& term : model.linear_terms) eta += term.coefficient * covariates.at(term.covariate);
    for (const auto& term : model.smooth_terms) {
        const double f = term.shape(covariates.at(term.covariate));
        if (!std::isfinite(f)) throw InvalidInput("intensity: smooth shape is not finite");
        eta += f;
    }
    return model.baseline * std::exp(eta);
}

std::mt19937_64 make_rng(std::uint64_t seed, std::uint64_t replicate, std::uint32_t stream)
{
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(replicate), static_cast<std::uint32_t>(replicate >> 32),
                      stream, 0x52u, 0x48u, 0x45u, 0x4du};
    return std::mt19937_64(seq);
}

namespace {

class RateTable {
public:
    RateTable(const IntensityModel& model, const RiskSet& risk, const EventHistory& history)
        : model_(model),
          risk_(risk),
          specs_(model.covariates()),
          engine_(history),
          rates_(risk.candidates.size()),
          cumulative_(risk.candidates.size())
    {
        offsets_.resize(risk.candidates.size(), 0.0);
        if (!model.class_offsets.empty()) {
            for (std::size_t i = 0; i < risk.candidates.size(); ++i) {
                const auto& cls = history.universe[risk.candidates[i].receiver].class_id;
                if (!cls) continue;
                auto it = model.class_offsets.find(*cls);
                if (it != model.class_offsets.end()) offsets_[i] = it->second;
            }
        }
    }

    void refresh(const EvalPoint& point)
    {
        engine_.advance_to(point);
        double total = 0.0;
        for (std::size_t i = 0; i < rates_.size(); ++i) {
            CovariateVector x;
            for (const auto& spec : specs_) x.set(spec, engine_.value(spec, risk_.candidates[i]));
            rates_[i] = intensity(model_, x, offsets_[i]);
            total += rates_[i];
            cumulative_[i] = total;
        }
    }

    double total() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }
    double rate(std::size_t i) const { return rates_[i]; }
    std::size_t size() const { return rates_.size(); }

    std::size_t select(double u) const
    {
        const double target = u * total();
        auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
        if (it == cumulative_.end()) --it;
        return static_cast<std::size_t>(it - cumulative_.begin());
    }

private:
    const IntensityModel& model_;
    const RiskSet& risk_;
    std::vector<StatisticSpec> specs_;
    StatisticsEngine engine_;
    std::vector<double> rates_;
    std::vector<double> cumulative_;
    std::vector<double> offsets_;
};

void check_config(const SimConfig& config)
{
    if (!(config.horizon > 0.0)) throw InvalidInput("simulation horizon must be positive");
    if (config.max_sender_size < 1) throw InvalidInput("max_sender_size must be >= 1");
}

} // namespace

EventHistory simulate_gillespie(const Universe& universe, const IntensityModel& model,
                                const SimConfig& config)
{
    check_config(config);
    for (const auto& spec : model.covariates()) {
        if (spec.name == Statistic::time)
            throw UnsupportedModel("Gillespie simulation needs rates that are constant between events; "
                                   "use tau-leaping for covariate '" + column_name(spec) + "'");
    }
    const RiskSet risk = enumerate_risk_set(universe, config.max_sender_size, config.scope);
    EventHistory out{universe, {}};
    RateTable rates(model, risk, out);
    rates.refresh({0.0, true});

    auto rng = make_rng(config.seed, config.replicate);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool endogenous = model.history_dependent();
    double t = 0.0;
    while (true) {
        const double total = rates.total();
        if (!(total > 0.0)) break;
        std::exponential_distribution<double> wait(total);
        t += wait(rng);
        if (t > config.horizon) break;
        const Candidate& c = risk.candidates[rates.select(unit(rng))];
        out.events.push_back({c.senders, c.receiver, t});
        if (endogenous) rates.refresh({t, true});
    }
    return out;
}

EventHistory simulate_tau_leap(const Universe& universe, const IntensityModel& model,
                               const SimConfig& config)
{
    check_config(config);
    if (!config.tau || !(*config.tau > 0.0)) throw InvalidInput("tau-leap requires tau > 0");
    const double tau = *config.tau;
    if (tau > config.horizon) throw InvalidInput("tau must not exceed the horizon");

    const RiskSet risk = enumerate_risk_set(universe, config.max_sender_size, config.scope);
    EventHistory out{universe, {}};
    RateTable rates(model, risk, out);
    auto rng = make_rng(config.seed, config.replicate);

    const bool frozen = !model.time_varying();
    const auto leaps = static_cast<std::size_t>(std::ceil(config.horizon / tau - 1e-12));
    std::vector<Hyperevent> fresh;
    for (std::size_t step = 0; step < leaps; ++step) {
        const double start = static_cast<double>(step) * tau;
        const double end = std::min(config.horizon, start + tau);
        if (step == 0 || !frozen) rates.refresh({start, false});
        fresh.clear();
        std::uniform_real_distribution<double> when(start, end);
        for (std::size_t i = 0; i < rates.size(); ++i) {
            std::poisson_distribution<long> count(rates.rate(i) * (end - start));
            const long n = count(rng);
            const Candidate& c = risk.candidates[i];
            for (long j = 0; j < n; ++j) fresh.push_back({c.senders, c.receiver, when(rng)});
        }
        std::stable_sort(fresh.begin(), fresh.end(),
                         [](const Hyperevent& a, const Hyperevent& b) { return a.time < b.time; });
        out.events.insert(out.events.end(), fresh.begin(), fresh.end());
    }
    return out;
}

IntensityModel study1_model(double lambda0, double beta1)
{
    IntensityModel model;
    model.baseline = lambda0;
    model.linear_terms.push_back({{Statistic::girl_alter, Transform::identity}, beta1});
    model.smooth_terms.push_back({{Statistic::avg_age, Transform::identity},
                                  [](double age) { return 1.0 / (1.0 + std::exp(2.0 * (age - 16.0))); },
                                  "1/(1+exp(2*(avg_age-16)))"});
    return model;
}

IntensityModel study2_model(double lambda0, double beta)
{
    IntensityModel model;
    model.baseline = lambda0;
    model.linear_terms.push_back({{Statistic::time, Transform::log1p}, beta});
    return model;
}

Universe random_school_class(std::size_t n, std::mt19937_64& rng)
{
    std::vector<Gender> genders(n, Gender::male);
    for (std::size_t i = 0; i < n; i += 2) genders[i] = Gender::female;
    std::shuffle(genders.begin(), genders.end(), rng);
    std::uniform_real_distribution<double> age(14.0, 18.0);
    std::vector<Actor> actors;
    const int width = n < 10 ? 1 : n < 100 ? 2 : 3;
    for (std::size_t i = 0; i < n; ++i) {
        std::string id = std::to_string(i + 1);
        id.insert(0, static_cast<std::size_t>(width) - std::min<std::size_t>(id.size(), width), '0');
        actors.push_back({"s" + id, genders[i], age(rng), std::string("c1")});
    }
    return Universe(std::move(actors));
}

} // namespace rhem
