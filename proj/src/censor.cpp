#include "rhem/censor.hpp"

#include <algorithm>
#include <cmath>

namespace rhem {

WaveGrid::WaveGrid(std::vector<double> boundaries) : boundaries_(std::move(boundaries))
{
    if (boundaries_.size() < 2) throw InvalidInput("wave grid needs at least two boundaries");
    for (std::size_t k = 0; k < boundaries_.size(); ++k) {
        if (!std::isfinite(boundaries_[k])) throw InvalidInput("wave boundary is not finite");
        if (k > 0 && !(boundaries_[k] > boundaries_[k - 1]))
            throw InvalidInput("wave boundaries must be strictly increasing");
    }
}

WaveGrid WaveGrid::unit(int waves)
{
    std::vector<double> b(static_cast<std::size_t>(std::max(waves, 0)) + 1);
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = static_cast<double>(k);
    return WaveGrid(std::move(b));
}

int WaveGrid::wave_of(double t) const
{
    if (!(t > boundaries_.front()) || t > boundaries_.back()) return 0;
    auto it = std::lower_bound(boundaries_.begin(), boundaries_.end(), t);
    return static_cast<int>(it - boundaries_.begin());
}

std::string_view to_string(EvalStrategy s)
{
    switch (s) {
    case EvalStrategy::past: return "past";
    case EvalStrategy::current: return "current";
    case EvalStrategy::average: return "average";
    }
    return "?";
}

EvalStrategy parse_strategy(std::string_view text)
{
    if (text == "past") return EvalStrategy::past;
    if (text == "current") return EvalStrategy::current;
    if (text == "average") return EvalStrategy::average;
    throw InvalidInput("unknown strategy '" + std::string(text) + "'");
}

double covariate_at_strategy(double start, double end, EvalStrategy strategy)
{
    switch (strategy) {
    case EvalStrategy::past: return start;
    case EvalStrategy::current: return end;
    case EvalStrategy::average: return 0.5 * (start + end);
    }
    return end;
}

WaveCounts wave_counts(const EventHistory& history, const WaveGrid& grid,
                       const std::vector<RiskSet>& risk_sets)
{
    if (static_cast<int>(risk_sets.size()) != grid.waves())
        throw InvalidInput("one risk set per wave is required");
    std::vector<std::map<Candidate, Eigen::Index>> lookup(risk_sets.size());
    WaveCounts out;
    for (std::size_t k = 0; k < risk_sets.size(); ++k) {
        const auto& cands = risk_sets[k].candidates;
        for (std::size_t i = 0; i < cands.size(); ++i) lookup[k].emplace(cands[i], static_cast<Eigen::Index>(i));
        out.counts.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(cands.size())));
    }
    for (std::size_t i = 0; i < history.events.size(); ++i) {
        const Hyperevent& e = history.events[i];
        const int k = grid.wave_of(e.time);
        if (k == 0)
            throw InvalidInput("event " + std::to_string(i) + " at time " + std::to_string(e.time) +
                               " lies outside every wave");
        auto& index = lookup[static_cast<std::size_t>(k - 1)];
        auto it = index.find(Candidate{e.senders, e.receiver});
        if (it == index.end()) {
            ++out.unmatched;
            continue;
        }
        out.counts[static_cast<std::size_t>(k - 1)](it->second) += 1.0;
    }
    return out;
}

Eigen::VectorXd right_censor(const Eigen::VectorXd& counts)
{
    if ((counts.array() < 0.0).any()) throw InvalidInput("counts must be nonnegative");
    return (counts.array() > 0.0).cast<double>();
}

Eigen::Index CensoredPanel::covariate_index(const std::string& name) const
{
    auto it = std::find(covariate_names.begin(), covariate_names.end(), name);
    if (it == covariate_names.end()) throw InvalidInput("panel has no covariate '" + name + "'");
    return static_cast<Eigen::Index>(it - covariate_names.begin());
}

std::vector<std::string> CensoredPanel::grouping(const std::string& name) const
{
    if (name == "receiver") return receiver;
    if (name == "senders") return senders;
    if (name == "wave") {
        std::vector<std::string> out;
        for (int k : wave) out.push_back(std::to_string(k));
        return out;
    }
    auto it = factors.find(name);
    if (it == factors.end()) throw InvalidInput("panel has no grouping column '" + name + "'");
    return it->second;
}

std::vector<RiskSet> constant_risk_sets(const RiskSet& risk, int waves)
{
    std::vector<RiskSet> out;
    for (int k = 1; k <= waves; ++k) {
        out.push_back(risk);
        out.back().wave_index = k;
    }
    return out;
}

CensoredPanel build_panel(const EventHistory& history, const WaveGrid& grid,
                          const std::vector<RiskSet>& risk_sets,
                          const std::vector<StatisticSpec>& specs, const PanelOptions& options)
{
    const WaveCounts counts = wave_counts(history, grid, risk_sets);
    const Universe& universe = history.universe;
    const bool classed = !universe.empty() &&
                         std::all_of(universe.actors().begin(), universe.actors().end(),
                                     [](const Actor& a) { return a.class_id.has_value(); });

    std::size_t total = 0;
    for (const auto& r : risk_sets) total += r.candidates.size();

    CensoredPanel panel;
    panel.y.resize(static_cast<Eigen::Index>(total));
    panel.offset.resize(static_cast<Eigen::Index>(total));
    panel.count.resize(static_cast<Eigen::Index>(total));
    panel.covariates.resize(static_cast<Eigen::Index>(total), static_cast<Eigen::Index>(specs.size()));
    for (const auto& s : specs) panel.covariate_names.push_back(column_name(s));
    std::vector<std::string>* classes = classed ? &panel.factors["class"] : nullptr;

    StatisticsEngine engine(history, options.statistics);
    Eigen::Index row = 0;
    for (int k = 1; k <= grid.waves(); ++k) {
        const auto& cands = risk_sets[static_cast<std::size_t>(k - 1)].candidates;
        const auto n = static_cast<Eigen::Index>(cands.size());
        const auto cols = static_cast<Eigen::Index>(specs.size());
        Eigen::MatrixXd at_start(n, cols), at_end(n, cols);
        engine.advance_to({grid.start(k), true});
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                at_start(i, j) = engine.value(specs[static_cast<std::size_t>(j)], cands[static_cast<std::size_t>(i)]);
        engine.advance_to({grid.end(k), true});
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < cols; ++j)
                at_end(i, j) = engine.value(specs[static_cast<std::size_t>(j)], cands[static_cast<std::size_t>(i)]);

        const Eigen::VectorXd& wave_count = counts.counts[static_cast<std::size_t>(k - 1)];
        const double offset = std::log(grid.length(k));
        for (Eigen::Index i = 0; i < n; ++i, ++row) {
            const Candidate& c = cands[static_cast<std::size_t>(i)];
            panel.wave.push_back(k);
            panel.senders.push_back(format_senders(universe, c.senders));
            panel.receiver.push_back(universe[c.receiver].id);
            panel.count(row) = wave_count(i);
            panel.y(row) = wave_count(i) > 0.0 ? 1.0 : 0.0;
            panel.offset(row) = offset;
            for (Eigen::Index j = 0; j < cols; ++j)
                panel.covariates(row, j) = covariate_at_strategy(at_start(i, j), at_end(i, j), options.strategy);
            if (classes) classes->push_back(*universe[c.receiver].class_id);
        }
    }
    return panel;
}

} // namespace rhem
