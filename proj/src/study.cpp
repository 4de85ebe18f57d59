#include "rhem/study.hpp"

#include "rhem/io.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

namespace rhem {

namespace {

constexpr std::uint32_t actor_stream = 1;
constexpr double nan = std::numeric_limits<double>::quiet_NaN();

// runs body(i) for i in [0, count) on up to `threads` workers
template <class Body>
void parallel_for(int count, int threads, Body body)
{
    const int workers = std::clamp(threads, 1, std::max(count, 1));
    if (workers == 1) {
        for (int i = 0; i < count; ++i) body(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (int i = next++; i < count; i = next++) body(i);
        });
    for (auto& t : pool) t.join();
}

std::vector<double> linspace(double lo, double hi, int n)
{
    std::vector<double> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = lo + (hi - lo) * i / (n - 1);
    return out;
}

} // namespace

Universe study_universe(std::uint64_t seed, std::uint64_t replicate, std::size_t actors)
{
    auto rng = make_rng(seed, replicate, actor_stream);
    return random_school_class(actors, rng);
}

CensoredPanel study1_panel(const EventHistory& history, int waves, int max_sender_size)
{
    const RiskSet risk = enumerate_risk_set(history.universe, max_sender_size);
    const std::vector<StatisticSpec> specs{{Statistic::girl_alter, Transform::identity},
                                           {Statistic::avg_age, Transform::identity}};
    return build_panel(history, WaveGrid::unit(waves), constant_risk_sets(risk, waves), specs);
}

ModelSpec study1_spec(Family family, int num_basis)
{
    ModelSpec spec;
    spec.family = family;
    spec.terms = {Term::linear("girl_alter"), Term::smooth("avg_age", num_basis, 3)};
    return spec;
}

Eigen::VectorXd study1_age_grid(const FitResult& fit, const CensoredPanel& panel)
{
    (void)fit;
    const Eigen::VectorXd age = panel.covariates.col(panel.covariate_index("avg_age"));
    const double lo = std::max(14.0, age.minCoeff());
    const double hi = std::min(18.0, age.maxCoeff());
    const auto points = linspace(lo, hi, 41);
    return Eigen::Map<const Eigen::VectorXd>(points.data(), static_cast<Eigen::Index>(points.size()));
}

bool decreasing_trend(const SmoothCurve& curve)
{
    const Eigen::Index n = curve.x.size();
    if (n < 2) return false;
    const Eigen::VectorXd dx = curve.x.array() - curve.x.mean();
    const double slope = dx.dot(curve.fit) / dx.squaredNorm();
    return slope < 0.0 && curve.fit(n - 1) < curve.fit(0);
}

Study1Replicate run_study1_replicate(const Study1Options& options, double lambda0, int replicate)
{
    Study1Replicate out;
    out.lambda0 = lambda0;
    out.replicate = replicate;
    out.censored_beta = out.complete_beta = out.age_edf = nan;
    try {
        const Universe universe = study_universe(options.seed, static_cast<std::uint64_t>(replicate), options.actors);
        SimConfig config;
        config.horizon = options.waves;
        config.max_sender_size = options.max_sender_size;
        config.seed = options.seed;
        config.replicate = static_cast<std::uint64_t>(replicate);
        const EventHistory history = simulate_gillespie(universe, study1_model(lambda0, options.beta1), config);
        out.events = history.events.size();
        const CensoredPanel panel = study1_panel(history, options.waves, options.max_sender_size);
        out.positive_rows = static_cast<std::size_t>(panel.y.sum());

        const FitResult censored = fit_model(panel, study1_spec(Family::binomial_cloglog, options.num_basis));
        out.censored_beta = censored.coefficient("girl_alter");
        for (const auto& t : censored.terms)
            if (t.kind == Term::Kind::smooth) out.age_edf = t.edf;
        out.decreasing = decreasing_trend(smooth_effect(censored, "s(avg_age)", study1_age_grid(censored, panel)));

        const FitResult complete = fit_model(panel, study1_spec(Family::poisson, options.num_basis));
        out.complete_beta = complete.coefficient("girl_alter");
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

ModelSpec study2_spec()
{
    ModelSpec spec;
    spec.terms = {Term::linear("time_log1p")};
    return spec;
}

Study2Replicate run_study2_replicate(const Study2Options& options, int replicate)
{
    Study2Replicate out;
    out.replicate = replicate;
    std::fill(std::begin(out.estimate), std::end(out.estimate), nan);
    try {
        const Universe universe = study_universe(options.seed, static_cast<std::uint64_t>(replicate), options.actors);
        SimConfig config;
        config.horizon = options.waves;
        config.max_sender_size = options.max_sender_size;
        config.seed = options.seed;
        config.replicate = static_cast<std::uint64_t>(replicate);
        config.tau = options.tau;
        const EventHistory history = simulate_tau_leap(universe, study2_model(options.lambda0, options.beta), config);
        out.events = history.events.size();
        const RiskSet risk = enumerate_risk_set(universe, options.max_sender_size);
        const auto risk_sets = constant_risk_sets(risk, options.waves);
        const EvalStrategy strategies[3] = {EvalStrategy::past, EvalStrategy::current, EvalStrategy::average};
        for (int s = 0; s < 3; ++s) {
            PanelOptions po;
            po.strategy = strategies[s];
            const CensoredPanel panel = build_panel(history, WaveGrid::unit(options.waves), risk_sets,
                                                    {{Statistic::time, Transform::log1p}}, po);
            out.estimate[s] = fit_model(panel, study2_spec()).coefficient("time_log1p");
        }
    } catch (const std::exception& e) {
        out.error = e.what();
    }
    return out;
}

SummaryRow summarize(std::string setting, std::string estimator, std::vector<double> values)
{
    values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
                 values.end());
    std::sort(values.begin(), values.end());
    SummaryRow row;
    row.setting = std::move(setting);
    row.estimator = std::move(estimator);
    row.n = values.size();
    auto quantile = [&](double p) {
        const double h = p * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(h));
        const auto hi = std::min(lo + 1, values.size() - 1);
        return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    if (values.empty()) {
        row.median = nan;
        return row;
    }
    row.median = quantile(0.5);
    if (values.size() >= 2) {
        row.q1 = quantile(0.25);
        row.q3 = quantile(0.75);
        row.iqr = *row.q3 - *row.q1;
    }
    return row;
}

Study1Result run_study1(const Study1Options& options)
{
    Study1Result result;
    const int reps = std::max(options.replicates, 0);
    const int settings = static_cast<int>(options.lambda0s.size());
    result.replicates.resize(static_cast<std::size_t>(reps * settings));
    parallel_for(reps * settings, options.threads, [&](int i) {
        result.replicates[static_cast<std::size_t>(i)] =
            run_study1_replicate(options, options.lambda0s[static_cast<std::size_t>(i / std::max(reps, 1))], i % reps);
    });
    for (int s = 0; s < settings; ++s) {
        std::vector<double> censored, complete;
        std::size_t decreasing = 0;
        for (int r = 0; r < reps; ++r) {
            const auto& rep = result.replicates[static_cast<std::size_t>(s * reps + r)];
            censored.push_back(rep.censored_beta);
            complete.push_back(rep.complete_beta);
            decreasing += rep.decreasing ? 1 : 0;
        }
        const std::string setting = "lambda0=" + format_double(options.lambda0s[static_cast<std::size_t>(s)]);
        result.summary.push_back(summarize(setting, "censored", censored));
        result.summary.back().decreasing = decreasing;
        result.summary.push_back(summarize(setting, "complete", complete));
    }
    return result;
}

Study2Result run_study2(const Study2Options& options)
{
    Study2Result result;
    const int reps = std::max(options.replicates, 0);
    result.replicates.resize(static_cast<std::size_t>(reps));
    parallel_for(reps, options.threads,
                 [&](int i) { result.replicates[static_cast<std::size_t>(i)] = run_study2_replicate(options, i); });
    const char* names[3] = {"past", "current", "average"};
    for (int s = 0; s < 3; ++s) {
        std::vector<double> values;
        for (const auto& rep : result.replicates) values.push_back(rep.estimate[s]);
        result.summary.push_back(summarize("beta=" + format_double(options.beta), names[s], values));
    }
    return result;
}

namespace {

std::string cell(double v) { return std::isfinite(v) ? format_double(v) : "NA"; }

std::string quoted(const std::string& s)
{
    if (s.empty()) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + '"';
}

} // namespace

void write_estimates(std::ostream& out, const Study1Result& result)
{
    out << "lambda0,replicate,events,positive_rows,censored_beta,complete_beta,age_edf,age_decreasing,error\n";
    for (const auto& r : result.replicates)
        out << format_double(r.lambda0) << ',' << r.replicate << ',' << r.events << ',' << r.positive_rows << ','
            << cell(r.censored_beta) << ',' << cell(r.complete_beta) << ',' << cell(r.age_edf) << ','
            << (r.decreasing ? 1 : 0) << ',' << quoted(r.error) << '\n';
}

void write_estimates(std::ostream& out, const Study2Result& result)
{
    out << "replicate,events,past,current,average,error\n";
    for (const auto& r : result.replicates)
        out << r.replicate << ',' << r.events << ',' << cell(r.estimate[0]) << ',' << cell(r.estimate[1]) << ','
            << cell(r.estimate[2]) << ',' << quoted(r.error) << '\n';
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows)
{
    out << "setting,estimator,n,median,q1,q3,iqr,decreasing\n";
    for (const auto& r : rows) {
        out << r.setting << ',' << r.estimator << ',' << r.n << ',' << cell(r.median) << ',';
        out << (r.q1 ? cell(*r.q1) : "") << ',' << (r.q3 ? cell(*r.q3) : "") << ','
            << (r.iqr ? cell(*r.iqr) : "") << ',';
        if (r.decreasing) out << *r.decreasing;
        out << '\n';
    }
}

} // namespace rhem
