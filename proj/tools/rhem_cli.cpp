// rhem: simulate, censor, and fit relational hyperevent models from the shell.

#include "rhem/censor.hpp"
#include "rhem/core.hpp"
#include "rhem/fit.hpp"
#include "rhem/io.hpp"
#include "rhem/model_spec.hpp"
#include "rhem/sim.hpp"
#include "rhem/stats.hpp"
#include "rhem/study.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rhem;

namespace {

constexpr int exit_invalid = 2;
constexpr int exit_numerical = 3;

struct Globals {
    std::optional<std::uint64_t> seed;
    std::string out_dir = ".";
    int threads = 1;
};

std::string in_out_dir(const Globals& g, const std::string& name)
{
    fs::create_directories(g.out_dir);
    return (fs::path(g.out_dir) / name).string();
}

std::uint64_t require_seed(const Globals& g)
{
    if (!g.seed) throw InvalidInput("--seed is required for stochastic subcommands");
    return *g.seed;
}

void write_json(const std::string& path, const json& j)
{
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

Universe load_universe(const std::string& path)
{
    if (path.empty()) return {};
    auto in = open_input(path);
    return read_actors(in);
}

std::string replicate_name(const std::string& stem, int r, const std::string& ext)
{
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "_r%03d", r);
    return stem + buffer + ext;
}

// simulate ----------------------------------------------------------------

struct SimulateArgs {
    std::string study;
    std::string model_path;
    std::string actors_path;
    std::string method = "auto";
    double lambda0 = 0.25;
    std::optional<double> beta;
    double horizon = 6.0;
    double tau = 0.1;
    int max_size = 3;
    int reps = 1;
    std::size_t actors = 8;
};

int cmd_simulate(const Globals& g, const SimulateArgs& a)
{
    const std::uint64_t seed = require_seed(g);
    if (a.reps < 0) throw InvalidInput("--reps must be nonnegative");

    IntensityModel model;
    std::string method = a.method;
    if (!a.model_path.empty()) {
        auto in = open_input(a.model_path);
        try {
            model = intensity_model_from_json(json::parse(in));
        } catch (const json::exception& e) {
            throw InvalidInput(a.model_path + ": " + e.what());
        }
    } else if (a.study == "eq-model1" || a.study == "study1") {
        model = study1_model(a.lambda0, a.beta.value_or(0.9));
    } else if (a.study == "eq-model2" || a.study == "study2") {
        model = study2_model(a.lambda0, a.beta.value_or(0.8));
    } else {
        throw InvalidInput("simulate needs --model or --study eq-model1|eq-model2");
    }
    if (method == "auto") method = model.time_varying() ? "tau-leap" : "gillespie";
    if (method != "gillespie" && method != "tau-leap") throw InvalidInput("unknown --method '" + method + "'");

    if (a.reps == 0) {
        std::cerr << "warning: --reps 0, nothing simulated\n";
        return 0;
    }

    const Universe given = load_universe(a.actors_path);
    const auto started = std::chrono::steady_clock::now();
    std::vector<std::size_t> counts;
    for (int r = 0; r < a.reps; ++r) {
        const Universe universe = given.empty() ? study_universe(seed, static_cast<std::uint64_t>(r), a.actors) : given;
        SimConfig config;
        config.horizon = a.horizon;
        config.max_sender_size = a.max_size;
        config.seed = seed;
        config.replicate = static_cast<std::uint64_t>(r);
        if (method == "tau-leap") config.tau = a.tau;
        const EventHistory history = method == "tau-leap" ? simulate_tau_leap(universe, model, config)
                                                          : simulate_gillespie(universe, model, config);
        counts.push_back(history.events.size());
        {
            auto out = open_output(in_out_dir(g, replicate_name("history", r, ".csv")));
            write_history(out, history);
        }
        if (given.empty()) {
            auto out = open_output(in_out_dir(g, replicate_name("actors", r, ".csv")));
            write_actors(out, universe);
        }
    }
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    json meta{{"command", "simulate"},
              {"model", describe(model)},
              {"method", method},
              {"seed", seed},
              {"config",
               {{"horizon", a.horizon},
                {"max_sender_size", a.max_size},
                {"replicates", a.reps},
                {"tau", method == "tau-leap" ? json(a.tau) : json(nullptr)}}},
              {"events", counts},
              {"wall_time_seconds", wall}};
    write_json(in_out_dir(g, "metadata.json"), meta);
    return 0;
}

// panel / stats -----------------------------------------------------------

struct PanelArgs {
    std::string history_path;
    std::string actors_path;
    std::string waves;
    int unit_waves = 6;
    std::string specs = "girl_alter,avg_age";
    std::string strategy = "average";
    std::string triad_scope = "exclude_current_pair";
    std::string subset_rule = "containment";
    int max_size = 3;
    bool by_class = false;
    bool counts = false;
    std::string output;
};

CensoredPanel make_panel(const PanelArgs& a)
{
    if (a.history_path.empty()) throw InvalidInput("--history is required");
    const Universe universe = load_universe(a.actors_path);
    auto in = open_input(a.history_path);
    const EventHistory history = read_history(in, universe);
    const WaveGrid grid = a.waves.empty() ? WaveGrid::unit(a.unit_waves) : WaveGrid(parse_double_list(a.waves));
    const RiskSet risk = enumerate_risk_set(history.universe, a.max_size,
                                            a.by_class ? RiskScope::by_class : RiskScope::universe);
    PanelOptions options;
    options.strategy = parse_strategy(a.strategy);
    if (a.triad_scope == "exclude_current_pair") options.statistics.triad_scope = TriadScope::exclude_current_pair;
    else if (a.triad_scope == "exclude_senders") options.statistics.triad_scope = TriadScope::exclude_senders;
    else throw InvalidInput("unknown --triad-scope '" + a.triad_scope + "'");
    if (a.subset_rule == "containment") options.statistics.subset_rule = SubsetRule::containment;
    else if (a.subset_rule == "exact") options.statistics.subset_rule = SubsetRule::exact;
    else throw InvalidInput("unknown --subset-rule '" + a.subset_rule + "'");
    return build_panel(history, grid, constant_risk_sets(risk, grid.waves()), parse_spec_list(a.specs), options);
}

int cmd_panel(const Globals& g, const PanelArgs& a)
{
    const CensoredPanel panel = make_panel(a);
    auto out = open_output(a.output.empty() ? in_out_dir(g, "panel.csv") : a.output);
    write_panel(out, panel, a.counts);
    return 0;
}

int cmd_stats(const Globals& g, const PanelArgs& a)
{
    const CensoredPanel panel = make_panel(a);
    auto out = open_output(a.output.empty() ? in_out_dir(g, "stats.csv") : a.output);
    write_statistics(out, panel);
    return 0;
}

// fit ---------------------------------------------------------------------

struct FitArgs {
    std::string panel_path;
    std::string model_path;
    std::string family;
    std::string criterion;
    bool double_penalty = false;
    int grid_points = 41;
};

int cmd_fit(const Globals& g, const FitArgs& a)
{
    if (a.panel_path.empty() || a.model_path.empty()) throw InvalidInput("--panel and --model are required");
    ModelSpec spec = read_model_spec(a.model_path);
    if (!a.family.empty()) spec.family = parse_family(a.family);
    if (!a.criterion.empty()) spec.criterion = parse_criterion(a.criterion);
    if (a.double_penalty) spec.double_penalty = true;
    auto in = open_input(a.panel_path);
    const CensoredPanel panel = read_panel(in);

    const FitResult fit = fit_model(panel, spec);
    write_json(in_out_dir(g, "fit.json"), to_json(fit));
    {
        auto out = open_output(in_out_dir(g, "coefficients.csv"));
        write_coefficients(out, fit);
    }
    for (const auto& layout : fit.layouts) {
        if (layout.term.kind != Term::Kind::smooth) continue;
        const double lo = layout.spline.lower(), hi = layout.spline.upper();
        Eigen::VectorXd grid(a.grid_points);
        for (int i = 0; i < a.grid_points; ++i) grid(i) = lo + (hi - lo) * i / (a.grid_points - 1);
        auto out = open_output(in_out_dir(g, "curve_" + layout.term.covariate + ".csv"));
        write_curve(out, smooth_effect(fit, layout.term.name(), grid));
    }
    return 0;
}

// study -------------------------------------------------------------------

struct StudyArgs {
    std::string name;
    int reps = 100;
    std::vector<double> lambda0s;
};

int cmd_study(const Globals& g, const StudyArgs& a)
{
    const std::uint64_t seed = require_seed(g);
    if (a.reps < 0) throw InvalidInput("--reps must be nonnegative");
    if (a.reps == 0) {
        std::cerr << "warning: --reps 0, nothing to do\n";
        return 0;
    }
    const auto started = std::chrono::steady_clock::now();
    json meta{{"command", "study"}, {"study", a.name}, {"seed", seed}, {"replicates", a.reps}};
    if (a.name == "study1") {
        Study1Options o;
        o.replicates = a.reps;
        o.seed = seed;
        o.threads = g.threads;
        if (!a.lambda0s.empty()) o.lambda0s = a.lambda0s;
        const Study1Result r = run_study1(o);
        auto est = open_output(in_out_dir(g, "estimates.csv"));
        write_estimates(est, r);
        auto sum = open_output(in_out_dir(g, "summary.csv"));
        write_summary(sum, r.summary);
        meta["lambda0"] = o.lambda0s;
        meta["beta1"] = o.beta1;
    } else if (a.name == "study2") {
        Study2Options o;
        o.replicates = a.reps;
        o.seed = seed;
        o.threads = g.threads;
        const Study2Result r = run_study2(o);
        auto est = open_output(in_out_dir(g, "estimates.csv"));
        write_estimates(est, r);
        auto sum = open_output(in_out_dir(g, "summary.csv"));
        write_summary(sum, r.summary);
        meta["lambda0"] = o.lambda0;
        meta["beta"] = o.beta;
        meta["tau"] = o.tau;
    } else {
        throw InvalidInput("unknown study '" + a.name + "' (study1 or study2)");
    }
    meta["wall_time_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    write_json(in_out_dir(g, "metadata.json"), meta);
    return 0;
}

// ingest ------------------------------------------------------------------

struct IngestArgs {
    std::string actors_path;
    std::string friendship_path;
    std::string bad_talk_path;
    std::string waves;
    std::string rule = "maximal_nominating_subgroup";
};

int cmd_ingest(const Globals& g, const IngestArgs& a)
{
    if (a.actors_path.empty() || a.friendship_path.empty() || a.bad_talk_path.empty() || a.waves.empty())
        throw InvalidInput("--actors, --friendship, --bad-talk and --waves are required");
    const Universe universe = load_universe(a.actors_path);
    auto fin = open_input(a.friendship_path);
    const auto friendship = read_nominations(fin);
    auto bin = open_input(a.bad_talk_path);
    const auto bad_talk = read_nominations(bin);
    const WaveGrid grid(parse_double_list(a.waves));
    GroupRule rule;
    if (a.rule == "maximal_nominating_subgroup") rule = GroupRule::maximal_nominating_subgroup;
    else if (a.rule == "whole_group") rule = GroupRule::whole_group;
    else throw InvalidInput("unknown --rule '" + a.rule + "'");

    EventHistory history;
    history.universe = universe;
    json diagnostics = json::array();
    for (int k = 1; k <= grid.waves(); ++k) {
        std::vector<Nomination> wave_friends;
        for (const auto& n : friendship)
            if (n.wave == k) wave_friends.push_back(n);
        const auto groups = sender_groups_from_friendship(universe, wave_friends);
        const auto result = hyperevents_from_nominations(universe, bad_talk, groups, k, grid.end(k), rule);
        history.events.insert(history.events.end(), result.events.begin(), result.events.end());
        for (const auto& d : result.diagnostics) diagnostics.push_back({{"wave", k}, {"row", d.row}, {"message", d.message}});
    }
    auto out = open_output(in_out_dir(g, "history.csv"));
    write_history(out, history);
    if (!diagnostics.empty()) {
        write_json(in_out_dir(g, "ingest_diagnostics.json"), diagnostics);
        std::cerr << diagnostics.size() << " nomination rows rejected, see ingest_diagnostics.json\n";
    }
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Relational hyperevent models: simulation, censoring, fitting"};
    app.require_subcommand(1);
    app.fallthrough();
    Globals g;
    app.add_option("--seed", g.seed, "seed for stochastic subcommands");
    app.add_option("--out-dir", g.out_dir, "output directory");
    app.add_option("--threads", g.threads, "worker threads for replicate sweeps")->check(CLI::PositiveNumber);

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "simulate event histories");
    simulate->add_option("--study", sim.study, "eq-model1 or eq-model2");
    simulate->add_option("--model", sim.model_path, "intensity model JSON");
    simulate->add_option("--actors", sim.actors_path, "actors CSV (default: a random class per replicate)");
    simulate->add_option("--num-actors", sim.actors, "actors per random class");
    simulate->add_option("--method", sim.method, "gillespie, tau-leap or auto");
    simulate->add_option("--lambda0", sim.lambda0, "baseline intensity for --study");
    simulate->add_option("--beta", sim.beta, "coefficient for --study");
    simulate->add_option("--horizon", sim.horizon, "time horizon");
    simulate->add_option("--tau", sim.tau, "tau-leap step");
    simulate->add_option("--max-size", sim.max_size, "largest sender set at risk");
    simulate->add_option("--reps", sim.reps, "replicates");

    PanelArgs pa;
    auto add_panel_options = [&](CLI::App* cmd) {
        cmd->add_option("--history", pa.history_path, "history CSV")->required();
        cmd->add_option("--actors", pa.actors_path, "actors CSV");
        cmd->add_option("--waves", pa.waves, "wave boundaries t0,t1,...,tK");
        cmd->add_option("--unit-waves", pa.unit_waves, "K unit waves when --waves is absent");
        cmd->add_option("--specs", pa.specs, "comma-separated statistics, e.g. rd,rep_log1p");
        cmd->add_option("--strategy", pa.strategy, "past, current or average");
        cmd->add_option("--triad-scope", pa.triad_scope, "exclude_current_pair or exclude_senders");
        cmd->add_option("--subset-rule", pa.subset_rule, "containment or exact");
        cmd->add_option("--max-size", pa.max_size, "largest sender set at risk");
        cmd->add_flag("--by-class", pa.by_class, "restrict candidates to one class");
        cmd->add_option("--output", pa.output, "output CSV path");
    };
    auto* panel = app.add_subcommand("panel", "build a censored wave panel");
    add_panel_options(panel);
    panel->add_flag("--counts", pa.counts, "also write the uncensored counts");
    auto* stats = app.add_subcommand("stats", "export panel statistics");
    add_panel_options(stats);

    FitArgs fa;
    auto* fit = app.add_subcommand("fit", "fit a model to a panel");
    fit->add_option("--panel", fa.panel_path, "panel CSV")->required();
    fit->add_option("--model", fa.model_path, "model spec JSON")->required();
    fit->add_option("--family", fa.family, "override the spec's family");
    fit->add_option("--criterion", fa.criterion, "override the spec's criterion");
    fit->add_flag("--double-penalty", fa.double_penalty, "add null-space penalties");
    fit->add_option("--curve-points", fa.grid_points, "points per smooth curve")->check(CLI::Range(2, 100000));

    StudyArgs sa;
    auto* study = app.add_subcommand("study", "replicate a simulation study");
    study->add_option("name", sa.name, "study1 or study2")->required();
    study->add_option("--reps", sa.reps, "replicates");
    study->add_option("--lambda0", sa.lambda0s, "study1 baselines")->delimiter(',');

    IngestArgs ia;
    auto* ingest = app.add_subcommand("ingest", "turn survey nominations into a history");
    ingest->add_option("--actors", ia.actors_path, "actors CSV")->required();
    ingest->add_option("--friendship", ia.friendship_path, "friendship nominations CSV")->required();
    ingest->add_option("--bad-talk", ia.bad_talk_path, "bad-talk nominations CSV")->required();
    ingest->add_option("--waves", ia.waves, "wave boundaries t0,t1,...,tK")->required();
    ingest->add_option("--rule", ia.rule, "maximal_nominating_subgroup or whole_group");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_invalid;
    }

    try {
        if (*simulate) return cmd_simulate(g, sim);
        if (*panel) return cmd_panel(g, pa);
        if (*stats) return cmd_stats(g, pa);
        if (*fit) return cmd_fit(g, fa);
        if (*study) return cmd_study(g, sa);
        if (*ingest) return cmd_ingest(g, ia);
    } catch (const FitDiagnostic& d) {
        json payload{{"diagnostic", std::string(to_string(d.kind()))},
                     {"message", d.what()},
                     {"iterations", d.iterations()},
                     {"last_coefficients", std::vector<double>(d.last_coefficients().data(),
                                                                d.last_coefficients().data() + d.last_coefficients().size())}};
        std::cerr << payload.dump() << '\n';
        return exit_numerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_invalid;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_invalid;
    }
    return exit_invalid;
}
