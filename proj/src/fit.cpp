#include "rhem/fit.hpp"

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace rhem {

std::string_view to_string(Family f)
{
    switch (f) {
    case Family::binomial_cloglog: return "binomial_cloglog";
    case Family::censored_poisson: return "censored_poisson";
    case Family::poisson: return "poisson";
    }
    return "?";
}

Family parse_family(std::string_view text)
{
    if (text == "binomial_cloglog") return Family::binomial_cloglog;
    if (text == "censored_poisson") return Family::censored_poisson;
    if (text == "poisson") return Family::poisson;
    throw InvalidInput("unknown family '" + std::string(text) + "'");
}

std::string_view to_string(Criterion c) { return c == Criterion::AIC ? "AIC" : "GCV"; }

Criterion parse_criterion(std::string_view text)
{
    if (text == "AIC" || text == "aic") return Criterion::AIC;
    if (text == "GCV" || text == "gcv") return Criterion::GCV;
    throw InvalidInput("unknown criterion '" + std::string(text) + "'");
}

std::string_view to_string(FitDiagnostic::Kind k)
{
    switch (k) {
    case FitDiagnostic::Kind::boundary: return "boundary";
    case FitDiagnostic::Kind::separation: return "separation";
    case FitDiagnostic::Kind::non_convergence: return "non_convergence";
    case FitDiagnostic::Kind::non_finite: return "non_finite";
    }
    return "?";
}

std::string Term::name() const
{
    switch (kind) {
    case Kind::linear: return covariate;
    case Kind::smooth: return "s(" + covariate + ")";
    case Kind::random_intercept: return "re(" + grouping + ")";
    }
    return covariate;
}

Term Term::linear(std::string covariate)
{
    Term t;
    t.kind = Kind::linear;
    t.covariate = std::move(covariate);
    return t;
}

Term Term::smooth(std::string covariate, int num_basis, int degree)
{
    Term t;
    t.kind = Kind::smooth;
    t.covariate = std::move(covariate);
    t.num_basis = num_basis;
    t.degree = degree;
    return t;
}

Term Term::random_intercept(std::string grouping)
{
    Term t;
    t.kind = Kind::random_intercept;
    t.grouping = std::move(grouping);
    return t;
}

void ModelSpec::validate() const
{
    std::set<std::string> used;
    for (const Term& t : terms) {
        const std::string& key = t.kind == Term::Kind::random_intercept ? t.grouping : t.covariate;
        if (key.empty()) throw InvalidInput("model term without a covariate or grouping");
        if (!used.insert(key).second) throw InvalidInput("'" + key + "' appears in more than one term");
        if (t.kind == Term::Kind::smooth && t.num_basis < t.degree + 2)
            throw InvalidInput("smooth " + t.covariate + " needs num_basis >= degree + 2");
    }
}

// Design ------------------------------------------------------------------

Eigen::MatrixXd DesignSystem::total_penalty(const Eigen::VectorXd& lambdas) const
{
    if (lambdas.size() != static_cast<Eigen::Index>(penalties.size()))
        throw InvalidInput("one smoothing parameter per penalty block is required");
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(cols(), cols());
    for (std::size_t b = 0; b < penalties.size(); ++b) {
        const auto& p = penalties[b];
        S.block(p.start, p.start, p.size, p.size) += lambdas(static_cast<Eigen::Index>(b)) * p.matrix;
    }
    return S;
}

namespace {

double frobenius_ratio(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b)
{
    const double nb = b.norm();
    return nb > 0.0 ? a.norm() / nb : 1.0;
}

} // namespace

DesignSystem build_design(const CensoredPanel& panel, const ModelSpec& spec)
{
    spec.validate();
    const auto n = static_cast<Eigen::Index>(panel.rows());
    if (n == 0) throw InvalidInput("design: panel has no rows");

    DesignSystem design;
    design.offset = panel.offset;
    std::vector<Eigen::MatrixXd> blocks;
    Eigen::Index next = 0;

    if (spec.include_intercept) {
        blocks.push_back(Eigen::MatrixXd::Ones(n, 1));
        design.column_names.push_back("(Intercept)");
        design.has_intercept = true;
        next = 1;
    }

    for (std::size_t ti = 0; ti < spec.terms.size(); ++ti) {
        const Term& term = spec.terms[ti];
        TermLayout layout;
        layout.term = term;
        layout.start = next;
        switch (term.kind) {
        case Term::Kind::linear: {
            const Eigen::Index c = panel.covariate_index(term.covariate);
            blocks.push_back(panel.covariates.col(c));
            design.column_names.push_back(term.covariate);
            layout.size = 1;
            break;
        }
        case Term::Kind::smooth: {
            const Eigen::Index c = panel.covariate_index(term.covariate);
            const Eigen::VectorXd x = panel.covariates.col(c);
            auto basis = bspline_basis(x, term.num_basis, term.degree);
            // absorb the sum-to-zero constraint 1'B b = 0
            const Eigen::VectorXd constraint = basis.basis.colwise().sum().transpose();
            Eigen::HouseholderQR<Eigen::MatrixXd> qr(constraint);
            const Eigen::MatrixXd Q = qr.householderQ();
            const Eigen::Index k = term.num_basis;
            layout.constraint = Q.rightCols(k - 1);
            layout.spline = basis.spline;
            const Eigen::MatrixXd Xs = basis.basis * layout.constraint;
            const Eigen::MatrixXd XtX = Xs.transpose() * Xs;
            Eigen::MatrixXd S = layout.constraint.transpose() * basis.penalty * layout.constraint;
            S = 0.5 * (S + S.transpose()).eval();
            layout.size = k - 1;
            blocks.push_back(Xs);
            for (Eigen::Index j = 0; j < layout.size; ++j)
                design.column_names.push_back(term.name() + "." + std::to_string(j + 1));

            design.penalties.push_back({next, layout.size, S * frobenius_ratio(XtX, S), ti, term.name(), false});
            if (spec.double_penalty) {
                Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(S);
                const Eigen::VectorXd ev = eig.eigenvalues();
                const double cutoff = ev.maxCoeff() * 1e-8;
                std::vector<Eigen::Index> null_cols;
                for (Eigen::Index j = 0; j < ev.size(); ++j)
                    if (ev(j) <= cutoff) null_cols.push_back(j);
                if (!null_cols.empty()) {
                    Eigen::MatrixXd U(layout.size, static_cast<Eigen::Index>(null_cols.size()));
                    for (std::size_t j = 0; j < null_cols.size(); ++j)
                        U.col(static_cast<Eigen::Index>(j)) = eig.eigenvectors().col(null_cols[j]);
                    Eigen::MatrixXd S0 = U * U.transpose();
                    design.penalties.push_back(
                        {next, layout.size, S0 * frobenius_ratio(XtX, S0), ti, term.name() + ":null", true});
                }
            }
            break;
        }
        case Term::Kind::random_intercept: {
            const auto labels = panel.grouping(term.grouping);
            std::set<std::string> unique(labels.begin(), labels.end());
            layout.levels.assign(unique.begin(), unique.end());
            std::map<std::string, Eigen::Index> index;
            for (std::size_t j = 0; j < layout.levels.size(); ++j)
                index.emplace(layout.levels[j], static_cast<Eigen::Index>(j));
            layout.size = static_cast<Eigen::Index>(layout.levels.size());
            Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n, layout.size);
            for (Eigen::Index i = 0; i < n; ++i) Z(i, index.at(labels[static_cast<std::size_t>(i)])) = 1.0;
            blocks.push_back(std::move(Z));
            for (const auto& level : layout.levels) design.column_names.push_back(term.name() + "." + level);
            design.penalties.push_back({next, layout.size, Eigen::MatrixXd::Identity(layout.size, layout.size),
                                        ti, term.name(), false});
            break;
        }
        }
        next += layout.size;
        design.terms.push_back(std::move(layout));
    }

    design.X.resize(n, next);
    Eigen::Index col = 0;
    for (const auto& b : blocks) {
        design.X.middleCols(col, b.cols()) = b;
        col += b.cols();
    }
    if (next == 0) throw InvalidInput("design has no columns");
    return design;
}

// Likelihood pieces ---------------------------------------------------------

namespace {

struct WorkingQuantities {
    Eigen::VectorXd score;  // dl/deta
    Eigen::VectorXd weight; // Fisher or observed curvature
};

// mu / expm1(mu): the y = 1 score of the censored likelihood
double censored_ratio(double mu)
{
    if (mu < 1e-8) return 1.0 - 0.5 * mu;
    return mu / std::expm1(mu);
}

WorkingQuantities fisher_quantities(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta)
{
    const Eigen::Index n = y.size();
    WorkingQuantities q{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = std::exp(eta(i));
        if (family == Family::poisson) {
            q.score(i) = y(i) - mu;
            q.weight(i) = mu;
        } else {
            // pi = 1 - exp(-mu); w = (dpi/deta)^2 / (pi (1 - pi)) = mu^2 / expm1(mu)
            const double ratio = censored_ratio(mu);
            q.score(i) = y(i) > 0.0 ? ratio : -mu;
            q.weight(i) = mu * ratio;
        }
    }
    return q;
}

// Observed curvature -d2l/deta2 of the censored Poisson likelihood.
WorkingQuantities observed_censored_quantities(const Eigen::VectorXd& y, const Eigen::VectorXd& eta)
{
    const Eigen::Index n = y.size();
    WorkingQuantities q{Eigen::VectorXd(n), Eigen::VectorXd(n)};
    for (Eigen::Index i = 0; i < n; ++i) {
        const double mu = std::exp(eta(i));
        if (y(i) > 0.0) {
            // l = log(1 - e^-mu); dl/deta = mu / expm1(mu) = r
            // -d2l/deta2 = r (mu + r - 1)
            const double r = censored_ratio(mu);
            const double excess = mu < 1e-4 ? mu / 2.0 + mu * mu / 12.0 : mu + r - 1.0;
            q.score(i) = r;
            q.weight(i) = r * excess;
        } else {
            q.score(i) = -mu;
            q.weight(i) = mu;
        }
    }
    return q;
}

void check_outcomes(Family family, const Eigen::VectorXd& y)
{
    if (y.size() == 0) throw InvalidInput("fit: empty outcome vector");
    if (!y.allFinite() || (y.array() < 0.0).any()) throw InvalidInput("fit: outcomes must be finite and nonnegative");
    if (family != Family::poisson && ((y.array() != 0.0) && (y.array() != 1.0)).any())
        throw InvalidInput("fit: binary outcomes must be 0 or 1");
    if ((y.array() == 0.0).all())
        throw FitDiagnostic(FitDiagnostic::Kind::boundary,
                            "no events observed: the maximum likelihood estimate lies at minus infinity");
    if (family != Family::poisson && (y.array() > 0.0).all())
        throw FitDiagnostic(FitDiagnostic::Kind::boundary,
                            "every outcome is positive: fitted rates diverge to infinity");
}

double saturated_log_likelihood(Family family, const Eigen::VectorXd& y)
{
    if (family != Family::poisson) return 0.0;
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i)
        if (y(i) > 0.0) ll += y(i) * std::log(y(i)) - y(i) - std::lgamma(y(i) + 1.0);
    return ll;
}

struct Objective {
    double log_likelihood;
    double penalized_deviance;
};

Objective objective(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                    const Eigen::VectorXd& beta, const Eigen::MatrixXd& S, double saturated)
{
    const double ll = log_likelihood(family, y, eta);
    return {ll, 2.0 * (saturated - ll) + beta.dot(S * beta)};
}

Eigen::VectorXd initial_eta(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& offset)
{
    Eigen::VectorXd eta(y.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        double mu;
        if (family == Family::poisson) {
            mu = y(i) + 0.1;
        } else {
            const double p = (y(i) + 0.5) / 2.0;
            mu = -std::log1p(-p);
        }
        eta(i) = std::log(mu);
    }
    (void)offset;
    return eta;
}

Eigen::VectorXd solve_spd(const Eigen::MatrixXd& A, const Eigen::VectorXd& b, int iteration,
                          const Eigen::VectorXd& beta)
{
    Eigen::LLT<Eigen::MatrixXd> llt(A);
    if (llt.info() == Eigen::Success) return llt.solve(b);
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
        throw FitDiagnostic(FitDiagnostic::Kind::non_finite,
                            "penalized information is singular; coefficients are not identifiable",
                            iteration, beta);
    return ldlt.solve(b);
}

enum class Curvature { fisher, observed };

PirlsResult penalized_newton(const DesignSystem& design, const Eigen::VectorXd& y,
                             const Eigen::VectorXd& lambdas, Family family, Curvature curvature,
                             const PirlsOptions& options, const std::optional<Eigen::VectorXd>& start)
{
    if (y.size() != design.X.rows()) throw InvalidInput("fit: outcome length does not match the design");
    if ((lambdas.array() < 0.0).any()) throw InvalidInput("fit: smoothing parameters must be nonnegative");
    check_outcomes(family, y);

    const Eigen::MatrixXd& X = design.X;
    const Eigen::MatrixXd S = design.total_penalty(lambdas);
    const double saturated = saturated_log_likelihood(family, y);
    auto quantities = [&](const Eigen::VectorXd& eta) {
        return curvature == Curvature::observed ? observed_censored_quantities(y, eta)
                                                : fisher_quantities(family, y, eta);
    };

    Eigen::VectorXd beta;
    if (start && start->size() == X.cols()) {
        beta = *start;
    } else {
        // one weighted least-squares step from a data-driven linear predictor
        const Eigen::VectorXd eta0 = initial_eta(family, y, design.offset);
        const auto q = fisher_quantities(family, y, eta0);
        const Eigen::VectorXd z = eta0 - design.offset + q.score.cwiseQuotient(q.weight);
        const Eigen::MatrixXd A = X.transpose() * q.weight.asDiagonal() * X + S;
        beta = solve_spd(A, X.transpose() * q.weight.cwiseProduct(z), 0, Eigen::VectorXd());
    }

    PirlsResult result;
    Eigen::VectorXd eta = design.offset + X * beta;
    Objective current = objective(family, y, eta, beta, S, saturated);
    if (!std::isfinite(current.penalized_deviance)) {
        beta = Eigen::VectorXd::Zero(X.cols());
        eta = design.offset;
        current = objective(family, y, eta, beta, S, saturated);
    }

    int iter = 0, stalls = 0;
    for (; iter < options.max_iterations; ++iter) {
        const auto q = quantities(eta);
        const Eigen::MatrixXd A = X.transpose() * q.weight.asDiagonal() * X + S;
        const Eigen::VectorXd gradient = X.transpose() * q.score - S * beta;
        const Eigen::VectorXd delta = solve_spd(A, gradient, iter, beta);

        double step = 1.0;
        Eigen::VectorXd trial_beta, trial_eta;
        Objective trial{};
        bool accepted = false;
        for (int halving = 0; halving < 60; ++halving) {
            trial_beta = beta + step * delta;
            trial_eta = design.offset + X * trial_beta;
            trial = objective(family, y, trial_eta, trial_beta, S, saturated);
            if (std::isfinite(trial.penalized_deviance) &&
                trial.penalized_deviance <= current.penalized_deviance + 1e-12 * std::abs(current.penalized_deviance)) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // no descent along the Newton direction: already at the optimum
            // to working precision
            result.converged = true;
            break;
        }
        const double change = std::abs(trial.penalized_deviance - current.penalized_deviance);
        beta = trial_beta;
        eta = trial_eta;
        current = trial;
        // the deviance can flatten out before poorly determined coefficients
        // settle, so a full step must also be small. Halved steps with a flat
        // deviance mean the solve itself is at its noise floor; a few of
        // those in a row count as converged.
        const bool flat = change < options.tolerance * (0.1 + std::abs(current.penalized_deviance));
        stalls = flat && step < 1.0 ? stalls + 1 : 0;
        const bool small = step == 1.0 &&
                           delta.cwiseAbs().maxCoeff() < options.step_tolerance * (1.0 + beta.cwiseAbs().maxCoeff());
        if (flat && (small || stalls >= 3)) {
            result.converged = true;
            ++iter;
            break;
        }
    }

    result.coefficients = beta;
    result.linear_predictor = eta;
    result.fitted = eta.array().exp();
    if (family != Family::poisson) result.fitted = (-(-result.fitted.array()).exp() + 1.0).matrix();
    result.log_likelihood = current.log_likelihood;
    result.deviance = 2.0 * (saturated - current.log_likelihood);
    result.penalized_deviance = current.penalized_deviance;
    result.iterations = iter;
    if (!result.converged)
        result.diagnostic = "no convergence after " + std::to_string(iter) + " iterations";

    if (!beta.allFinite())
        throw FitDiagnostic(FitDiagnostic::Kind::non_finite, "non-finite coefficients", iter, beta);
    const double worst = (eta - design.offset).cwiseAbs().maxCoeff();
    // a fit still crawling toward certain outcomes is separated, not just slow
    const double certain = family == Family::poisson ? -std::log(1e-12) : std::log(-std::log(1e-12));
    const bool drifting = !result.converged && ((eta.array() < std::log(1e-12)).any() ||
                                                (family != Family::poisson && (eta.array() > certain).any()));
    if (worst > options.eta_limit || drifting)
        throw FitDiagnostic(FitDiagnostic::Kind::separation,
                            "fitted linear predictor diverges (|eta| = " + std::to_string(worst) +
                                "): the data are separated",
                            iter, beta);

    const auto fisher = fisher_quantities(family, y, eta);
    const Eigen::MatrixXd XtWX = X.transpose() * fisher.weight.asDiagonal() * X;
    const Eigen::MatrixXd A = XtWX + S;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(A);
    result.covariance = ldlt.solve(Eigen::MatrixXd::Identity(A.rows(), A.cols()));
    result.covariance = 0.5 * (result.covariance + result.covariance.transpose()).eval();
    result.edf = (result.covariance * XtWX).diagonal();
    return result;
}

} // namespace

double log_likelihood(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta)
{
    double ll = 0.0;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        const double mu = std::exp(eta(i));
        switch (family) {
        case Family::poisson:
            ll += y(i) * eta(i) - mu - std::lgamma(y(i) + 1.0);
            break;
        case Family::binomial_cloglog: {
            // y log pi + (1 - y) log(1 - pi) with pi = 1 - exp(-mu)
            const double log_pi = std::log(-std::expm1(-mu));
            ll += y(i) > 0.0 ? log_pi : -mu;
            break;
        }
        case Family::censored_poisson:
            // Poisson zero probability when y = 0, positive-count probability otherwise
            ll += y(i) > 0.0 ? std::log1p(-std::exp(-mu)) : -mu;
            break;
        }
    }
    return ll;
}

PirlsResult pirls(const DesignSystem& design, const Eigen::VectorXd& y, const Eigen::VectorXd& lambdas,
                  Family family, const PirlsOptions& options, const std::optional<Eigen::VectorXd>& start)
{
    if (family == Family::censored_poisson)
        throw InvalidInput("pirls: use fit_censored_poisson for the censored Poisson family");
    return penalized_newton(design, y, lambdas, family, Curvature::fisher, options, start);
}

PirlsResult fit_censored_poisson(const DesignSystem& design, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& lambdas, const PirlsOptions& options,
                                 const std::optional<Eigen::VectorXd>& start)
{
    return penalized_newton(design, y, lambdas, Family::censored_poisson, Curvature::observed, options, start);
}

PirlsResult fit_penalized(const DesignSystem& design, const Eigen::VectorXd& y, const Eigen::VectorXd& lambdas,
                          Family family, const PirlsOptions& options, const std::optional<Eigen::VectorXd>& start)
{
    if (family == Family::censored_poisson) return fit_censored_poisson(design, y, lambdas, options, start);
    return pirls(design, y, lambdas, family, options, start);
}

Eigen::VectorXd penalized_score(const DesignSystem& design, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& lambdas, Family family,
                                const Eigen::VectorXd& coefficients)
{
    const Eigen::VectorXd eta = design.offset + design.X * coefficients;
    const auto q = fisher_quantities(family, y, eta);
    return design.X.transpose() * q.score - design.total_penalty(lambdas) * coefficients;
}

Eigen::MatrixXd penalized_fisher_information(const DesignSystem& design, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& lambdas, Family family,
                                             const Eigen::VectorXd& coefficients)
{
    const Eigen::VectorXd eta = design.offset + design.X * coefficients;
    const auto q = fisher_quantities(family, y, eta);
    return design.X.transpose() * q.weight.asDiagonal() * design.X + design.total_penalty(lambdas);
}

Eigen::MatrixXd penalized_observed_information(const DesignSystem& design, const Eigen::VectorXd& y,
                                               const Eigen::VectorXd& lambdas, Family family,
                                               const Eigen::VectorXd& coefficients)
{
    const Eigen::VectorXd eta = design.offset + design.X * coefficients;
    const auto q = family == Family::poisson ? fisher_quantities(family, y, eta) : observed_censored_quantities(y, eta);
    return design.X.transpose() * q.weight.asDiagonal() * design.X + design.total_penalty(lambdas);
}

// Smoothing selection -------------------------------------------------------

double criterion_value(Criterion criterion, const PirlsResult& fit, Eigen::Index rows)
{
    const double edf = fit.total_edf();
    if (criterion == Criterion::AIC) return -2.0 * fit.log_likelihood + 2.0 * edf;
    const double n = static_cast<double>(rows);
    const double denom = n - edf;
    if (!(denom > 0.0)) return std::numeric_limits<double>::infinity();
    return n * fit.deviance / (denom * denom);
}

SmoothingSelection select_smoothing(const DesignSystem& design, const Eigen::VectorXd& y, Family family,
                                    Criterion criterion, const SelectionOptions& options)
{
    const auto blocks = static_cast<Eigen::Index>(design.penalties.size());
    SmoothingSelection best;
    if (blocks == 0) {
        best.lambdas = Eigen::VectorXd(0);
        best.fit = fit_penalized(design, y, best.lambdas, family, options.pirls);
        best.criterion = criterion_value(criterion, best.fit, y.size());
        return best;
    }
    if (options.grid_points < 2) throw InvalidInput("smoothing grid needs at least two points");

    std::vector<double> grid(static_cast<std::size_t>(options.grid_points));
    for (std::size_t g = 0; g < grid.size(); ++g) {
        const double e = options.log10_min + (options.log10_max - options.log10_min) * static_cast<double>(g) /
                                                 static_cast<double>(grid.size() - 1);
        grid[g] = std::pow(10.0, e);
    }

    struct Evaluation {
        double score;
        std::optional<PirlsResult> fit;
    };
    std::map<std::vector<std::size_t>, Evaluation> cache;
    std::optional<Eigen::VectorXd> warm;
    std::string last_problem;

    auto evaluate = [&](const std::vector<std::size_t>& index) -> const Evaluation& {
        auto it = cache.find(index);
        if (it != cache.end()) return it->second;
        Eigen::VectorXd lambdas(blocks);
        for (Eigen::Index b = 0; b < blocks; ++b) lambdas(b) = grid[index[static_cast<std::size_t>(b)]];
        Evaluation ev{std::numeric_limits<double>::infinity(), std::nullopt};
        try {
            PirlsResult fit = fit_penalized(design, y, lambdas, family, options.pirls, warm);
            if (!fit.converged) fit = fit_penalized(design, y, lambdas, family, options.pirls);
            const double score = criterion_value(criterion, fit, y.size());
            if (fit.converged && std::isfinite(score)) {
                ev.score = score;
                warm = fit.coefficients;
                ev.fit = std::move(fit);
            } else {
                last_problem = fit.converged ? "criterion not finite" : fit.diagnostic;
            }
        } catch (const FitDiagnostic& d) {
            if (d.kind() == FitDiagnostic::Kind::boundary) throw;
            last_problem = d.what();
        }
        return cache.emplace(index, std::move(ev)).first->second;
    };

    std::vector<std::size_t> current(static_cast<std::size_t>(blocks), grid.size() / 2);
    double current_score = evaluate(current).score;
    for (int cycle = 0; cycle < options.max_cycles; ++cycle) {
        bool changed = false;
        for (std::size_t b = 0; b < current.size(); ++b) {
            std::size_t choice = current[b];
            double choice_score = current_score;
            for (std::size_t g = 0; g < grid.size(); ++g) {
                auto trial = current;
                trial[b] = g;
                const double s = evaluate(trial).score;
                if (s < choice_score) {
                    choice_score = s;
                    choice = g;
                }
            }
            if (choice != current[b]) {
                current[b] = choice;
                current_score = choice_score;
                changed = true;
            }
        }
        if (!changed) break;
    }

    const Evaluation& chosen = evaluate(current);
    if (!chosen.fit)
        throw FitDiagnostic(FitDiagnostic::Kind::non_finite,
                            "smoothing selection: criterion is not finite anywhere on the grid (" + last_problem + ")");
    best.lambdas.resize(blocks);
    for (Eigen::Index b = 0; b < blocks; ++b) best.lambdas(b) = grid[current[static_cast<std::size_t>(b)]];
    best.criterion = chosen.score;
    best.fit = *chosen.fit;
    return best;
}

// Model fitting -----------------------------------------------------------

Eigen::VectorXd response_for(const CensoredPanel& panel, Family family)
{
    if (family == Family::poisson) {
        if (!panel.has_counts()) throw InvalidInput("poisson family needs uncensored counts in the panel");
        return panel.count;
    }
    return panel.y;
}

double FitResult::coefficient(const std::string& name) const
{
    auto it = std::find(coefficient_names.begin(), coefficient_names.end(), name);
    if (it == coefficient_names.end()) throw InvalidInput("no coefficient named '" + name + "'");
    return coefficients(it - coefficient_names.begin());
}

const TermLayout& FitResult::layout(const std::string& term_name) const
{
    for (const auto& l : layouts)
        if (l.term.name() == term_name || l.term.covariate == term_name) return l;
    throw InvalidInput("fit has no term '" + term_name + "'");
}

namespace {

TermSummary summarize_term(const TermLayout& layout, const PirlsResult& fit, const DesignSystem& design,
                           const Eigen::VectorXd& lambdas)
{
    TermSummary s;
    s.name = layout.term.name();
    s.kind = layout.term.kind;
    s.edf = fit.edf.segment(layout.start, layout.size).sum();
    const Eigen::VectorXd b = fit.coefficients.segment(layout.start, layout.size);
    const Eigen::MatrixXd V = fit.covariance.block(layout.start, layout.start, layout.size, layout.size);

    if (layout.term.kind == Term::Kind::linear) {
        const double se = std::sqrt(V(0, 0));
        const double z = b(0) / se;
        s.statistic = z * z;
        s.reference_df = 1.0;
        boost::math::normal_distribution<double> normal;
        s.p_value = 2.0 * boost::math::cdf(boost::math::complement(normal, std::abs(z)));
        return s;
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(V);
    const auto rank = std::clamp<Eigen::Index>(static_cast<Eigen::Index>(std::lround(s.edf)), 1, layout.size);
    double stat = 0.0;
    for (Eigen::Index j = layout.size - rank; j < layout.size; ++j) {
        const double ev = eig.eigenvalues()(j);
        if (ev <= 0.0) continue;
        const double proj = eig.eigenvectors().col(j).dot(b);
        stat += proj * proj / ev;
    }
    s.statistic = stat;
    s.reference_df = static_cast<double>(rank);
    boost::math::chi_squared_distribution<double> chi(s.reference_df);
    s.p_value = std::isfinite(stat) ? boost::math::cdf(boost::math::complement(chi, stat)) : 0.0;

    if (layout.term.kind == Term::Kind::random_intercept) {
        for (std::size_t p = 0; p < design.penalties.size(); ++p) {
            if (design.penalties[p].start == layout.start)
                s.std_dev = std::sqrt(1.0 / lambdas(static_cast<Eigen::Index>(p)));
        }
    }
    return s;
}

} // namespace

FitResult fit_model(const CensoredPanel& panel, const ModelSpec& spec, const SelectionOptions& options)
{
    if (panel.rows() == 0) throw InvalidInput("fit: empty risk set (panel has no rows)");
    const DesignSystem design = build_design(panel, spec);
    const Eigen::VectorXd y = response_for(panel, spec.family);
    SmoothingSelection sel = select_smoothing(design, y, spec.family, spec.criterion, options);
    if (!sel.fit.converged)
        throw FitDiagnostic(FitDiagnostic::Kind::non_convergence, sel.fit.diagnostic, sel.fit.iterations,
                            sel.fit.coefficients);

    FitResult out;
    out.spec = spec;
    out.coefficient_names = design.column_names;
    out.coefficients = sel.fit.coefficients;
    out.covariance = sel.fit.covariance;
    out.lambdas = sel.lambdas;
    for (const auto& p : design.penalties) out.lambda_labels.push_back(p.label);
    out.layouts = design.terms;
    for (const auto& layout : design.terms) out.terms.push_back(summarize_term(layout, sel.fit, design, sel.lambdas));
    out.log_likelihood = sel.fit.log_likelihood;
    out.deviance = sel.fit.deviance;
    out.criterion = sel.criterion;
    out.total_edf = sel.fit.total_edf();
    out.iterations = sel.fit.iterations;
    out.converged = sel.fit.converged;
    out.rows = design.X.rows();
    return out;
}

SmoothCurve smooth_effect(const FitResult& fit, const std::string& term_name, const Eigen::VectorXd& grid)
{
    const TermLayout& layout = fit.layout(term_name);
    if (layout.term.kind != Term::Kind::smooth) throw InvalidInput("'" + term_name + "' is not a smooth term");
    SmoothCurve curve;
    curve.x = grid;
    const Eigen::MatrixXd Xg = layout.spline.evaluate(grid) * layout.constraint;
    const Eigen::VectorXd b = fit.coefficients.segment(layout.start, layout.size);
    const Eigen::MatrixXd V = fit.covariance.block(layout.start, layout.start, layout.size, layout.size);
    curve.fit = Xg * b;
    curve.se = (Xg * V).cwiseProduct(Xg).rowwise().sum().cwiseMax(0.0).cwiseSqrt();
    curve.lower = curve.fit - 1.96 * curve.se;
    curve.upper = curve.fit + 1.96 * curve.se;
    curve.extrapolated.resize(static_cast<std::size_t>(grid.size()));
    for (Eigen::Index i = 0; i < grid.size(); ++i)
        curve.extrapolated[static_cast<std::size_t>(i)] = !layout.spline.inside(grid(i));
    return curve;
}

} // namespace rhem
