#ifndef RHEM_FIT_HPP
#define RHEM_FIT_HPP

#include "rhem/bspline.hpp"
#include "rhem/censor.hpp"

#include <Eigen/Dense>

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace rhem {

enum class Family {
    /// Binomial outcome with complementary log-log link
    binomial_cloglog,
    /// Poisson counts right-censored at one
    censored_poisson,
    /// uncensored Poisson counts (complete-data benchmark)
    poisson
};

enum class Criterion { AIC, GCV };

std::string_view to_string(Family f);
Family parse_family(std::string_view text);
std::string_view to_string(Criterion c);
Criterion parse_criterion(std::string_view text);

struct Term {
    enum class Kind { linear, smooth, random_intercept };
    Kind kind = Kind::linear;
    /// covariate column (linear, smooth)
    std::string covariate;
    int num_basis = 10;
    int degree = 3;
    /// grouping column (random_intercept)
    std::string grouping;

    std::string name() const;

    static Term linear(std::string covariate);
    static Term smooth(std::string covariate, int num_basis = 10, int degree = 3);
    static Term random_intercept(std::string grouping);
};

struct ModelSpec {
    std::vector<Term> terms;
    Family family = Family::binomial_cloglog;
    bool include_intercept = true;
    bool double_penalty = false;
    Criterion criterion = Criterion::AIC;

    /// Throws InvalidInput when a covariate or grouping is used twice or a
    /// smooth has too few basis functions.
    void validate() const;
};

class FitDiagnostic : public std::runtime_error {
public:
    enum class Kind { boundary, separation, non_convergence, non_finite };

    FitDiagnostic(Kind kind, const std::string& message, int iterations = 0,
                  Eigen::VectorXd last_coefficients = {})
        : std::runtime_error(message), kind_(kind), iterations_(iterations),
          last_(std::move(last_coefficients))
    {
    }

    Kind kind() const { return kind_; }
    int iterations() const { return iterations_; }
    const Eigen::VectorXd& last_coefficients() const { return last_; }

private:
    Kind kind_;
    int iterations_;
    Eigen::VectorXd last_;
};

std::string_view to_string(FitDiagnostic::Kind k);

struct PenaltyBlock {
    Eigen::Index start = 0;
    Eigen::Index size = 0;
    /// size x size, symmetric positive semidefinite
    Eigen::MatrixXd matrix;
    std::size_t term = 0;
    std::string label;
    bool null_space = false;
};

/// How a term maps onto coefficient columns, and what is needed to
/// re-evaluate it at new covariate values.
struct TermLayout {
    Term term;
    Eigen::Index start = 0;
    Eigen::Index size = 0;
    // smooth terms
    BSplineBasis<double> spline;
    /// num_basis x (num_basis - 1) reparametrization absorbing sum-to-zero
    Eigen::MatrixXd constraint;
    // random intercepts
    std::vector<std::string> levels;
};

struct DesignSystem {
    Eigen::MatrixXd X;
    Eigen::VectorXd offset;
    std::vector<std::string> column_names;
    std::vector<TermLayout> terms;
    std::vector<PenaltyBlock> penalties;
    bool has_intercept = false;

    Eigen::Index cols() const { return X.cols(); }
    /// sum_j lambda_j S_j embedded in a cols x cols matrix
    Eigen::MatrixXd total_penalty(const Eigen::VectorXd& lambdas) const;
};

DesignSystem build_design(const CensoredPanel& panel, const ModelSpec& spec);

struct PirlsOptions {
    double tolerance = 1e-8;
    int max_iterations = 200;
    double step_tolerance = 1e-9;
    /// |eta - offset| beyond this at the optimum is reported as separation
    double eta_limit = 30.0;
};

struct PirlsResult {
    Eigen::VectorXd coefficients;
    /// inverse penalized Fisher information
    Eigen::MatrixXd covariance;
    Eigen::VectorXd linear_predictor;
    Eigen::VectorXd fitted;
    double log_likelihood = 0.0;
    double deviance = 0.0;
    double penalized_deviance = 0.0;
    /// diagonal of (X'WX + S)^-1 X'WX
    Eigen::VectorXd edf;
    int iterations = 0;
    bool converged = false;
    std::string diagnostic;

    double total_edf() const { return edf.sum(); }
};

double log_likelihood(Family family, const Eigen::VectorXd& y, const Eigen::VectorXd& eta);

/// Penalized iteratively reweighted least squares (Fisher scoring) for
/// binomial_cloglog and poisson.
PirlsResult pirls(const DesignSystem& design, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& lambdas, Family family = Family::binomial_cloglog,
                  const PirlsOptions& options = {},
                  const std::optional<Eigen::VectorXd>& start = std::nullopt);

/// Penalized Newton-Raphson on the censored Poisson likelihood written in
/// terms of mu = exp(eta), with the observed Hessian.
PirlsResult fit_censored_poisson(const DesignSystem& design, const Eigen::VectorXd& y,
                                 const Eigen::VectorXd& lambdas, const PirlsOptions& options = {},
                                 const std::optional<Eigen::VectorXd>& start = std::nullopt);

/// Dispatches on the family.
PirlsResult fit_penalized(const DesignSystem& design, const Eigen::VectorXd& y,
                          const Eigen::VectorXd& lambdas, Family family,
                          const PirlsOptions& options = {},
                          const std::optional<Eigen::VectorXd>& start = std::nullopt);

/// Penalized score X' dl/deta - S beta at `coefficients`.
Eigen::VectorXd penalized_score(const DesignSystem& design, const Eigen::VectorXd& y,
                                const Eigen::VectorXd& lambdas, Family family,
                                const Eigen::VectorXd& coefficients);

/// Penalized Fisher information X'WX + S at `coefficients`.
Eigen::MatrixXd penalized_fisher_information(const DesignSystem& design, const Eigen::VectorXd& y,
                                             const Eigen::VectorXd& lambdas, Family family,
                                             const Eigen::VectorXd& coefficients);

/// Penalized observed information -d2(l)/d(beta)2 + S at `coefficients`.
/// Equals the Fisher information for poisson (canonical link); differs from
/// it for the binary families except in expectation.
Eigen::MatrixXd penalized_observed_information(const DesignSystem& design, const Eigen::VectorXd& y,
                                               const Eigen::VectorXd& lambdas, Family family,
                                               const Eigen::VectorXd& coefficients);

struct SelectionOptions {
    double log10_min = -4.0;
    double log10_max = 6.0;
    int grid_points = 21;
    int max_cycles = 20;
    PirlsOptions pirls;
};

struct SmoothingSelection {
    Eigen::VectorXd lambdas;
    double criterion = 0.0;
    PirlsResult fit;
};

double criterion_value(Criterion criterion, const PirlsResult& fit, Eigen::Index rows);

/// Coordinate-wise grid search, one block at a time, until a full cycle
/// leaves every block unchanged.
SmoothingSelection select_smoothing(const DesignSystem& design, const Eigen::VectorXd& y,
                                    Family family, Criterion criterion,
                                    const SelectionOptions& options = {});

struct TermSummary {
    std::string name;
    Term::Kind kind = Term::Kind::linear;
    double edf = 0.0;
    /// Wald statistic; reference df is max(1, round(edf)) for penalized terms
    double statistic = 0.0;
    double reference_df = 1.0;
    double p_value = 1.0;
    /// random intercepts: (1 / lambda)^(1/2)
    std::optional<double> std_dev;
};

struct FitResult {
    ModelSpec spec;
    std::vector<std::string> coefficient_names;
    Eigen::VectorXd coefficients;
    Eigen::MatrixXd covariance;
    Eigen::VectorXd lambdas;
    std::vector<std::string> lambda_labels;
    std::vector<TermSummary> terms;
    std::vector<TermLayout> layouts;
    double log_likelihood = 0.0;
    double deviance = 0.0;
    double criterion = 0.0;
    double total_edf = 0.0;
    int iterations = 0;
    bool converged = false;
    Eigen::Index rows = 0;

    double coefficient(const std::string& name) const;
    const TermLayout& layout(const std::string& term_name) const;
};

/// build_design, select_smoothing (when there are penalties) and a final
/// fit; throws FitDiagnostic when the final fit does not converge.
FitResult fit_model(const CensoredPanel& panel, const ModelSpec& spec,
                    const SelectionOptions& options = {});

/// Outcome vector a family expects from a panel: counts for poisson,
/// binary outcomes otherwise.
Eigen::VectorXd response_for(const CensoredPanel& panel, Family family);

struct SmoothCurve {
    Eigen::VectorXd x;
    Eigen::VectorXd fit;
    Eigen::VectorXd se;
    Eigen::VectorXd lower;
    Eigen::VectorXd upper;
    std::vector<bool> extrapolated;
};

/// Centered smooth with a pointwise 95% band from the coefficient
/// covariance. Points outside the training range are clamped and flagged.
SmoothCurve smooth_effect(const FitResult& fit, const std::string& term_name,
                          const Eigen::VectorXd& grid);

} // namespace rhem

#endif
