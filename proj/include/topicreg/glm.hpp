#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace topicreg {

enum class GlmKind { gaussian, binomial, multinomial };

std::string to_string(GlmKind kind);
GlmKind glm_kind_from_string(const std::string& name);

/// Response family: identity, logistic or softmax mean function over the
/// natural parameter.
struct GlmFamily {
    GlmKind kind = GlmKind::gaussian;
    std::size_t levels = 2;  ///< multinomial only

    static GlmFamily gaussian() { return {GlmKind::gaussian, 1}; }
    static GlmFamily binomial() { return {GlmKind::binomial, 2}; }
    static GlmFamily multinomial(std::size_t s) { return {GlmKind::multinomial, s}; }

    /// Rows of the coefficient matrix.
    std::size_t equations() const;
};

struct GlmOptions {
    bool intercept = true;
    double ridge = 1e-8;
    double separation_ridge = 1e-4;
    std::size_t max_iterations = 100;
    double tol = 1e-10;
};

struct GlmModel {
    GlmFamily family;
    bool intercept = true;
    /// equations() x (intercept + p); multinomial rows are levels 1..s-1
    /// against baseline level 0.
    Eigen::MatrixXd coefficients;
    std::vector<std::size_t> predictors;  ///< source columns of the design
    double log_likelihood = 0.0;
    double aic = 0.0;
    double sigma2 = 0.0;  ///< gaussian MLE variance
    double ridge = 0.0;   ///< penalty the fit was computed under
    bool separation = false;
    bool converged = false;
    std::size_t iterations = 0;

    std::size_t free_parameters() const;

    /// Gaussian: one column of means. Binomial: one column of P(y = 1).
    /// Multinomial: one column per level.
    Eigen::MatrixXd predict(const Eigen::MatrixXd& x) const;
};

/// Penalised maximum likelihood by iteratively reweighted least squares
/// (Newton with step halving). y holds values (gaussian), 0/1 (binomial) or
/// level indices (multinomial). Separable data is refitted under the larger
/// ridge and flagged. Throws on a rank-deficient design.
GlmModel fit_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GlmFamily& family,
                 const GlmOptions& options = {});

/// 2p - 2 logL.
double aic(const GlmModel& model);
double aic(double log_likelihood, std::size_t free_parameters);

struct StepUpResult {
    GlmModel model;
    std::vector<std::size_t> selected;  ///< candidate columns in order of entry
    std::vector<double> aic_trace;      ///< intercept-only first
};

/// Greedy forward selection by AIC starting from the intercept-only model.
/// Ties go to the lowest candidate index. Candidates whose fit is singular
/// are skipped for that step.
StepUpResult step_up_select(const Eigen::MatrixXd& candidates, const Eigen::VectorXd& y,
                            const GlmFamily& family, const GlmOptions& options = {});

nlohmann::json to_json(const GlmModel& model);
GlmModel glm_model_from_json(const nlohmann::json& j);

}  // namespace topicreg
