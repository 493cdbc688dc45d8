#include "topicreg/glm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include <Eigen/QR>

#include "topicreg/error.hpp"
#include "topicreg/json_eigen.hpp"

namespace topicreg {

using nlohmann::json;

std::string to_string(GlmKind kind)
{
    switch (kind) {
    case GlmKind::gaussian: return "gaussian";
    case GlmKind::binomial: return "binomial";
    case GlmKind::multinomial: return "multinomial";
    }
    return "gaussian";
}

GlmKind glm_kind_from_string(const std::string& name)
{
    if (name == "gaussian")
        return GlmKind::gaussian;
    if (name == "binomial")
        return GlmKind::binomial;
    if (name == "multinomial")
        return GlmKind::multinomial;
    throw Error("unknown GLM family '" + name + "'");
}

std::size_t GlmFamily::equations() const
{
    return kind == GlmKind::multinomial ? levels - 1 : 1;
}

std::size_t GlmModel::free_parameters() const
{
    const auto p = static_cast<std::size_t>(coefficients.size());
    return family.kind == GlmKind::gaussian ? p + 1 : p;
}

double aic(double log_likelihood, std::size_t free_parameters)
{
    return 2.0 * static_cast<double>(free_parameters) - 2.0 * log_likelihood;
}

double aic(const GlmModel& model)
{
    return aic(model.log_likelihood, model.free_parameters());
}

namespace {

Eigen::MatrixXd design(const Eigen::MatrixXd& x, bool intercept)
{
    if (!intercept)
        return x;
    Eigen::MatrixXd d(x.rows(), x.cols() + 1);
    d.col(0).setOnes();
    d.rightCols(x.cols()) = x;
    return d;
}

double log1pexp(double x)
{
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double x)
{
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Softmax over (0, eta_1, ..., eta_{s-1}) for every row of the linear
// predictors; returns n x s probabilities and accumulates log-normalisers.
Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& eta, Eigen::VectorXd* log_norm = nullptr)
{
    const auto n = eta.rows();
    const auto s = eta.cols() + 1;
    Eigen::MatrixXd p(n, s);
    if (log_norm)
        log_norm->resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double top = std::max(0.0, eta.row(i).maxCoeff());
        p(i, 0) = std::exp(-top);
        for (Eigen::Index r = 1; r < s; ++r)
            p(i, r) = std::exp(eta(i, r - 1) - top);
        const double z = p.row(i).sum();
        p.row(i) /= z;
        if (log_norm)
            (*log_norm)(i) = top + std::log(z);
    }
    return p;
}

struct Problem {
    const Eigen::MatrixXd& d;  // n x q design including intercept
    const Eigen::VectorXd& y;
    GlmFamily family;
    bool intercept;
    double ridge;
    bool penalise_intercept = false;

    bool penalised(Eigen::Index i) const { return penalise_intercept || !(intercept && i % q() == 0); }

    Eigen::Index q() const { return d.cols(); }
    Eigen::Index e() const { return static_cast<Eigen::Index>(family.equations()); }

    // Penalty mask over the flattened (equation-major) parameter vector.
    double penalty(const Eigen::VectorXd& beta) const
    {
        double s = 0.0;
        for (Eigen::Index i = 0; i < beta.size(); ++i)
            if (penalised(i))
                s += beta(i) * beta(i);
        return 0.5 * ridge * s;
    }

    double log_likelihood(const Eigen::VectorXd& beta) const
    {
        const auto n = d.rows();
        if (family.kind == GlmKind::binomial) {
            const Eigen::VectorXd eta = d * beta;
            double ll = 0.0;
            for (Eigen::Index i = 0; i < n; ++i)
                ll += y(i) * eta(i) - log1pexp(eta(i));
            return ll;
        }
        const Eigen::MatrixXd b = Eigen::Map<const Eigen::MatrixXd>(beta.data(), q(), e());
        const Eigen::MatrixXd eta = d * b;
        Eigen::VectorXd log_norm;
        softmax_rows(eta, &log_norm);
        double ll = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const auto level = static_cast<Eigen::Index>(y(i));
            ll += (level == 0 ? 0.0 : eta(i, level - 1)) - log_norm(i);
        }
        return ll;
    }

    double objective(const Eigen::VectorXd& beta) const { return log_likelihood(beta) - penalty(beta); }

    void gradient_hessian(const Eigen::VectorXd& beta, Eigen::VectorXd& g, Eigen::MatrixXd& h) const
    {
        const auto n = d.rows();
        const auto dim = beta.size();
        g.setZero(dim);
        h.setZero(dim, dim);
        if (family.kind == GlmKind::binomial) {
            const Eigen::VectorXd eta = d * beta;
            Eigen::VectorXd p(n), w(n);
            for (Eigen::Index i = 0; i < n; ++i) {
                p(i) = logistic(eta(i));
                w(i) = p(i) * (1.0 - p(i));
            }
            g = d.transpose() * (y - p);
            h = d.transpose() * w.asDiagonal() * d;
        } else {
            const Eigen::MatrixXd b = Eigen::Map<const Eigen::MatrixXd>(beta.data(), q(), e());
            const Eigen::MatrixXd p = softmax_rows(d * b);
            for (Eigen::Index r = 0; r < e(); ++r) {
                Eigen::VectorXd resid = -p.col(r + 1);
                for (Eigen::Index i = 0; i < n; ++i)
                    if (static_cast<Eigen::Index>(y(i)) == r + 1)
                        resid(i) += 1.0;
                g.segment(r * q(), q()) = d.transpose() * resid;
                for (Eigen::Index t = 0; t < e(); ++t) {
                    Eigen::VectorXd w = -p.col(r + 1).cwiseProduct(p.col(t + 1));
                    if (r == t)
                        w += p.col(r + 1);
                    h.block(r * q(), t * q(), q(), q()) = d.transpose() * w.asDiagonal() * d;
                }
            }
        }
        for (Eigen::Index i = 0; i < dim; ++i) {
            if (!penalised(i))
                continue;
            g(i) -= ridge * beta(i);
            h(i, i) += ridge;
        }
    }
};

struct NewtonResult {
    Eigen::VectorXd beta;
    bool converged = false;
    std::size_t iterations = 0;
};

// Newton ascent on the penalised log-likelihood with step halving.
NewtonResult newton(const Problem& problem, const GlmOptions& options)
{
    const Eigen::Index dim = problem.q() * problem.e();
    NewtonResult out;
    out.beta = Eigen::VectorXd::Zero(dim);
    if (dim == 0) {
        out.converged = true;
        return out;
    }
    double current = problem.objective(out.beta);
    Eigen::VectorXd g;
    Eigen::MatrixXd h;
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        out.iterations = it + 1;
        problem.gradient_hessian(out.beta, g, h);
        // A tiny jitter keeps the solve defined when probabilities saturate.
        h.diagonal().array() += 1e-12;
        const Eigen::VectorXd step = h.ldlt().solve(g);
        double scale = 1.0;
        Eigen::VectorXd candidate;
        double value = -std::numeric_limits<double>::infinity();
        for (int halving = 0; halving < 60; ++halving) {
            candidate = out.beta + scale * step;
            value = problem.objective(candidate);
            if (std::isfinite(value) && value >= current - 1e-12 * std::abs(current))
                break;
            scale *= 0.5;
        }
        if (!(value >= current - 1e-12 * std::abs(current))) {
            out.converged = g.lpNorm<Eigen::Infinity>() < 1e-6;
            break;
        }
        const double moved = (scale * step).lpNorm<Eigen::Infinity>();
        out.beta = candidate;
        const double gain = value - current;
        current = value;
        if (moved < options.tol || (gain >= 0.0 && gain < options.tol * (1.0 + std::abs(current)) && moved < 1e-6)) {
            out.converged = true;
            break;
        }
    }
    return out;
}

void check_responses(const Eigen::VectorXd& y, const GlmFamily& family)
{
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        require(std::isfinite(y(i)), "responses must be finite");
        if (family.kind == GlmKind::binomial)
            require(y(i) == 0.0 || y(i) == 1.0, "binomial responses must be 0 or 1");
        if (family.kind == GlmKind::multinomial)
            require(y(i) >= 0.0 && y(i) < static_cast<double>(family.levels) && y(i) == std::floor(y(i)),
                    "multinomial responses must be level indices");
    }
}

// Perfect or quasi-perfect separation drives fitted probabilities to 0 or 1.
bool saturated(const GlmModel& model, const Eigen::MatrixXd& x, const Eigen::VectorXd& y)
{
    const Eigen::MatrixXd p = model.predict(x);
    constexpr double edge = 1e-6;
    for (Eigen::Index i = 0; i < y.size(); ++i) {
        if (model.family.kind == GlmKind::binomial) {
            if (p(i, 0) < edge || p(i, 0) > 1.0 - edge)
                return true;
        } else if (p.row(i).maxCoeff() > 1.0 - edge || p.row(i).minCoeff() < edge * edge) {
            return true;
        }
    }
    return false;
}

// The separation refit also shrinks the intercepts: when a level is never
// observed the likelihood keeps rising along the intercept direction.
GlmModel fit_with_ridge(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GlmFamily& family,
                        const GlmOptions& options, double ridge, bool separation = false)
{
    const Eigen::MatrixXd d = design(x, options.intercept);
    GlmModel model;
    model.family = family;
    model.intercept = options.intercept;
    model.ridge = ridge;
    model.predictors.resize(static_cast<std::size_t>(x.cols()));
    for (std::size_t c = 0; c < model.predictors.size(); ++c)
        model.predictors[c] = c;
    const auto n = static_cast<double>(y.size());

    if (family.kind == GlmKind::gaussian) {
        Eigen::MatrixXd gram = d.transpose() * d;
        for (Eigen::Index i = options.intercept ? 1 : 0; i < gram.rows(); ++i)
            gram(i, i) += ridge;
        const Eigen::VectorXd beta = gram.ldlt().solve(d.transpose() * y);
        model.coefficients = beta.transpose();
        const double rss = (y - d * beta).squaredNorm();
        model.sigma2 = std::max(rss / n, 1e-300);
        model.log_likelihood = -0.5 * n * (std::log(2.0 * std::numbers::pi * model.sigma2) + 1.0);
        model.converged = true;
        model.iterations = 1;
    } else {
        const Problem problem{d, y, family, options.intercept, ridge, separation};
        const NewtonResult fit = newton(problem, options);
        model.coefficients = Eigen::Map<const Eigen::MatrixXd>(fit.beta.data(), problem.q(), problem.e()).transpose();
        model.log_likelihood = problem.log_likelihood(fit.beta);
        model.converged = fit.converged;
        model.iterations = fit.iterations;
    }
    model.aic = aic(model);
    return model;
}

}  // namespace

Eigen::MatrixXd GlmModel::predict(const Eigen::MatrixXd& x) const
{
    Eigen::MatrixXd used(x.rows(), static_cast<Eigen::Index>(predictors.size()));
    for (std::size_t c = 0; c < predictors.size(); ++c) {
        require(static_cast<Eigen::Index>(predictors[c]) < x.cols(), "design lacks a predictor column");
        used.col(static_cast<Eigen::Index>(c)) = x.col(static_cast<Eigen::Index>(predictors[c]));
    }
    const Eigen::MatrixXd d = design(used, intercept);
    require(d.cols() == coefficients.cols(), "design width does not match the coefficients");
    const Eigen::MatrixXd eta = d * coefficients.transpose();
    switch (family.kind) {
    case GlmKind::gaussian: return eta;
    case GlmKind::binomial: return eta.unaryExpr([](double v) { return logistic(v); });
    case GlmKind::multinomial: return softmax_rows(eta);
    }
    return eta;
}

GlmModel fit_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, const GlmFamily& family,
                 const GlmOptions& options)
{
    require(x.rows() == y.size(), "design rows do not match the number of responses");
    require(y.size() > 0, "no observations");
    require(x.allFinite(), "design contains missing or infinite values");
    if (family.kind == GlmKind::multinomial)
        require(family.levels >= 2, "multinomial family needs at least two levels");
    check_responses(y, family);

    const Eigen::MatrixXd d = design(x, options.intercept);
    if (d.cols() > 0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(d);
        qr.setThreshold(1e-10);
        if (qr.rank() < d.cols())
            throw Error("singular design");
    }

    GlmModel model = fit_with_ridge(x, y, family, options, options.ridge);
    if (family.kind != GlmKind::gaussian && (!model.converged || saturated(model, x, y))) {
        model = fit_with_ridge(x, y, family, options, std::max(options.separation_ridge, options.ridge), true);
        model.separation = true;
    }
    return model;
}

StepUpResult step_up_select(const Eigen::MatrixXd& candidates, const Eigen::VectorXd& y, const GlmFamily& family,
                            const GlmOptions& options)
{
    StepUpResult out;
    out.model = fit_glm(Eigen::MatrixXd(y.size(), 0), y, family, options);
    out.aic_trace.push_back(out.model.aic);
    std::vector<bool> used(static_cast<std::size_t>(candidates.cols()), false);
    Eigen::MatrixXd current(y.size(), 0);

    for (;;) {
        std::optional<GlmModel> best;
        std::size_t best_column = 0;
        for (Eigen::Index c = 0; c < candidates.cols(); ++c) {
            if (used[static_cast<std::size_t>(c)])
                continue;
            Eigen::MatrixXd trial(y.size(), current.cols() + 1);
            trial << current, candidates.col(c);
            GlmModel model;
            try {
                model = fit_glm(trial, y, family, options);
            } catch (const Error&) {
                continue;
            }
            if (!best || model.aic < best->aic) {
                best = std::move(model);
                best_column = static_cast<std::size_t>(c);
            }
        }
        if (!best || !(best->aic < out.aic_trace.back() - 1e-9))
            break;
        used[best_column] = true;
        out.selected.push_back(best_column);
        Eigen::MatrixXd grown(y.size(), current.cols() + 1);
        grown << current, candidates.col(static_cast<Eigen::Index>(best_column));
        current = std::move(grown);
        out.model = std::move(*best);
        out.aic_trace.push_back(out.model.aic);
    }
    out.model.predictors = out.selected;
    return out;
}

json to_json(const GlmModel& m)
{
    return json{{"family", to_string(m.family.kind)},
                {"levels", m.family.levels},
                {"intercept", m.intercept},
                {"coefficients", matrix_to_json(m.coefficients)},
                {"predictors", m.predictors},
                {"log_likelihood", m.log_likelihood},
                {"aic", m.aic},
                {"sigma2", m.sigma2},
                {"ridge", m.ridge},
                {"separation", m.separation},
                {"converged", m.converged},
                {"iterations", m.iterations}};
}

GlmModel glm_model_from_json(const json& j)
{
    GlmModel m;
    m.family.kind = glm_kind_from_string(j.at("family").get<std::string>());
    m.family.levels = j.value("levels", std::size_t{2});
    m.intercept = j.value("intercept", true);
    m.coefficients = matrix_from_json(j.at("coefficients"));
    m.predictors = j.at("predictors").get<std::vector<std::size_t>>();
    m.log_likelihood = j.value("log_likelihood", 0.0);
    m.aic = j.value("aic", 0.0);
    m.sigma2 = j.value("sigma2", 0.0);
    m.ridge = j.value("ridge", 0.0);
    m.separation = j.value("separation", false);
    m.converged = j.value("converged", false);
    m.iterations = j.value("iterations", std::size_t{0});
    const auto width = static_cast<Eigen::Index>(m.predictors.size()) + (m.intercept ? 1 : 0);
    require(m.coefficients.size() == 0 || m.coefficients.cols() == width, "GLM coefficients do not match predictors");
    return m;
}

}  // namespace topicreg
