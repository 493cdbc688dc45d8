#include "topicreg/slda.hpp"

#include <cmath>
#include <limits>

#include <boost/math/special_functions/digamma.hpp>

#include "topicreg/error.hpp"
#include "topicreg/json_eigen.hpp"
#include "topicreg/random.hpp"

namespace topicreg {

using nlohmann::json;

std::string to_string(SldaFamily family)
{
    return family == SldaFamily::gaussian ? "gaussian" : "bernoulli";
}

SldaFamily slda_family_from_string(const std::string& name)
{
    if (name == "gaussian")
        return SldaFamily::gaussian;
    if (name == "bernoulli")
        return SldaFamily::bernoulli;
    throw Error("unknown sLDA family '" + name + "'");
}

void SldaConfig::validate() const
{
    require(k >= 1, "sLDA needs at least one topic");
    require(alpha > 0.0, "sLDA alpha must be positive");
    require(topic_prior > 0.0, "sLDA topic prior must be positive");
    require(sigma2 > 0.0, "sLDA variance must be positive");
    require(e_iterations >= 1 && m_iterations >= 1, "sLDA iteration counts must be at least one");
}

namespace {

constexpr double kEtaRidge = 1e-4;  // bernoulli coefficients only
constexpr double kMinVariance = 1e-10;

double digamma(double x)
{
    return boost::math::digamma(x);
}

double log1p_exp(double x)
{
    return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

double logistic(double x)
{
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

// Variational parameters of one document.
struct DocState {
    Eigen::MatrixXd resp;   // n x k token-topic responsibilities
    Eigen::VectorXd gamma;  // variational Dirichlet
    Eigen::VectorXd total;  // column sums of resp
};

Eigen::VectorXd expected_log_theta(const Eigen::VectorXd& gamma)
{
    const double psi_total = digamma(gamma.sum());
    Eigen::VectorXd out(gamma.size());
    for (Eigen::Index l = 0; l < gamma.size(); ++l)
        out(l) = digamma(gamma(l)) - psi_total;
    return out;
}

void normalise_log(Eigen::VectorXd& logp)
{
    const double mx = logp.maxCoeff();
    logp = (logp.array() - mx).exp();
    logp /= logp.sum();
}

double entropy_and_expectation(const Eigen::VectorXd& r, const Eigen::VectorXd& base)
{
    double s = 0.0;
    for (Eigen::Index l = 0; l < r.size(); ++l)
        if (r(l) > 0.0)
            s += r(l) * (base(l) - std::log(r(l)));
    return s;
}

class SldaFitter {
public:
    SldaFitter(const Corpus& corpus, const SldaConfig& config, const TopicMatrix& initial_phi)
        : corpus_(corpus), config_(config), k_(config.k), v_(corpus.vocabulary.size())
    {
        config.validate();
        require(corpus.responses.has_value(), "sLDA needs document responses");
        const auto& responses = *corpus.responses;
        if (config.family == SldaFamily::gaussian)
            require(responses.kind != ResponseKind::categorical,
                    "gaussian sLDA needs numeric responses, got categorical");
        else
            require(responses.kind == ResponseKind::binary, "bernoulli sLDA needs binary responses");
        require(initial_phi.rows() == k_ && initial_phi.cols() == v_,
                "initial topics have the wrong shape");
        y_ = Eigen::Map<const Eigen::VectorXd>(responses.values.data(), static_cast<Eigen::Index>(responses.size()));

        phi_ = initial_phi;
        log_phi_ = phi_.array().log();
        eta_ = Eigen::VectorXd::Zero(k_);
        sigma2_ = config.sigma2;

        docs_.resize(corpus.size());
        for (std::size_t d = 0; d < corpus.size(); ++d) {
            const auto n = static_cast<Eigen::Index>(corpus.docs[d].length());
            require(n > 0, "document '" + corpus.docs[d].id() + "' is empty");
            auto& s = docs_[d];
            s.resp = Eigen::MatrixXd::Constant(n, k_, 1.0 / static_cast<double>(k_));
            s.total = s.resp.colwise().sum().transpose();
            s.gamma = Eigen::VectorXd::Constant(k_, config.alpha) + s.total;
        }
    }

    SldaModel run()
    {
        SldaModel model;
        for (std::size_t round = 0; round < config_.m_iterations; ++round) {
            for (std::size_t d = 0; d < docs_.size(); ++d)
                e_step(d);
            m_step();
            model.elbo.push_back(objective());
        }
        model.phi = phi_;
        model.eta = eta_;
        model.sigma2 = sigma2_;
        model.family = config_.family;
        model.alpha = config_.alpha;
        model.config = config_;
        model.zbar.resize(static_cast<Eigen::Index>(docs_.size()), k_);
        for (std::size_t d = 0; d < docs_.size(); ++d)
            model.zbar.row(d) = docs_[d].total.transpose() / static_cast<double>(docs_[d].resp.rows());
        return model;
    }

private:
    // Token objective for bernoulli backtracking: expectation/entropy part plus
    // y x - log(1 + e^x) at the implied E[zbar].
    double bernoulli_token_objective(const Eigen::VectorXd& r, const Eigen::VectorXd& base,
                                     const Eigen::VectorXd& others, double n, double y) const
    {
        const double x = eta_.dot(others + r) / n;
        return entropy_and_expectation(r, base) + y * x - log1p_exp(x);
    }

    void e_step(std::size_t d)
    {
        auto& s = docs_[d];
        const auto& tokens = corpus_.docs[d].tokens();
        const double n = static_cast<double>(tokens.size());
        const double y = y_(static_cast<Eigen::Index>(d));
        const bool gaussian = config_.family == SldaFamily::gaussian;
        Eigen::VectorXd elog = expected_log_theta(s.gamma);
        Eigen::VectorXd base(k_), logp(k_), others(k_);

        for (std::size_t sweep = 0; sweep < config_.e_iterations; ++sweep) {
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                const auto row = static_cast<Eigen::Index>(i);
                const Eigen::VectorXd old = s.resp.row(row).transpose();
                others = s.total - old;
                base = elog + log_phi_.col(tokens[i]);
                if (gaussian) {
                    const double eta_others = eta_.dot(others);
                    logp = base.array() + (y / (n * sigma2_)) * eta_.array()
                           - (2.0 * eta_others * eta_.array() + eta_.array().square()) / (2.0 * n * n * sigma2_);
                    normalise_log(logp);
                } else {
                    const double x0 = eta_.dot(s.total) / n;
                    logp = base + ((y - logistic(x0)) / n) * eta_;
                    normalise_log(logp);
                    // The linearised update is an ascent direction; halve the
                    // step until the exact token objective does not drop.
                    const double f_old = bernoulli_token_objective(old, base, others, n, y);
                    double step = 1.0;
                    Eigen::VectorXd candidate = logp;
                    while (bernoulli_token_objective(candidate, base, others, n, y) < f_old && step > 1e-12) {
                        step *= 0.5;
                        candidate = old + step * (logp - old);
                    }
                    if (step <= 1e-12)
                        candidate = old;
                    logp = candidate;
                }
                s.resp.row(row) = logp.transpose();
                s.total = others + logp;
            }
            s.gamma = Eigen::VectorXd::Constant(k_, config_.alpha) + s.total;
            elog = expected_log_theta(s.gamma);
        }
    }

    // E[zbar zbar^T] of one document.
    Eigen::MatrixXd second_moment(const DocState& s) const
    {
        const double n = static_cast<double>(s.resp.rows());
        Eigen::MatrixXd m = s.total * s.total.transpose() - s.resp.transpose() * s.resp;
        m.diagonal() += s.total;
        return m / (n * n);
    }

    void m_step()
    {
        Eigen::MatrixXd counts = Eigen::MatrixXd::Constant(k_, v_, config_.topic_prior);
        for (std::size_t d = 0; d < docs_.size(); ++d) {
            const auto& tokens = corpus_.docs[d].tokens();
            for (std::size_t i = 0; i < tokens.size(); ++i)
                counts.col(tokens[i]) += docs_[d].resp.row(static_cast<Eigen::Index>(i)).transpose();
        }
        phi_ = counts.array().colwise() / counts.rowwise().sum().array();
        log_phi_ = phi_.array().log();

        const auto m = static_cast<Eigen::Index>(docs_.size());
        Eigen::MatrixXd zbar(m, k_);
        for (Eigen::Index d = 0; d < m; ++d)
            zbar.row(d) = docs_[d].total.transpose() / static_cast<double>(docs_[d].resp.rows());

        if (config_.family == SldaFamily::gaussian) {
            if (config_.estimate_eta) {
                Eigen::MatrixXd ata = Eigen::MatrixXd::Zero(k_, k_);
                for (const auto& s : docs_)
                    ata += second_moment(s);
                const Eigen::VectorXd b = zbar.transpose() * y_;
                eta_ = ata.ldlt().solve(b);
                if (!eta_.allFinite())
                    eta_ = ata.completeOrthogonalDecomposition().solve(b);
                sigma2_ = std::max((y_.squaredNorm() - eta_.dot(b)) / static_cast<double>(m), kMinVariance);
            } else {
                sigma2_ = std::max(y_.squaredNorm() / static_cast<double>(m), kMinVariance);
            }
        } else if (config_.estimate_eta) {
            fit_logistic_eta(zbar);
        }
    }

    void fit_logistic_eta(const Eigen::MatrixXd& x)
    {
        auto objective = [&](const Eigen::VectorXd& eta) {
            const Eigen::VectorXd lin = x * eta;
            double f = -0.5 * kEtaRidge * eta.squaredNorm();
            for (Eigen::Index d = 0; d < lin.size(); ++d)
                f += y_(d) * lin(d) - log1p_exp(lin(d));
            return f;
        };
        double current = objective(eta_);
        for (int it = 0; it < 100; ++it) {
            const Eigen::VectorXd lin = x * eta_;
            Eigen::VectorXd grad = -kEtaRidge * eta_;
            Eigen::MatrixXd hess = kEtaRidge * Eigen::MatrixXd::Identity(k_, k_);
            for (Eigen::Index d = 0; d < lin.size(); ++d) {
                const double p = logistic(lin(d));
                grad += (y_(d) - p) * x.row(d).transpose();
                hess += p * (1.0 - p) * x.row(d).transpose() * x.row(d);
            }
            const Eigen::VectorXd delta = hess.ldlt().solve(grad);
            double step = 1.0;
            Eigen::VectorXd next = eta_ + delta;
            double value = objective(next);
            while (value < current && step > 1e-12) {
                step *= 0.5;
                next = eta_ + step * delta;
                value = objective(next);
            }
            if (value < current)
                break;
            const double gain = value - current;
            eta_ = next;
            current = value;
            if (gain < 1e-12)
                break;
        }
    }

    double objective() const
    {
        const double alpha = config_.alpha;
        const double k = static_cast<double>(k_);
        double total = config_.topic_prior * log_phi_.sum();
        if (config_.family == SldaFamily::bernoulli)
            total -= 0.5 * kEtaRidge * eta_.squaredNorm();
        for (std::size_t d = 0; d < docs_.size(); ++d) {
            const auto& s = docs_[d];
            const auto& tokens = corpus_.docs[d].tokens();
            const Eigen::VectorXd elog = expected_log_theta(s.gamma);
            double doc = std::lgamma(k * alpha) - k * std::lgamma(alpha) + (alpha - 1.0) * elog.sum();
            doc += -std::lgamma(s.gamma.sum());
            for (Eigen::Index l = 0; l < s.gamma.size(); ++l)
                doc += std::lgamma(s.gamma(l)) - (s.gamma(l) - 1.0) * elog(l);
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                const Eigen::VectorXd base = elog + log_phi_.col(tokens[i]);
                doc += entropy_and_expectation(s.resp.row(static_cast<Eigen::Index>(i)).transpose(), base);
            }
            const double n = static_cast<double>(tokens.size());
            const double y = y_(static_cast<Eigen::Index>(d));
            const double x = eta_.dot(s.total) / n;
            if (config_.family == SldaFamily::gaussian) {
                const double quad = eta_.dot(second_moment(s) * eta_);
                doc += -0.5 * std::log(2.0 * M_PI * sigma2_) - (y * y - 2.0 * y * x + quad) / (2.0 * sigma2_);
            } else {
                doc += y * x - log1p_exp(x);
            }
            total += doc;
        }
        return total;
    }

    const Corpus& corpus_;
    SldaConfig config_;
    Eigen::Index k_;
    Eigen::Index v_;
    Eigen::VectorXd y_;
    TopicMatrix phi_;
    Eigen::MatrixXd log_phi_;
    Eigen::VectorXd eta_;
    double sigma2_;
    std::vector<DocState> docs_;
};

}  // namespace

TopicMatrix initial_slda_topics(std::size_t k, std::size_t v, std::uint64_t seed)
{
    Rng rng(seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    TopicMatrix phi(k, v);
    for (std::size_t l = 0; l < k; ++l) {
        for (std::size_t w = 0; w < v; ++w)
            phi(l, w) = unif(rng) + 1.0 / static_cast<double>(v);
        phi.row(l) /= phi.row(l).sum();
    }
    return phi;
}

SldaModel fit_slda(const Corpus& corpus, const SldaConfig& config, const TopicMatrix& initial_phi)
{
    SldaFitter fitter(corpus, config, initial_phi);
    return fitter.run();
}

SldaModel fit_slda(const Corpus& corpus, const SldaConfig& config)
{
    config.validate();
    return fit_slda(corpus, config, initial_slda_topics(config.k, corpus.vocabulary.size(), config.seed));
}

Eigen::VectorXd infer_zbar_heldout(const Document& doc, const SldaModel& model,
                                   const HeldoutInferenceOptions& options)
{
    const auto k = model.phi.rows();
    std::vector<TermCount> usable;
    double n = 0.0;
    for (const auto& c : doc.counts()) {
        require(c.term < model.phi.cols(), "document term outside the topic vocabulary");
        if (model.phi.col(c.term).sum() > 0.0) {
            usable.push_back(c);
            n += c.count;
        }
    }
    require(!usable.empty(), "no in-vocabulary tokens");
    if (k == 1)
        return Eigen::VectorXd::Ones(1);

    // Tokens of the same word share responsibilities when no response term
    // couples them.
    Eigen::MatrixXd resp = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(usable.size()), k, 1.0 / k);
    Eigen::VectorXd gamma = Eigen::VectorXd::Constant(k, model.alpha + n / static_cast<double>(k));
    Eigen::VectorXd zbar = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    Eigen::VectorXd logp(k);
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        const Eigen::VectorXd elog = expected_log_theta(gamma);
        Eigen::VectorXd total = Eigen::VectorXd::Zero(k);
        for (std::size_t u = 0; u < usable.size(); ++u) {
            for (Eigen::Index l = 0; l < k; ++l) {
                const double p = model.phi(l, usable[u].term);
                logp(l) = p > 0.0 ? elog(l) + std::log(p) : -std::numeric_limits<double>::infinity();
            }
            normalise_log(logp);
            resp.row(static_cast<Eigen::Index>(u)) = logp.transpose();
            total += usable[u].count * logp;
        }
        gamma = Eigen::VectorXd::Constant(k, model.alpha) + total;
        const Eigen::VectorXd next = total / n;
        const double change = (next - zbar).cwiseAbs().maxCoeff();
        zbar = next;
        if (change < options.tol)
            break;
    }
    return zbar / zbar.sum();
}

double predict_response_slda(const Document& doc, const SldaModel& model)
{
    const double x = model.eta.dot(infer_zbar_heldout(doc, model));
    return model.family == SldaFamily::gaussian ? x : logistic(x);
}

json to_json(const SldaConfig& c)
{
    return json{{"k", c.k},
                {"alpha", c.alpha},
                {"topic_prior", c.topic_prior},
                {"sigma2", c.sigma2},
                {"e_iterations", c.e_iterations},
                {"m_iterations", c.m_iterations},
                {"family", to_string(c.family)},
                {"estimate_eta", c.estimate_eta},
                {"seed", c.seed}};
}

SldaConfig slda_config_from_json(const json& j)
{
    SldaConfig c;
    c.k = j.at("k").get<std::size_t>();
    c.alpha = j.value("alpha", c.alpha);
    c.topic_prior = j.value("topic_prior", c.topic_prior);
    c.sigma2 = j.value("sigma2", c.sigma2);
    c.e_iterations = j.value("e_iterations", c.e_iterations);
    c.m_iterations = j.value("m_iterations", c.m_iterations);
    c.family = slda_family_from_string(j.value("family", std::string("gaussian")));
    c.estimate_eta = j.value("estimate_eta", true);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

json to_json(const SldaModel& m)
{
    return json{{"phi", matrix_to_json(m.phi)},       {"eta", vector_to_json(m.eta)},
                {"sigma2", m.sigma2},                 {"family", to_string(m.family)},
                {"alpha", m.alpha},                   {"config", to_json(m.config)},
                {"elbo", m.elbo}};
}

SldaModel slda_model_from_json(const json& j)
{
    SldaModel m;
    m.phi = matrix_from_json(j.at("phi"));
    m.eta = vector_from_json(j.at("eta"));
    m.sigma2 = j.at("sigma2").get<double>();
    m.family = slda_family_from_string(j.at("family").get<std::string>());
    m.alpha = j.value("alpha", 1.0);
    m.config = slda_config_from_json(j.at("config"));
    m.elbo = j.value("elbo", std::vector<double>{});
    require(m.eta.size() == m.phi.rows(), "sLDA eta length differs from topic count");
    return m;
}

}  // namespace topicreg
