#include "topicreg/lda.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include "topicreg/error.hpp"
#include "topicreg/json_eigen.hpp"

namespace topicreg {

using nlohmann::json;

void LdaConfig::validate() const
{
    require(k >= 1, "LDA needs at least one topic");
    require(alpha > 0.0 && beta > 0.0, "LDA hyperparameters alpha and beta must be positive");
    require(xi > 0.0, "mean document length xi must be positive");
}

void check_topic_matrix(const TopicMatrix& phi, double tol)
{
    require(phi.rows() >= 1 && phi.cols() >= 1, "topic matrix is empty");
    require((phi.array() >= 0.0).all(), "topic matrix has negative entries");
    for (Eigen::Index l = 0; l < phi.rows(); ++l)
        require(std::abs(phi.row(l).sum() - 1.0) <= tol, "topic matrix row does not sum to one");
}

GibbsState::GibbsState(const Corpus& corpus, const LdaConfig& config, Rng& rng)
    : corpus_(&corpus),
      k_(config.k),
      v_(corpus.vocabulary.size()),
      alpha_(config.alpha),
      beta_(config.beta),
      topic_term_(config.k * corpus.vocabulary.size(), 0),
      doc_topic_(corpus.size() * config.k, 0),
      topic_total_(config.k, 0),
      weights_(config.k, 0.0)
{
    config.validate();
    require(!corpus.docs.empty(), "corpus has no documents");
    std::size_t total = 0;
    for (const auto& doc : corpus.docs) {
        require(!doc.empty(), "document '" + doc.id() + "' is empty");
        total += doc.length();
    }
    require(config.k <= total, "more topics than tokens");

    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(k_ - 1));
    z_.resize(corpus.size());
    for (std::size_t j = 0; j < corpus.size(); ++j) {
        const auto& tokens = corpus.docs[j].tokens();
        z_[j].resize(tokens.size());
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const std::uint32_t l = pick(rng);
            z_[j][i] = l;
            ++topic_term_[l * v_ + tokens[i]];
            ++doc_topic_[j * k_ + l];
            ++topic_total_[l];
        }
    }
}

void GibbsState::sweep(Rng& rng)
{
    const double v_beta = static_cast<double>(v_) * beta_;
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (std::size_t j = 0; j < corpus_->size(); ++j) {
        const auto& tokens = corpus_->docs[j].tokens();
        std::uint32_t* doc_row = &doc_topic_[j * k_];
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const TermId w = tokens[i];
            std::uint32_t l = z_[j][i];
            --topic_term_[l * v_ + w];
            --doc_row[l];
            --topic_total_[l];

            double total = 0.0;
            for (std::size_t t = 0; t < k_; ++t) {
                total += (topic_term_[t * v_ + w] + beta_) / (topic_total_[t] + v_beta) * (doc_row[t] + alpha_);
                weights_[t] = total;
            }
            const double u = unif(rng) * total;
            l = 0;
            while (l + 1 < k_ && weights_[l] <= u)
                ++l;

            z_[j][i] = l;
            ++topic_term_[l * v_ + w];
            ++doc_row[l];
            ++topic_total_[l];
        }
    }
}

bool GibbsState::consistent() const
{
    std::vector<std::uint32_t> tt(topic_term_.size(), 0), dt(doc_topic_.size(), 0), tot(k_, 0);
    for (std::size_t j = 0; j < z_.size(); ++j) {
        const auto& tokens = corpus_->docs[j].tokens();
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto l = z_[j][i];
            ++tt[l * v_ + tokens[i]];
            ++dt[j * k_ + l];
            ++tot[l];
        }
    }
    return tt == topic_term_ && dt == doc_topic_ && tot == topic_total_;
}

TopicMatrix GibbsState::phi() const
{
    TopicMatrix phi(k_, v_);
    const double v_beta = static_cast<double>(v_) * beta_;
    for (std::size_t l = 0; l < k_; ++l)
        for (std::size_t w = 0; w < v_; ++w)
            phi(l, w) = (topic_term_[l * v_ + w] + beta_) / (topic_total_[l] + v_beta);
    return phi;
}

Eigen::MatrixXd GibbsState::theta() const
{
    Eigen::MatrixXd theta(z_.size(), k_);
    const double k_alpha = static_cast<double>(k_) * alpha_;
    for (std::size_t j = 0; j < z_.size(); ++j) {
        const double n = static_cast<double>(z_[j].size());
        for (std::size_t l = 0; l < k_; ++l)
            theta(j, l) = (doc_topic_[j * k_ + l] + alpha_) / (n + k_alpha);
    }
    return theta;
}

LdaModel fit_lda_gibbs(const Corpus& corpus, const LdaConfig& config)
{
    Rng rng(config.seed);
    GibbsState state(corpus, config, rng);
    for (std::size_t it = 0; it < config.burnin; ++it)
        state.sweep(rng);

    LdaModel model;
    model.config = config;
    model.phi = TopicMatrix::Zero(config.k, corpus.vocabulary.size());
    model.theta = Eigen::MatrixXd::Zero(corpus.size(), config.k);
    for (std::size_t it = 1; it <= config.iterations; ++it) {
        state.sweep(rng);
        if (config.keep > 0 && it % config.keep == 0) {
            model.phi += state.phi();
            model.theta += state.theta();
            ++model.samples;
        }
    }
    if (model.samples == 0) {
        model.phi = state.phi();
        model.theta = state.theta();
        model.samples = 1;
    } else {
        model.phi /= static_cast<double>(model.samples);
        model.theta /= static_cast<double>(model.samples);
    }
    return model;
}

namespace {

std::size_t draw_length(const LdaConfig& config, const LengthModel& lengths, Rng& rng)
{
    if (const auto* range = std::get_if<UniformLength>(&lengths)) {
        require(range->min >= 1 && range->min <= range->max, "invalid document length range");
        std::uniform_int_distribution<std::size_t> pick(range->min, range->max);
        return pick(rng);
    }
    std::poisson_distribution<std::size_t> poisson(config.xi);
    std::size_t n = 0;
    while (n == 0)
        n = poisson(rng);
    return n;
}

Vocabulary synthetic_vocabulary(std::size_t v)
{
    std::vector<std::string> terms;
    terms.reserve(v);
    for (std::size_t i = 0; i < v; ++i)
        terms.push_back("w" + std::to_string(i));
    return Vocabulary(std::move(terms));
}

}  // namespace

SimulatedLda simulate_lda_corpus(const LdaConfig& config, std::size_t m, std::optional<TopicMatrix> phi,
                                 std::size_t vocabulary_size, LengthModel lengths,
                                 std::optional<TopicProportions> fixed_theta)
{
    config.validate();
    Rng rng(config.seed);
    SimulatedLda out;
    if (phi) {
        require(static_cast<std::size_t>(phi->rows()) == config.k, "phi must have k rows");
        check_topic_matrix(*phi);
        out.phi = std::move(*phi);
    } else {
        require(vocabulary_size >= 1, "vocabulary size must be positive");
        out.phi.resize(config.k, vocabulary_size);
        for (std::size_t l = 0; l < config.k; ++l) {
            const auto row = sample_dirichlet(vocabulary_size, config.beta, rng);
            for (std::size_t w = 0; w < vocabulary_size; ++w)
                out.phi(l, w) = row[w];
        }
    }
    if (fixed_theta) {
        require(static_cast<std::size_t>(fixed_theta->size()) == config.k, "fixed theta must have k entries");
        require(std::abs(fixed_theta->sum() - 1.0) < 1e-8 && (fixed_theta->array() >= 0).all(),
                "fixed theta must lie on the simplex");
    }
    const auto v = static_cast<std::size_t>(out.phi.cols());
    out.corpus.vocabulary = synthetic_vocabulary(v);
    out.theta.resize(m, config.k);

    std::vector<std::vector<double>> topic_rows(config.k, std::vector<double>(v));
    for (std::size_t l = 0; l < config.k; ++l)
        for (std::size_t w = 0; w < v; ++w)
            topic_rows[l][w] = out.phi(l, w);

    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t n = draw_length(config, lengths, rng);
        std::vector<double> theta;
        if (fixed_theta)
            theta.assign(fixed_theta->data(), fixed_theta->data() + config.k);
        else
            theta = sample_dirichlet(config.k, config.alpha, rng);
        for (std::size_t l = 0; l < config.k; ++l)
            out.theta(j, l) = theta[l];
        std::vector<TermId> tokens(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t z = sample_discrete(theta, rng);
            tokens[i] = static_cast<TermId>(sample_discrete(topic_rows[z], rng));
        }
        out.corpus.docs.emplace_back("doc" + std::to_string(j), std::move(tokens));
    }
    return out;
}

double log_likelihood_theta(const Document& doc, const TopicProportions& theta, const TopicMatrix& phi)
{
    require(theta.size() == phi.rows(), "theta and phi disagree on the number of topics");
    double ll = 0.0;
    for (const auto& c : doc.counts()) {
        require(c.term < phi.cols(), "document term outside the topic vocabulary");
        const double p = theta.dot(phi.col(c.term));
        if (p <= 0.0)
            return -std::numeric_limits<double>::infinity();
        ll += c.count * std::log(p);
    }
    return ll;
}

TopicProportions estimate_theta_mle(const Document& doc, const TopicMatrix& phi, const MleOptions& options)
{
    const auto k = phi.rows();
    // Words no topic can emit carry probability zero under every theta and
    // are dropped, like out-of-vocabulary words.
    std::vector<TermCount> usable;
    double n = 0.0;
    for (const auto& c : doc.counts()) {
        require(c.term < phi.cols(), "document term outside the topic vocabulary");
        if (phi.col(c.term).sum() > 0.0) {
            usable.push_back(c);
            n += c.count;
        }
    }
    require(!usable.empty(), "no in-vocabulary tokens");
    TopicProportions theta = TopicProportions::Constant(k, 1.0 / static_cast<double>(k));
    if (k == 1)
        return theta;

    auto loglik = [&](const TopicProportions& t) {
        double ll = 0.0;
        for (const auto& c : usable)
            ll += c.count * std::log(t.dot(phi.col(c.term)));
        return ll;
    };

    // grad is the gradient of l at theta and theta . grad = n. Concavity gives
    // l(theta*) - l(theta) <= max_l grad_l - n, so that gap is the stopping rule.
    // Each EM step is extended along its own direction while the likelihood
    // keeps rising; the longest step stops at the simplex boundary, which is
    // how components reach exactly zero. A zero component whose gradient
    // exceeds n is put back.
    constexpr double revive_at = 1e-3;
    TopicProportions grad(k);
    for (std::size_t it = 0; it < options.max_iterations; ++it) {
        grad.setZero();
        for (const auto& c : usable) {
            const auto column = phi.col(c.term);
            const double p = theta.dot(column);
            grad += (c.count / p) * column;
        }
        if (grad.maxCoeff() - n <= options.tol)
            break;

        Eigen::Index revive = -1;
        for (Eigen::Index l = 0; l < k; ++l)
            if (theta(l) == 0.0 && grad(l) - n > options.tol && (revive < 0 || grad(l) > grad(revive)))
                revive = l;
        if (revive >= 0) {
            theta(revive) = revive_at;
            theta /= theta.sum();
            continue;
        }

        TopicProportions next = theta.cwiseProduct(grad) / n;
        next /= next.sum();
        const TopicProportions dir = next - theta;
        double longest = std::numeric_limits<double>::infinity();
        Eigen::Index blocking = -1;
        for (Eigen::Index l = 0; l < k; ++l)
            if (dir(l) < 0.0 && theta(l) / -dir(l) < longest) {
                longest = theta(l) / -dir(l);
                blocking = l;
            }
        double best_ll = loglik(next);
        auto try_step = [&](double step) {
            TopicProportions candidate = (theta + step * dir).cwiseMax(0.0);
            if (step == longest && blocking >= 0)
                candidate(blocking) = 0.0;
            candidate /= candidate.sum();
            const double ll = loglik(candidate);
            if (!(ll > best_ll))
                return false;
            best_ll = ll;
            next = candidate;
            return true;
        };
        bool extended = true;
        for (double step = 2.0; step < longest && extended; step *= 2.0)
            extended = try_step(step);
        if (extended && std::isfinite(longest))
            try_step(longest);
        theta = next;
    }
    return theta;
}

std::vector<std::size_t> align_topics(const TopicMatrix& estimated, const TopicMatrix& truth)
{
    const auto ke = static_cast<std::size_t>(estimated.rows());
    const auto kt = static_cast<std::size_t>(truth.rows());
    require(estimated.cols() == truth.cols(), "topic matrices differ in vocabulary size");
    require(ke <= kt, "more estimated topics than true topics");
    Eigen::MatrixXd overlap(ke, kt);
    for (std::size_t e = 0; e < ke; ++e)
        for (std::size_t t = 0; t < kt; ++t)
            overlap(e, t) = estimated.row(e).cwiseMin(truth.row(t)).sum();

    std::vector<std::size_t> match(ke, kt);
    std::vector<bool> used_e(ke, false), used_t(kt, false);
    for (std::size_t step = 0; step < ke; ++step) {
        double best = -1.0;
        std::size_t be = 0, bt = 0;
        for (std::size_t e = 0; e < ke; ++e) {
            if (used_e[e])
                continue;
            for (std::size_t t = 0; t < kt; ++t)
                if (!used_t[t] && overlap(e, t) > best) {
                    best = overlap(e, t);
                    be = e;
                    bt = t;
                }
        }
        used_e[be] = used_t[bt] = true;
        match[be] = bt;
    }
    return match;
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b)
{
    return 0.5 * (a - b).cwiseAbs().sum();
}

json to_json(const LdaConfig& config)
{
    return json{{"k", config.k},         {"alpha", config.alpha},           {"beta", config.beta},
                {"xi", config.xi},       {"burnin", config.burnin},         {"iterations", config.iterations},
                {"keep", config.keep},   {"seed", config.seed}};
}

LdaConfig lda_config_from_json(const json& j)
{
    LdaConfig c;
    c.k = j.at("k").get<std::size_t>();
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.xi = j.value("xi", c.xi);
    c.burnin = j.value("burnin", c.burnin);
    c.iterations = j.value("iterations", c.iterations);
    c.keep = j.value("keep", c.keep);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

json to_json(const LdaModel& model)
{
    return json{{"phi", matrix_to_json(model.phi)},
                {"theta", matrix_to_json(model.theta)},
                {"config", to_json(model.config)},
                {"seed", model.config.seed},
                {"samples", model.samples}};
}

LdaModel lda_model_from_json(const json& j)
{
    LdaModel m;
    m.phi = matrix_from_json(j.at("phi"));
    m.theta = matrix_from_json(j.at("theta"));
    m.config = lda_config_from_json(j.at("config"));
    m.samples = j.value("samples", std::size_t{1});
    check_topic_matrix(m.phi);
    return m;
}

}  // namespace topicreg
