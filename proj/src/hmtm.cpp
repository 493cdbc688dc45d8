#include "topicreg/hmtm.hpp"

#include <cmath>
#include <limits>

#include <Eigen/LU>
#include <Eigen/QR>

#include "topicreg/error.hpp"
#include "topicreg/json_eigen.hpp"
#include "topicreg/parallel.hpp"

namespace topicreg {

using nlohmann::json;

Eigen::MatrixXd HmtmConfig::gamma_matrix() const
{
    if (gamma.size() == 0)
        return Eigen::MatrixXd::Constant(k, k, 1.0 / static_cast<double>(k));
    return gamma;
}

void HmtmConfig::validate() const
{
    require(k >= 1, "HMTM needs at least one topic");
    require(beta > 0.0 && alpha > 0.0, "HMTM priors beta and alpha must be positive");
    const Eigen::MatrixXd g = gamma_matrix();
    require(static_cast<std::size_t>(g.rows()) == k && static_cast<std::size_t>(g.cols()) == k,
            "transition prior must be k x k");
    require((g.array() > 0.0).all(), "transition prior entries must be positive");
}

Eigen::MatrixXd persistent_priors(std::size_t k)
{
    require(k >= 1, "persistent priors need k >= 1");
    const double off = 0.01 / static_cast<double>(k);
    Eigen::MatrixXd gamma = Eigen::MatrixXd::Constant(k, k, off);
    gamma.diagonal().setConstant(0.99 + off);
    return gamma;
}

double ScaledFB::backward_log_likelihood(const Eigen::VectorXd& emission_first, const Eigen::VectorXd& pi) const
{
    double ll = std::log(pi.cwiseProduct(emission_first).dot(backward.row(0).transpose()));
    for (Eigen::Index t = 1; t < scale.size(); ++t)
        ll -= std::log(scale(t));
    return ll;
}

namespace {

void check_row_stochastic(const Eigen::MatrixXd& m, const char* what)
{
    require(m.rows() == m.cols() && m.rows() >= 1, std::string(what) + " must be square");
    require((m.array() >= 0.0).all(), std::string(what) + " has negative entries");
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        require(std::abs(m.row(r).sum() - 1.0) < 1e-8, std::string(what) + " is not row-stochastic");
}

// Tokens every topic can emit; words with an all-zero emission column count
// as out of vocabulary.
std::vector<TermId> emittable_tokens(const Document& doc, const TopicMatrix& phi)
{
    std::vector<TermId> out;
    out.reserve(doc.length());
    for (TermId w : doc.tokens()) {
        require(w < phi.cols(), "document term outside the topic vocabulary");
        if (phi.col(w).sum() > 0.0)
            out.push_back(w);
    }
    return out;
}

ScaledFB forward_backward(const std::vector<TermId>& tokens, const TopicMatrix& phi,
                          const Eigen::MatrixXd& transitions, const Eigen::VectorXd& pi)
{
    const auto n = static_cast<Eigen::Index>(tokens.size());
    const auto k = phi.rows();
    require(n > 0, "document is empty");
    require(transitions.rows() == k && transitions.cols() == k && pi.size() == k,
            "HMM parameter dimensions disagree");
    ScaledFB fb;
    fb.forward.resize(n, k);
    fb.backward.resize(n, k);
    fb.scale.resize(n);

    auto emission = [&](Eigen::Index t) { return phi.col(tokens[static_cast<std::size_t>(t)]); };
    for (Eigen::Index t = 0; t < n; ++t) {
        Eigen::VectorXd a = t == 0 ? Eigen::VectorXd(pi.cwiseProduct(emission(0)))
                                   : Eigen::VectorXd((fb.forward.row(t - 1) * transitions).transpose().cwiseProduct(emission(t)));
        const double s = a.sum();
        if (!(s > 0.0))
            throw Error("impossible observation at position " + std::to_string(t));
        fb.forward.row(t) = a.transpose() / s;
        fb.scale(t) = 1.0 / s;
        fb.log_likelihood += std::log(s);
    }
    fb.backward.row(n - 1).setOnes();
    for (Eigen::Index t = n - 2; t >= 0; --t) {
        const Eigen::VectorXd next = emission(t + 1).cwiseProduct(fb.backward.row(t + 1).transpose());
        fb.backward.row(t) = (transitions * next).transpose() * fb.scale(t + 1);
    }
    return fb;
}

struct ExpectedCounts {
    Eigen::MatrixXd transitions;  // k x k
    Eigen::VectorXd start;        // k
    double log_likelihood = 0.0;
};

// Posterior expected transition and start counts; calls `emit(t, posterior)`
// for every position so callers can accumulate emission counts.
template <typename Emit>
ExpectedCounts expected_counts(const std::vector<TermId>& tokens, const TopicMatrix& phi,
                               const Eigen::MatrixXd& transitions, const Eigen::VectorXd& pi, Emit&& emit)
{
    const ScaledFB fb = forward_backward(tokens, phi, transitions, pi);
    const auto k = phi.rows();
    const auto n = fb.forward.rows();
    ExpectedCounts out;
    out.transitions = Eigen::MatrixXd::Zero(k, k);
    out.log_likelihood = fb.log_likelihood;
    for (Eigen::Index t = 0; t < n; ++t) {
        Eigen::VectorXd post = fb.forward.row(t).cwiseProduct(fb.backward.row(t)).transpose();
        post /= post.sum();
        if (t == 0)
            out.start = post;
        emit(t, post);
        if (t + 1 < n) {
            const Eigen::VectorXd next =
                phi.col(tokens[static_cast<std::size_t>(t + 1)]).cwiseProduct(fb.backward.row(t + 1).transpose())
                * fb.scale(t + 1);
            out.transitions += (fb.forward.row(t).transpose() * next.transpose()).cwiseProduct(transitions);
        }
    }
    return out;
}

double sum_xlogy(const Eigen::MatrixXd& weights, const Eigen::MatrixXd& values)
{
    double s = 0.0;
    for (Eigen::Index i = 0; i < weights.size(); ++i)
        if (weights.data()[i] != 0.0)
            s += weights.data()[i] * std::log(values.data()[i]);
    return s;
}

Eigen::MatrixXd normalise_rows(Eigen::MatrixXd m)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        m.row(r) /= m.row(r).sum();
    return m;
}

Eigen::MatrixXd initial_transitions(const Eigen::MatrixXd& gamma)
{
    const auto k = gamma.rows();
    return 0.5 * normalise_rows(gamma) + Eigen::MatrixXd::Constant(k, k, 0.5 / static_cast<double>(k));
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

ScaledFB scaled_forward_backward(const Document& doc, const TopicMatrix& phi, const Eigen::MatrixXd& transitions,
                                 const Eigen::VectorXd& pi)
{
    for (TermId w : doc.tokens())
        require(w < phi.cols(), "document term outside the topic vocabulary");
    return forward_backward(doc.tokens(), phi, transitions, pi);
}

std::vector<TermId> simulate_hmtm_tokens(const TopicMatrix& phi, const Eigen::MatrixXd& transitions,
                                         const Eigen::VectorXd& start, std::size_t length, Rng& rng,
                                         std::vector<std::uint32_t>* states)
{
    const auto k = static_cast<std::size_t>(phi.rows());
    const auto v = static_cast<std::size_t>(phi.cols());
    std::vector<std::vector<double>> emit(k, std::vector<double>(v)), move(k, std::vector<double>(k));
    for (std::size_t l = 0; l < k; ++l) {
        for (std::size_t w = 0; w < v; ++w)
            emit[l][w] = phi(l, w);
        for (std::size_t s = 0; s < k; ++s)
            move[l][s] = transitions(l, s);
    }
    const std::vector<double> first(start.data(), start.data() + k);
    std::vector<TermId> tokens(length);
    if (states)
        states->assign(length, 0);
    std::size_t z = 0;
    for (std::size_t i = 0; i < length; ++i) {
        z = i == 0 ? sample_discrete(first, rng) : sample_discrete(move[z], rng);
        tokens[i] = static_cast<TermId>(sample_discrete(emit[z], rng));
        if (states)
            (*states)[i] = static_cast<std::uint32_t>(z);
    }
    return tokens;
}

SimulatedHmtm simulate_hmtm_corpus(const HmtmConfig& config, std::size_t m, const std::vector<std::size_t>& lengths,
                                   std::optional<TopicMatrix> phi, std::size_t vocabulary_size)
{
    config.validate();
    require(lengths.size() == m, "one length per document is required");
    Rng rng(config.seed);
    const Eigen::MatrixXd gamma = config.gamma_matrix();
    const auto k = config.k;
    SimulatedHmtm out;
    if (phi) {
        require(static_cast<std::size_t>(phi->rows()) == k, "phi must have k rows");
        check_topic_matrix(*phi);
        out.truth.phi = std::move(*phi);
    } else {
        out.truth.phi.resize(k, vocabulary_size);
        for (std::size_t l = 0; l < k; ++l) {
            const auto row = sample_dirichlet(vocabulary_size, config.beta, rng);
            for (std::size_t w = 0; w < vocabulary_size; ++w)
                out.truth.phi(l, w) = row[w];
        }
    }
    out.truth.config = config;
    out.corpus.vocabulary = synthetic_vocabulary(static_cast<std::size_t>(out.truth.phi.cols()));
    for (std::size_t j = 0; j < m; ++j) {
        require(lengths[j] >= 1, "document lengths must be at least one");
        const auto pi = sample_dirichlet(k, config.alpha, rng);
        Eigen::MatrixXd theta(k, k);
        for (std::size_t l = 0; l < k; ++l) {
            std::vector<double> row_prior(k);
            for (std::size_t s = 0; s < k; ++s)
                row_prior[s] = gamma(l, s);
            const auto row = sample_dirichlet(row_prior, rng);
            for (std::size_t s = 0; s < k; ++s)
                theta(l, s) = row[s];
        }
        Eigen::VectorXd start = Eigen::Map<const Eigen::VectorXd>(pi.data(), static_cast<Eigen::Index>(k));
        std::vector<std::uint32_t> states;
        auto tokens = simulate_hmtm_tokens(out.truth.phi, theta, start, lengths[j], rng, &states);
        out.corpus.docs.emplace_back("doc" + std::to_string(j), std::move(tokens));
        out.truth.transitions.push_back(std::move(theta));
        out.truth.starts.push_back(std::move(start));
        out.states.push_back(std::move(states));
    }
    return out;
}

HmtmModel fit_hmtm(const Corpus& corpus, const HmtmConfig& config)
{
    config.validate();
    require(!corpus.docs.empty(), "corpus has no documents");
    for (const auto& doc : corpus.docs)
        require(!doc.empty(), "document '" + doc.id() + "' is empty");
    const auto k = static_cast<Eigen::Index>(config.k);
    const auto v = static_cast<Eigen::Index>(corpus.vocabulary.size());
    const std::size_t m = corpus.size();
    const Eigen::MatrixXd gamma = config.gamma_matrix();
    const double beta = config.beta;
    const double alpha = config.alpha;

    Rng rng(config.seed);
    std::uniform_real_distribution<double> unif(0.5, 1.5);
    Eigen::VectorXd frequency = Eigen::VectorXd::Constant(v, beta);
    for (const auto& doc : corpus.docs)
        for (const auto& c : doc.counts())
            frequency(c.term) += c.count;

    HmtmModel model;
    model.config = config;
    model.phi.resize(k, v);
    for (Eigen::Index l = 0; l < k; ++l) {
        for (Eigen::Index w = 0; w < v; ++w)
            model.phi(l, w) = frequency(w) * (k == 1 ? 1.0 : unif(rng));
        model.phi.row(l) /= model.phi.row(l).sum();
    }
    model.transitions.assign(m, initial_transitions(gamma));
    model.starts.assign(m, Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k)));

    std::vector<ExpectedCounts> counts(m);
    std::vector<Eigen::MatrixXd> emissions(m);
    double previous = -std::numeric_limits<double>::infinity();
    for (std::size_t it = 0; it < config.em_iterations; ++it) {
        parallel_for(m, config.threads, [&](std::size_t j) {
            const auto& tokens = corpus.docs[j].tokens();
            Eigen::MatrixXd local = Eigen::MatrixXd::Zero(k, v);
            counts[j] = expected_counts(tokens, model.phi, model.transitions[j], model.starts[j],
                                        [&](Eigen::Index t, const Eigen::VectorXd& post) {
                                            local.col(tokens[static_cast<std::size_t>(t)]) += post;
                                        });
            emissions[j] = std::move(local);
        });

        double objective = beta * model.phi.array().log().sum();
        Eigen::MatrixXd emission_counts = Eigen::MatrixXd::Zero(k, v);
        for (std::size_t j = 0; j < m; ++j) {
            objective += counts[j].log_likelihood + sum_xlogy(gamma, model.transitions[j])
                         + alpha * model.starts[j].array().log().sum();
            emission_counts += emissions[j];
        }
        model.objective.push_back(objective);

        model.phi = normalise_rows((emission_counts.array() + beta).matrix());
        for (std::size_t j = 0; j < m; ++j) {
            model.transitions[j] = normalise_rows(counts[j].transitions + gamma);
            model.starts[j] = (counts[j].start.array() + alpha).matrix();
            model.starts[j] /= model.starts[j].sum();
        }
        if (std::isfinite(previous) && std::abs(objective - previous) <= config.tol * std::abs(previous)) {
            model.converged = true;
            break;
        }
        previous = objective;
    }
    if (!model.converged && static_cast<Eigen::Index>(config.k) > v)
        throw Error("HMTM with more topics than vocabulary terms did not stabilise");
    return model;
}

HeldoutTransition estimate_transition_heldout(const Document& doc, const TopicMatrix& phi,
                                              const Eigen::MatrixXd& gamma, double tol, std::size_t max_iter,
                                              double alpha)
{
    const auto k = phi.rows();
    require(gamma.rows() == k && gamma.cols() == k, "transition prior must be k x k");
    require((gamma.array() > 0.0).all() && alpha > 0.0, "priors must be positive");
    const auto tokens = emittable_tokens(doc, phi);
    require(tokens.size() >= 2, "insufficient sequence");

    HeldoutTransition out;
    out.transitions = initial_transitions(gamma);
    out.start = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    double previous = -std::numeric_limits<double>::infinity();
    try {
        for (std::size_t it = 0; it < max_iter; ++it) {
            const auto counts = expected_counts(tokens, phi, out.transitions, out.start,
                                                [](Eigen::Index, const Eigen::VectorXd&) {});
            const double log_posterior = counts.log_likelihood + sum_xlogy(gamma, out.transitions)
                                         + alpha * out.start.array().log().sum();
            if (!std::isfinite(log_posterior))
                break;
            out.log_posterior.push_back(log_posterior);
            out.iterations = it + 1;
            if (std::isfinite(previous) && std::abs(log_posterior - previous) <= tol * std::abs(previous)) {
                out.stable = true;
                break;
            }
            previous = log_posterior;
            out.transitions = normalise_rows(counts.transitions + gamma);
            out.start = (counts.start.array() + alpha).matrix();
            out.start /= out.start.sum();
        }
    } catch (const Error&) {
        out.stable = false;
    }
    return out;
}

TopicProportions equilibrium_distribution(const Eigen::MatrixXd& transitions)
{
    check_row_stochastic(transitions, "transition matrix");
    const auto k = transitions.rows();
    if (k == 1)
        return TopicProportions::Ones(1);

    const Eigen::MatrixXd a = transitions.transpose() - Eigen::MatrixXd::Identity(k, k);
    Eigen::FullPivLU<Eigen::MatrixXd> lu(a);
    lu.setThreshold(1e-10);
    if (lu.rank() < k - 1)
        throw Error("non-unique equilibrium");

    TopicProportions theta;
    if (k <= 100) {
        Eigen::MatrixXd augmented(k + 1, k);
        augmented << a, Eigen::RowVectorXd::Ones(k);
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(k + 1);
        rhs(k) = 1.0;
        const auto qr = augmented.colPivHouseholderQr();
        theta = qr.solve(rhs);
        // One step of iterative refinement.
        theta += qr.solve(rhs - augmented * theta);
    } else {
        // The lazy chain shares the stationary distribution and is aperiodic.
        const Eigen::MatrixXd lazy = 0.5 * (transitions + Eigen::MatrixXd::Identity(k, k));
        theta = TopicProportions::Constant(k, 1.0 / static_cast<double>(k));
        for (int it = 0; it < 100000; ++it) {
            TopicProportions next = lazy.transpose() * theta;
            next /= next.sum();
            const double change = (next - theta).cwiseAbs().maxCoeff();
            theta = next;
            if (change < 1e-15)
                break;
        }
    }
    theta = theta.cwiseMax(0.0);
    theta /= theta.sum();
    return theta;
}

TopicProportions row_average_distribution(const Eigen::MatrixXd& transitions)
{
    check_row_stochastic(transitions, "transition matrix");
    TopicProportions theta = transitions.colwise().mean().transpose();
    return theta / theta.sum();
}

json to_json(const HmtmConfig& c)
{
    return json{{"k", c.k},
                {"beta", c.beta},
                {"alpha", c.alpha},
                {"gamma", matrix_to_json(c.gamma_matrix())},
                {"em_iterations", c.em_iterations},
                {"tol", c.tol},
                {"seed", c.seed}};
}

HmtmConfig hmtm_config_from_json(const json& j)
{
    HmtmConfig c;
    c.k = j.at("k").get<std::size_t>();
    c.beta = j.value("beta", c.beta);
    c.alpha = j.value("alpha", c.alpha);
    if (j.contains("gamma"))
        c.gamma = matrix_from_json(j.at("gamma"));
    c.em_iterations = j.value("em_iterations", c.em_iterations);
    c.tol = j.value("tol", c.tol);
    c.seed = j.value("seed", c.seed);
    c.validate();
    return c;
}

json to_json(const HmtmModel& m)
{
    json transitions = json::array();
    for (const auto& t : m.transitions)
        transitions.push_back(matrix_to_json(t));
    json starts = json::array();
    for (const auto& s : m.starts)
        starts.push_back(vector_to_json(s));
    return json{{"phi", matrix_to_json(m.phi)}, {"transitions", std::move(transitions)},
                {"starts", std::move(starts)},  {"config", to_json(m.config)},
                {"objective", m.objective},     {"converged", m.converged}};
}

HmtmModel hmtm_model_from_json(const json& j)
{
    HmtmModel m;
    m.phi = matrix_from_json(j.at("phi"));
    for (const auto& t : j.at("transitions"))
        m.transitions.push_back(matrix_from_json(t));
    for (const auto& s : j.at("starts"))
        m.starts.push_back(vector_from_json(s));
    m.config = hmtm_config_from_json(j.at("config"));
    m.objective = j.value("objective", std::vector<double>{});
    m.converged = j.value("converged", false);
    check_topic_matrix(m.phi);
    return m;
}

}  // namespace topicreg
