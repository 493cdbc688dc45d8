#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "topicreg/corpus.hpp"
#include "topicreg/lda.hpp"

namespace topicreg {

struct HmtmConfig {
    std::size_t k = 2;
    double beta = 0.01;   ///< Topic smoothing
    double alpha = 1.0;   ///< Start-probability prior
    Eigen::MatrixXd gamma;  ///< k x k transition prior rows; empty means symmetric 1/k
    std::size_t em_iterations = 200;
    double tol = 1e-6;
    std::uint64_t seed = 1;
    unsigned threads = 1;  ///< per-document E-steps

    /// gamma, or the symmetric 1/k default when unset.
    Eigen::MatrixXd gamma_matrix() const;
    void validate() const;
};

struct HmtmModel {
    TopicMatrix phi;  ///< k x v shared emissions
    std::vector<Eigen::MatrixXd> transitions;  ///< per-document k x k
    std::vector<Eigen::VectorXd> starts;       ///< per-document start vectors
    HmtmConfig config;
    std::vector<double> objective;  ///< log-likelihood + log-prior per EM iteration
    bool converged = false;
};

/// Scaled forward-backward tables. forward rows are filtered state
/// distributions; backward rows are scaled so that forward .* backward gives
/// the posterior state marginals. scale[t] = 1 / P(o_t | o_<t).
struct ScaledFB {
    Eigen::MatrixXd forward;   ///< n x k
    Eigen::MatrixXd backward;  ///< n x k
    Eigen::VectorXd scale;     ///< n
    double log_likelihood = 0.0;

    /// P(O) rebuilt from the backward pass and the start vector.
    double backward_log_likelihood(const Eigen::VectorXd& emission_first,
                                   const Eigen::VectorXd& pi) const;
};

/// Diagonal 0.99 + 0.01/k, off-diagonal 0.01/k.
Eigen::MatrixXd persistent_priors(std::size_t k);

struct SimulatedHmtm {
    Corpus corpus;
    HmtmModel truth;
    std::vector<std::vector<std::uint32_t>> states;
};

/// Generative HMTM. Topics are drawn from Dir(beta) over `vocabulary_size`
/// terms unless `phi` is supplied.
SimulatedHmtm simulate_hmtm_corpus(const HmtmConfig& config, std::size_t m,
                                   const std::vector<std::size_t>& lengths,
                                   std::optional<TopicMatrix> phi = {},
                                   std::size_t vocabulary_size = 100);

/// Single-document draw with known parameters.
std::vector<TermId> simulate_hmtm_tokens(const TopicMatrix& phi, const Eigen::MatrixXd& transitions,
                                         const Eigen::VectorXd& start, std::size_t length, Rng& rng,
                                         std::vector<std::uint32_t>* states = nullptr);

ScaledFB scaled_forward_backward(const Document& doc, const TopicMatrix& phi,
                                 const Eigen::MatrixXd& transitions, const Eigen::VectorXd& pi);

/// MAP EM with shared emissions.
HmtmModel fit_hmtm(const Corpus& corpus, const HmtmConfig& config);

struct HeldoutTransition {
    Eigen::MatrixXd transitions;
    Eigen::VectorXd start;
    std::vector<double> log_posterior;  ///< per iteration
    std::size_t iterations = 0;
    bool stable = false;  ///< converged within max_iter to a finite optimum
};

/// Baum-Welch on one document with the emissions frozen; only the
/// transition matrix and start vector are updated. The document must be
/// encoded against phi's vocabulary (out-of-vocabulary words already removed).
HeldoutTransition estimate_transition_heldout(const Document& doc, const TopicMatrix& phi,
                                              const Eigen::MatrixXd& gamma, double tol = 1e-6,
                                              std::size_t max_iter = 500, double alpha = 1.0);

/// Stationary distribution theta with theta Theta = theta and theta e = 1.
/// Throws when the chain has more than one stationary distribution.
TopicProportions equilibrium_distribution(const Eigen::MatrixXd& transitions);

/// Normalised column means of Theta; an explicit fallback for chains whose
/// equilibrium is not unique.
TopicProportions row_average_distribution(const Eigen::MatrixXd& transitions);

nlohmann::json to_json(const HmtmConfig& config);
HmtmConfig hmtm_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const HmtmModel& model);
HmtmModel hmtm_model_from_json(const nlohmann::json& j);

}  // namespace topicreg
