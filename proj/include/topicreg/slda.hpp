#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "topicreg/corpus.hpp"
#include "topicreg/lda.hpp"

namespace topicreg {

enum class SldaFamily { gaussian, bernoulli };

std::string to_string(SldaFamily family);
SldaFamily slda_family_from_string(const std::string& name);

struct SldaConfig {
    std::size_t k = 2;
    double alpha = 1.0;
    double topic_prior = 0.1;  ///< Pseudo-count added to expected topic-term counts.
    double sigma2 = 0.25;      ///< Initial response variance (gaussian).
    std::size_t e_iterations = 10;
    std::size_t m_iterations = 4;
    SldaFamily family = SldaFamily::gaussian;
    bool estimate_eta = true;  ///< When false, eta stays at zero.
    std::uint64_t seed = 1;

    void validate() const;
};

struct SldaModel {
    TopicMatrix phi;  ///< k x v, point estimates (not random variables)
    Eigen::VectorXd eta;
    double sigma2 = 0.25;
    SldaFamily family = SldaFamily::gaussian;
    double alpha = 1.0;
    SldaConfig config;
    Eigen::MatrixXd zbar;     ///< m x k expected empirical topic frequencies of training docs
    std::vector<double> elbo;  ///< Objective after each EM round.
};

/// Variational EM for supervised LDA. The objective tracked in `elbo` is the
/// evidence lower bound plus the topic smoothing log-prior; for the bernoulli
/// family the response term is log p(y | E[zbar]).
SldaModel fit_slda(const Corpus& corpus, const SldaConfig& config);

/// Same, starting from the given topics instead of a random initialisation.
SldaModel fit_slda(const Corpus& corpus, const SldaConfig& config, const TopicMatrix& initial_phi);

/// Random initial topics used by fit_slda for a given seed.
TopicMatrix initial_slda_topics(std::size_t k, std::size_t v, std::uint64_t seed);

struct HeldoutInferenceOptions {
    std::size_t max_iterations = 100;
    double tol = 1e-10;
};

/// Expected zbar of an unseen document with topics fixed and no response.
Eigen::VectorXd infer_zbar_heldout(const Document& doc, const SldaModel& model,
                                   const HeldoutInferenceOptions& options = {});

double predict_response_slda(const Document& doc, const SldaModel& model);

nlohmann::json to_json(const SldaConfig& config);
SldaConfig slda_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SldaModel& model);
SldaModel slda_model_from_json(const nlohmann::json& j);

}  // namespace topicreg
