#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "topicreg/corpus.hpp"
#include "topicreg/glm.hpp"
#include "topicreg/hmtm.hpp"
#include "topicreg/lda.hpp"
#include "topicreg/slda.hpp"

namespace topicreg {

enum class ModelKind { lda, slda, hmtm, hmtm_persistent, wordcount };

std::string to_string(ModelKind kind);
/// Throws Error on an unknown name.
ModelKind model_kind_from_string(const std::string& name);

/// A document to predict, identified so that test pipelines can look it up.
struct HeldoutDocument {
    std::string id;
    std::vector<std::string> tokens;
};

/// Numeric responses: one value. Binary: (P(0), P(1)). Categorical: one
/// probability per level.
struct Prediction {
    Eigen::VectorXd values;
    bool stable = true;
    std::string note;  ///< why the document could not be predicted

    double score() const { return values.size() == 2 ? values(1) : values(0); }
};

class FittedPipeline {
public:
    virtual ~FittedPipeline() = default;
    virtual Prediction predict(const HeldoutDocument& doc) const = 0;
    virtual nlohmann::json to_json() const { return nlohmann::json::object(); }
};

class Pipeline {
public:
    virtual ~Pipeline() = default;
    /// Trains on `train` only; `seed` drives every random choice.
    virtual std::unique_ptr<FittedPipeline> fit(const Corpus& train, std::uint64_t seed) const = 0;

    /// A pipeline whose topic model is fitted once on `full` and whose fit()
    /// retrains only the regression on the requested documents (matched by
    /// id). Returns nullptr when the pipeline cannot separate the two stages.
    virtual std::unique_ptr<Pipeline> freeze_topic_model(const Corpus& full, std::uint64_t seed) const
    {
        (void)full;
        (void)seed;
        return nullptr;
    }
};

struct PipelineConfig {
    ModelKind kind = ModelKind::lda;
    std::size_t k = 2;
    LdaConfig lda;
    SldaConfig slda;
    HmtmConfig hmtm;
    MleOptions mle;
    double heldout_tol = 1e-6;
    std::size_t heldout_max_iter = 500;
    /// Use row-averaged transitions when an equilibrium is not unique.
    bool equilibrium_fallback = false;
    double min_document_fraction = 0.025;  ///< word-count candidate threshold
    GlmOptions glm;
    unsigned threads = 1;
};

/// Topic model (or word counts) followed by a GLM on the document predictors.
class TopicRegressionPipeline final : public Pipeline {
public:
    explicit TopicRegressionPipeline(PipelineConfig config);
    std::unique_ptr<FittedPipeline> fit(const Corpus& train, std::uint64_t seed) const override;
    /// Not available for sLDA, whose regression is part of the topic model.
    std::unique_ptr<Pipeline> freeze_topic_model(const Corpus& full, std::uint64_t seed) const override;
    const PipelineConfig& config() const { return config_; }

private:
    PipelineConfig config_;
};

struct WordCountModel {
    std::vector<TermId> candidates;  ///< frequent terms, design column order
};

/// The topic-model part of a fitted pipeline.
using TopicModelVariant = std::variant<LdaModel, SldaModel, HmtmModel, WordCountModel>;

class FittedTopicRegression final : public FittedPipeline {
public:
    FittedTopicRegression(PipelineConfig config, Vocabulary vocabulary, Responses response_shape,
                          TopicModelVariant model, std::optional<GlmModel> glm,
                          Eigen::MatrixXd training_predictors);

    Prediction predict(const HeldoutDocument& doc) const override;
    nlohmann::json to_json() const override;

    /// Predictors of an encoded document; throws Error when unstable.
    Eigen::VectorXd predictors(const Document& doc) const;

    const PipelineConfig& config() const { return config_; }
    const Vocabulary& vocabulary() const { return vocabulary_; }
    const TopicModelVariant& model() const { return model_; }
    const std::optional<GlmModel>& glm() const { return glm_; }
    /// m x p design the regression was fitted on.
    const Eigen::MatrixXd& training_predictors() const { return training_predictors_; }

private:
    Prediction from_linear(const Eigen::VectorXd& predictors) const;

    PipelineConfig config_;
    Vocabulary vocabulary_;
    Responses response_shape_;  ///< kind and levels, no values
    TopicModelVariant model_;
    std::optional<GlmModel> glm_;
    Eigen::MatrixXd training_predictors_;
};

std::unique_ptr<FittedTopicRegression> fitted_pipeline_from_json(const nlohmann::json& j);

/// Adapts callables into a pipeline; used for oracle and baseline pipelines.
class FunctionPipeline final : public Pipeline {
public:
    using Predictor = std::function<Prediction(const HeldoutDocument&)>;
    using Trainer = std::function<Predictor(const Corpus&, std::uint64_t)>;

    explicit FunctionPipeline(Trainer trainer) : trainer_(std::move(trainer)) {}
    std::unique_ptr<FittedPipeline> fit(const Corpus& train, std::uint64_t seed) const override;

private:
    Trainer trainer_;
};

/// Family of the GLM for a response column.
GlmFamily glm_family_for(const Responses& responses);

/// Squared-error loss of one prediction: (y - yhat)^2 for numeric responses,
/// (y - P(1))^2 for binary ones and the sum over levels of (p - o)^2 for
/// categorical ones.
double prediction_loss(const Prediction& prediction, const Responses& responses, std::size_t row);

PipelineConfig default_pipeline_config(ModelKind kind, std::size_t k);

nlohmann::json to_json(const PipelineConfig& config);
PipelineConfig pipeline_config_from_json(const nlohmann::json& j);

}  // namespace topicreg
