#include "topicreg/pipeline.hpp"

#include <cmath>
#include <unordered_map>

#include "topicreg/corpus_io.hpp"
#include "topicreg/error.hpp"

namespace topicreg {

using nlohmann::json;

std::string to_string(ModelKind kind)
{
    switch (kind) {
    case ModelKind::lda: return "lda";
    case ModelKind::slda: return "slda";
    case ModelKind::hmtm: return "hmtm";
    case ModelKind::hmtm_persistent: return "hmtm-persistent";
    case ModelKind::wordcount: return "wordcount";
    }
    return "lda";
}

ModelKind model_kind_from_string(const std::string& name)
{
    for (auto kind : {ModelKind::lda, ModelKind::slda, ModelKind::hmtm, ModelKind::hmtm_persistent,
                      ModelKind::wordcount})
        if (to_string(kind) == name)
            return kind;
    throw Error("unknown model kind '" + name + "'");
}

GlmFamily glm_family_for(const Responses& responses)
{
    switch (responses.kind) {
    case ResponseKind::numeric: return GlmFamily::gaussian();
    case ResponseKind::binary: return GlmFamily::binomial();
    case ResponseKind::categorical: return GlmFamily::multinomial(responses.num_levels());
    }
    return GlmFamily::gaussian();
}

double prediction_loss(const Prediction& prediction, const Responses& responses, std::size_t row)
{
    const double y = responses.values.at(row);
    switch (responses.kind) {
    case ResponseKind::numeric: return std::pow(y - prediction.values(0), 2);
    case ResponseKind::binary: return std::pow(y - prediction.values(1), 2);
    case ResponseKind::categorical: {
        require(static_cast<std::size_t>(prediction.values.size()) == responses.num_levels(),
                "prediction does not cover every response level");
        double loss = 0.0;
        for (Eigen::Index l = 0; l < prediction.values.size(); ++l) {
            const double o = static_cast<double>(l) == y ? 1.0 : 0.0;
            loss += std::pow(prediction.values(l) - o, 2);
        }
        return loss;
    }
    }
    return 0.0;
}

PipelineConfig default_pipeline_config(ModelKind kind, std::size_t k)
{
    PipelineConfig c;
    c.kind = kind;
    c.k = k;
    c.lda.k = k;
    c.slda.k = k;
    c.hmtm.k = k;
    if (kind == ModelKind::hmtm_persistent)
        c.hmtm.gamma = persistent_priors(k);
    c.glm.intercept = kind == ModelKind::wordcount;
    return c;
}

namespace {

// Sub-configs take k and the seed from the pipeline so one config can be
// reused across candidate topic counts.
PipelineConfig resolved(PipelineConfig c, std::uint64_t seed)
{
    c.lda.k = c.slda.k = c.hmtm.k = c.k;
    c.lda.seed = c.slda.seed = c.hmtm.seed = seed;
    c.hmtm.threads = c.threads;
    if (c.kind == ModelKind::hmtm_persistent)
        c.hmtm.gamma = persistent_priors(c.k);
    else if (c.hmtm.gamma.size() != 0 && static_cast<std::size_t>(c.hmtm.gamma.rows()) != c.k)
        c.hmtm.gamma.resize(0, 0);
    c.glm.intercept = c.kind == ModelKind::wordcount;
    return c;
}

Eigen::VectorXd to_vector(const std::vector<double>& v)
{
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

TopicProportions equilibrium_or_fallback(const Eigen::MatrixXd& transitions, bool fallback)
{
    try {
        return equilibrium_distribution(transitions);
    } catch (const Error&) {
        if (!fallback)
            throw;
        return row_average_distribution(transitions);
    }
}

Eigen::VectorXd word_counts(const Document& doc, const std::vector<TermId>& candidates)
{
    Eigen::VectorXd x(static_cast<Eigen::Index>(candidates.size()));
    for (std::size_t c = 0; c < candidates.size(); ++c)
        x(static_cast<Eigen::Index>(c)) = doc.count(candidates[c]);
    return x;
}

Responses shape_of(const Responses& r)
{
    Responses shape;
    shape.kind = r.kind;
    shape.levels = r.levels;
    return shape;
}

GlmModel fit_regression(const PipelineConfig& c, const Eigen::MatrixXd& x, const Responses& responses)
{
    const GlmFamily family = glm_family_for(responses);
    const Eigen::VectorXd y = to_vector(responses.values);
    if (c.kind == ModelKind::wordcount)
        return step_up_select(x, y, family, c.glm).model;
    return fit_glm(x, y, family, c.glm);
}

// Topic model fitted once; each fit() call selects the training rows of the
// frozen design by document id and refits the regression on them.
class FrozenTopicPipeline final : public Pipeline {
public:
    explicit FrozenTopicPipeline(const FittedTopicRegression& full, const Corpus& corpus) : full_(full)
    {
        for (std::size_t j = 0; j < corpus.size(); ++j)
            require(rows_.emplace(corpus.docs[j].id(), j).second,
                    "document id '" + corpus.docs[j].id() + "' is not unique");
    }

    std::unique_ptr<FittedPipeline> fit(const Corpus& train, std::uint64_t) const override
    {
        require(train.responses.has_value(), "training corpus has no responses");
        const Eigen::MatrixXd& all = full_.training_predictors();
        Eigen::MatrixXd x(static_cast<Eigen::Index>(train.size()), all.cols());
        for (std::size_t j = 0; j < train.size(); ++j) {
            const auto it = rows_.find(train.docs[j].id());
            require(it != rows_.end(), "document '" + train.docs[j].id() + "' was not seen by the topic model");
            x.row(static_cast<Eigen::Index>(j)) = all.row(static_cast<Eigen::Index>(it->second));
        }
        GlmModel glm = fit_regression(full_.config(), x, *train.responses);
        return std::make_unique<FittedTopicRegression>(full_.config(), full_.vocabulary(),
                                                       shape_of(*train.responses), full_.model(), std::move(glm),
                                                       std::move(x));
    }

private:
    const FittedTopicRegression& full_;
    std::unordered_map<std::string, std::size_t> rows_;
};

// Owns the full fit that a FrozenTopicPipeline refers to.
class OwningFrozenPipeline final : public Pipeline {
public:
    OwningFrozenPipeline(std::unique_ptr<FittedTopicRegression> full, const Corpus& corpus)
        : full_(std::move(full)), frozen_(*full_, corpus) {}
    std::unique_ptr<FittedPipeline> fit(const Corpus& train, std::uint64_t seed) const override
    {
        return frozen_.fit(train, seed);
    }

private:
    std::unique_ptr<FittedTopicRegression> full_;
    FrozenTopicPipeline frozen_;
};

class FunctionFitted final : public FittedPipeline {
public:
    explicit FunctionFitted(FunctionPipeline::Predictor predictor) : predictor_(std::move(predictor)) {}
    Prediction predict(const HeldoutDocument& doc) const override { return predictor_(doc); }

private:
    FunctionPipeline::Predictor predictor_;
};

}  // namespace

TopicRegressionPipeline::TopicRegressionPipeline(PipelineConfig config) : config_(std::move(config))
{
    require(config_.k >= 1, "pipeline needs at least one topic");
}

std::unique_ptr<FittedPipeline> TopicRegressionPipeline::fit(const Corpus& train, std::uint64_t seed) const
{
    require(train.responses.has_value(), "training corpus has no responses");
    const PipelineConfig c = resolved(config_, seed);
    const Responses& responses = *train.responses;
    const std::size_t m = train.size();

    switch (c.kind) {
    case ModelKind::lda: {
        LdaModel model = fit_lda_gibbs(train, c.lda);
        Eigen::MatrixXd x = model.theta;
        GlmModel glm = fit_regression(c, x, responses);
        return std::make_unique<FittedTopicRegression>(c, train.vocabulary, shape_of(responses), std::move(model),
                                                       std::move(glm), std::move(x));
    }
    case ModelKind::slda: {
        require(responses.kind != ResponseKind::categorical, "sLDA supports numeric and binary responses only");
        SldaConfig sc = c.slda;
        sc.family = responses.kind == ResponseKind::binary ? SldaFamily::bernoulli : SldaFamily::gaussian;
        SldaModel model = fit_slda(train, sc);
        Eigen::MatrixXd x = model.zbar;
        return std::make_unique<FittedTopicRegression>(c, train.vocabulary, shape_of(responses), std::move(model),
                                                       std::nullopt, std::move(x));
    }
    case ModelKind::hmtm:
    case ModelKind::hmtm_persistent: {
        HmtmModel model = fit_hmtm(train, c.hmtm);
        Eigen::MatrixXd x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(c.k));
        for (std::size_t j = 0; j < m; ++j)
            x.row(static_cast<Eigen::Index>(j)) =
                equilibrium_or_fallback(model.transitions[j], c.equilibrium_fallback).transpose();
        GlmModel glm = fit_regression(c, x, responses);
        return std::make_unique<FittedTopicRegression>(c, train.vocabulary, shape_of(responses), std::move(model),
                                                       std::move(glm), std::move(x));
    }
    case ModelKind::wordcount: {
        WordCountModel model{filter_by_document_frequency(train, c.min_document_fraction)};
        Eigen::MatrixXd x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(model.candidates.size()));
        for (std::size_t j = 0; j < m; ++j)
            x.row(static_cast<Eigen::Index>(j)) = word_counts(train.docs[j], model.candidates).transpose();
        GlmModel glm = fit_regression(c, x, responses);
        return std::make_unique<FittedTopicRegression>(c, train.vocabulary, shape_of(responses), std::move(model),
                                                       std::move(glm), std::move(x));
    }
    }
    throw Error("unsupported model kind");
}

std::unique_ptr<Pipeline> TopicRegressionPipeline::freeze_topic_model(const Corpus& full, std::uint64_t seed) const
{
    require(config_.kind != ModelKind::slda, "sLDA cannot refit its regression separately from its topics");
    auto fitted = fit(full, seed);
    std::unique_ptr<FittedTopicRegression> owned(static_cast<FittedTopicRegression*>(fitted.release()));
    return std::make_unique<OwningFrozenPipeline>(std::move(owned), full);
}

FittedTopicRegression::FittedTopicRegression(PipelineConfig config, Vocabulary vocabulary, Responses response_shape,
                                             TopicModelVariant model, std::optional<GlmModel> glm,
                                             Eigen::MatrixXd training_predictors)
    : config_(std::move(config)),
      vocabulary_(std::move(vocabulary)),
      response_shape_(std::move(response_shape)),
      model_(std::move(model)),
      glm_(std::move(glm)),
      training_predictors_(std::move(training_predictors))
{
    require(glm_.has_value() || std::holds_alternative<SldaModel>(model_), "pipeline needs a regression model");
}

Eigen::VectorXd FittedTopicRegression::predictors(const Document& doc) const
{
    require(!doc.empty(), "no in-vocabulary tokens");
    return std::visit(
        [&](const auto& model) -> Eigen::VectorXd {
            using T = std::decay_t<decltype(model)>;
            if constexpr (std::is_same_v<T, LdaModel>) {
                return estimate_theta_mle(doc, model.phi, config_.mle);
            } else if constexpr (std::is_same_v<T, SldaModel>) {
                return infer_zbar_heldout(doc, model);
            } else if constexpr (std::is_same_v<T, HmtmModel>) {
                const auto est = estimate_transition_heldout(doc, model.phi, model.config.gamma_matrix(),
                                                             config_.heldout_tol, config_.heldout_max_iter,
                                                             model.config.alpha);
                if (!est.stable)
                    throw Error("held-out transition estimate did not stabilise");
                return equilibrium_or_fallback(est.transitions, config_.equilibrium_fallback);
            } else {
                return word_counts(doc, model.candidates);
            }
        },
        model_);
}

Prediction FittedTopicRegression::from_linear(const Eigen::VectorXd& x) const
{
    Prediction out;
    if (const auto* slda = std::get_if<SldaModel>(&model_)) {
        const double lin = slda->eta.dot(x);
        if (slda->family == SldaFamily::gaussian) {
            out.values = Eigen::VectorXd::Constant(1, lin);
        } else {
            const double p = 1.0 / (1.0 + std::exp(-lin));
            out.values = Eigen::Vector2d(1.0 - p, p);
        }
        return out;
    }
    const Eigen::MatrixXd mean = glm_->predict(x.transpose());
    if (glm_->family.kind == GlmKind::binomial)
        out.values = Eigen::Vector2d(1.0 - mean(0, 0), mean(0, 0));
    else
        out.values = mean.row(0).transpose();
    return out;
}

Prediction FittedTopicRegression::predict(const HeldoutDocument& doc) const
{
    const Document encoded = encode_document(doc.tokens, vocabulary_, doc.id);
    try {
        return from_linear(predictors(encoded));
    } catch (const Error& e) {
        Prediction out;
        out.stable = false;
        out.note = e.what();
        return out;
    }
}

json FittedTopicRegression::to_json() const
{
    json model = std::visit(
        [](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LdaModel>)
                return json{{"type", "lda"}, {"lda", topicreg::to_json(m)}};
            else if constexpr (std::is_same_v<T, SldaModel>)
                return json{{"type", "slda"}, {"slda", topicreg::to_json(m)}};
            else if constexpr (std::is_same_v<T, HmtmModel>)
                return json{{"type", "hmtm"}, {"hmtm", topicreg::to_json(m)}};
            else
                return json{{"type", "wordcount"}, {"candidates", m.candidates}};
        },
        model_);
    json j{{"config", topicreg::to_json(config_)},
           {"vocabulary", topicreg::to_json(vocabulary_)},
           {"response", {{"kind", topicreg::to_string(response_shape_.kind)}, {"levels", response_shape_.levels}}},
           {"model", std::move(model)}};
    if (glm_)
        j["glm"] = topicreg::to_json(*glm_);
    return j;
}

std::unique_ptr<FittedTopicRegression> fitted_pipeline_from_json(const json& j)
{
    PipelineConfig config = pipeline_config_from_json(j.at("config"));
    Vocabulary vocabulary = vocabulary_from_json(j.at("vocabulary"));
    Responses shape;
    shape.kind = response_kind_from_string(j.at("response").at("kind").get<std::string>());
    shape.levels = j.at("response").value("levels", std::vector<std::string>{});

    const json& mj = j.at("model");
    const std::string type = mj.at("type").get<std::string>();
    TopicModelVariant model;
    if (type == "lda")
        model = lda_model_from_json(mj.at("lda"));
    else if (type == "slda")
        model = slda_model_from_json(mj.at("slda"));
    else if (type == "hmtm")
        model = hmtm_model_from_json(mj.at("hmtm"));
    else if (type == "wordcount")
        model = WordCountModel{mj.at("candidates").get<std::vector<TermId>>()};
    else
        throw Error("unknown fitted model type '" + type + "'");

    std::optional<GlmModel> glm;
    if (j.contains("glm"))
        glm = glm_model_from_json(j.at("glm"));
    return std::make_unique<FittedTopicRegression>(std::move(config), std::move(vocabulary), std::move(shape),
                                                   std::move(model), std::move(glm), Eigen::MatrixXd{});
}

std::unique_ptr<FittedPipeline> FunctionPipeline::fit(const Corpus& train, std::uint64_t seed) const
{
    return std::make_unique<FunctionFitted>(trainer_(train, seed));
}

json to_json(const PipelineConfig& c)
{
    return json{{"kind", to_string(c.kind)},
                {"k", c.k},
                {"lda", to_json(c.lda)},
                {"slda", to_json(c.slda)},
                {"hmtm", to_json(c.hmtm)},
                {"mle", {{"tol", c.mle.tol}, {"max_iterations", c.mle.max_iterations}}},
                {"heldout_tol", c.heldout_tol},
                {"heldout_max_iter", c.heldout_max_iter},
                {"equilibrium_fallback", c.equilibrium_fallback},
                {"min_document_fraction", c.min_document_fraction},
                {"glm",
                 {{"intercept", c.glm.intercept},
                  {"ridge", c.glm.ridge},
                  {"separation_ridge", c.glm.separation_ridge},
                  {"max_iterations", c.glm.max_iterations},
                  {"tol", c.glm.tol}}}};
}

PipelineConfig pipeline_config_from_json(const json& j)
{
    PipelineConfig c;
    c.kind = model_kind_from_string(j.at("kind").get<std::string>());
    c.k = j.at("k").get<std::size_t>();
    if (j.contains("lda"))
        c.lda = lda_config_from_json(j.at("lda"));
    if (j.contains("slda"))
        c.slda = slda_config_from_json(j.at("slda"));
    if (j.contains("hmtm"))
        c.hmtm = hmtm_config_from_json(j.at("hmtm"));
    if (j.contains("mle")) {
        c.mle.tol = j["mle"].value("tol", c.mle.tol);
        c.mle.max_iterations = j["mle"].value("max_iterations", c.mle.max_iterations);
    }
    c.heldout_tol = j.value("heldout_tol", c.heldout_tol);
    c.heldout_max_iter = j.value("heldout_max_iter", c.heldout_max_iter);
    c.equilibrium_fallback = j.value("equilibrium_fallback", c.equilibrium_fallback);
    c.min_document_fraction = j.value("min_document_fraction", c.min_document_fraction);
    if (j.contains("glm")) {
        const json& g = j["glm"];
        c.glm.intercept = g.value("intercept", c.glm.intercept);
        c.glm.ridge = g.value("ridge", c.glm.ridge);
        c.glm.separation_ridge = g.value("separation_ridge", c.glm.separation_ridge);
        c.glm.max_iterations = g.value("max_iterations", c.glm.max_iterations);
        c.glm.tol = g.value("tol", c.glm.tol);
    }
    return c;
}

}  // namespace topicreg
