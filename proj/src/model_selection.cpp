#include "topicreg/model_selection.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "topicreg/error.hpp"
#include "topicreg/parallel.hpp"
#include "topicreg/random.hpp"

namespace topicreg {

using nlohmann::json;

CvpeValue cvpe_from_losses(const std::vector<std::vector<double>>& fold_losses)
{
    require(!fold_losses.empty(), "no folds");
    std::size_t m = 0;
    for (const auto& fold : fold_losses) {
        require(!fold.empty(), "empty fold");
        m += fold.size();
    }
    CvpeValue out;
    for (const auto& fold : fold_losses) {
        const double mse = std::accumulate(fold.begin(), fold.end(), 0.0) / static_cast<double>(fold.size());
        out.fold_sizes.push_back(fold.size());
        out.fold_mse.push_back(mse);
        out.cvpe += static_cast<double>(fold.size()) / static_cast<double>(m) * mse;
    }
    return out;
}

CvpeValue cvpe(const std::vector<FoldPredictions>& folds)
{
    std::vector<std::vector<double>> losses;
    losses.reserve(folds.size());
    for (const auto& fold : folds) {
        require(fold.y.size() == fold.y_hat.size(), "fold has mismatched observations and predictions");
        std::vector<double> l(fold.y.size());
        for (std::size_t i = 0; i < l.size(); ++i)
            l[i] = (fold.y[i] - fold.y_hat[i]) * (fold.y[i] - fold.y_hat[i]);
        losses.push_back(std::move(l));
    }
    return cvpe_from_losses(losses);
}

std::vector<std::vector<std::size_t>> make_folds(std::size_t m, std::size_t folds, std::uint64_t seed)
{
    require(folds >= 1, "at least one fold is required");
    require(m >= 2, "cross-validation needs at least two documents");
    const std::size_t count = std::min(folds, m);
    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(seed);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::vector<std::size_t>> out(count);
    for (std::size_t i = 0; i < m; ++i)
        out[i % count].push_back(order[i]);
    for (auto& fold : out)
        std::sort(fold.begin(), fold.end());
    return out;
}

namespace {

struct FoldOutcome {
    std::vector<std::size_t> rows;
    std::vector<Prediction> predictions;
};

FoldOutcome run_fold(const Corpus& corpus, const Pipeline& pipeline, const std::vector<std::size_t>& test,
                     std::uint64_t seed)
{
    std::vector<std::size_t> train;
    train.reserve(corpus.size() - test.size());
    for (std::size_t j = 0, t = 0; j < corpus.size(); ++j) {
        if (t < test.size() && test[t] == j)
            ++t;
        else
            train.push_back(j);
    }
    const Corpus train_corpus = corpus.subset(train);
    const auto fitted = pipeline.fit(train_corpus, seed);
    FoldOutcome out;
    out.rows = test;
    for (std::size_t j : test) {
        const Document& doc = corpus.docs[j];
        out.predictions.push_back(fitted->predict({doc.id(), corpus.decode(doc)}));
    }
    return out;
}

}  // namespace

CvpeReport select_num_topics(const Corpus& corpus, const PipelineConfig& base, const std::vector<std::size_t>& k_range,
                             const SelectionOptions& options)
{
    require(!k_range.empty(), "candidate topic counts are empty");
    require(corpus.responses.has_value(), "topic-count selection needs responses");
    CvpeReport report;
    report.fold_rows = make_folds(corpus.size(), options.folds, options.seed);
    report.folds = report.fold_rows.size();
    const std::size_t nfolds = report.folds;

    std::vector<FoldOutcome> outcomes(k_range.size() * nfolds);
    parallel_for(outcomes.size(), options.threads, [&](std::size_t task) {
        const std::size_t ki = task / nfolds;
        const std::size_t f = task % nfolds;
        PipelineConfig config = base;
        config.k = k_range[ki];
        config.threads = 1;
        const TopicRegressionPipeline pipeline(config);
        outcomes[task] = run_fold(corpus, pipeline, report.fold_rows[f], derive_seed(options.seed, f));
    });

    for (std::size_t ki = 0; ki < k_range.size(); ++ki) {
        CvpeCandidate cand;
        cand.k = k_range[ki];
        std::vector<std::vector<double>> losses;
        for (std::size_t f = 0; f < nfolds; ++f) {
            auto& outcome = outcomes[ki * nfolds + f];
            std::vector<double> fold_losses;
            for (std::size_t i = 0; i < outcome.rows.size(); ++i) {
                const Prediction& p = outcome.predictions[i];
                if (p.stable)
                    fold_losses.push_back(prediction_loss(p, *corpus.responses, outcome.rows[i]));
                else
                    ++cand.excluded;
                cand.rows.push_back(outcome.rows[i]);
                cand.predictions.push_back(std::move(outcome.predictions[i]));
            }
            if (!fold_losses.empty())
                losses.push_back(std::move(fold_losses));
        }
        if (losses.empty())
            cand.value.cvpe = std::numeric_limits<double>::infinity();
        else
            cand.value = cvpe_from_losses(losses);
        report.candidates.push_back(std::move(cand));
    }

    const CvpeCandidate* best = nullptr;
    for (const auto& cand : report.candidates)
        if (!best || cand.value.cvpe < best->value.cvpe || (cand.value.cvpe == best->value.cvpe && cand.k < best->k))
            best = &cand;
    report.chosen_k = best->k;
    return report;
}

json to_json(const CvpeReport& report)
{
    json candidates = json::array();
    for (const auto& c : report.candidates) {
        json cvpe_value = std::isfinite(c.value.cvpe) ? json(c.value.cvpe) : json(nullptr);
        candidates.push_back({{"k", c.k},
                              {"cvpe", cvpe_value},
                              {"fold_sizes", c.value.fold_sizes},
                              {"fold_mse", c.value.fold_mse},
                              {"excluded", c.excluded}});
    }
    return json{{"chosen_k", report.chosen_k},
                {"folds", report.folds},
                {"fold_rows", report.fold_rows},
                {"candidates", std::move(candidates)}};
}

}  // namespace topicreg
