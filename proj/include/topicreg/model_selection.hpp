#pragma once

#include <cstdint>
#include <vector>

#include <json.hpp>

#include "topicreg/corpus.hpp"
#include "topicreg/pipeline.hpp"

namespace topicreg {

/// Observed and predicted responses of one fold.
struct FoldPredictions {
    std::vector<double> y;
    std::vector<double> y_hat;
};

struct CvpeValue {
    double cvpe = 0.0;
    std::vector<std::size_t> fold_sizes;
    std::vector<double> fold_mse;
};

/// sum_i (m_i / m) MSE_i with MSE_i the mean squared residual of fold i.
CvpeValue cvpe(const std::vector<FoldPredictions>& folds);

/// Same weighting over per-document losses (used when the loss is a
/// multi-level squared error).
CvpeValue cvpe_from_losses(const std::vector<std::vector<double>>& fold_losses);

/// K near-equal disjoint folds of a random permutation of [0, m).
std::vector<std::vector<std::size_t>> make_folds(std::size_t m, std::size_t folds, std::uint64_t seed);

struct CvpeCandidate {
    std::size_t k = 0;
    CvpeValue value;
    std::size_t excluded = 0;  ///< held-out documents without a stable prediction
    std::vector<std::size_t> rows;       ///< out-of-fold document rows, fold order
    std::vector<Prediction> predictions;  ///< aligned with rows
};

struct CvpeReport {
    std::vector<CvpeCandidate> candidates;
    std::size_t chosen_k = 0;
    std::size_t folds = 0;
    std::vector<std::vector<std::size_t>> fold_rows;
};

struct SelectionOptions {
    std::size_t folds = 10;
    std::uint64_t seed = 1;
    unsigned threads = 1;
};

/// K-fold CVPE for each candidate topic count; the topic model and the
/// regression are trained on the training folds only. Ties go to the
/// smallest k.
CvpeReport select_num_topics(const Corpus& corpus, const PipelineConfig& base,
                             const std::vector<std::size_t>& k_range,
                             const SelectionOptions& options = {});

nlohmann::json to_json(const CvpeReport& report);

}  // namespace topicreg
