#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "topicreg/corpus.hpp"
#include "topicreg/pipeline.hpp"

namespace topicreg {

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    bool operator==(const RocPoint&) const = default;
};

/// Points in threshold order (thresholds descending). Standard errors are
/// filled by threshold averaging and zero for a single run.
struct RocCurve {
    std::vector<double> thresholds;
    std::vector<RocPoint> points;
    std::vector<double> se_fpr;
    std::vector<double> se_tpr;
};

/// 101 evenly spaced thresholds on [0, 1].
std::vector<double> default_threshold_grid(std::size_t size = 101);

/// A score >= t is classified positive. Throws on one-class labels.
RocCurve roc_points(std::span<const double> scores, std::span<const int> labels,
                    std::span<const double> thresholds);

struct RocRun {
    std::vector<double> scores;
    std::vector<int> labels;
};

RocCurve threshold_averaged_roc(const std::vector<RocRun>& runs, std::span<const double> thresholds);

/// Trapezoidal area over FPR-sorted points with (0,0) and (1,1) included.
double auc(const RocCurve& curve);

/// (1/m) sum_j sum_i (p_ji - o_ji)^2.
double brier_score(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& outcomes);

/// Fraction of rows whose argmax probability is the observed outcome.
double hard_accuracy(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& outcomes);

void write_roc_csv(std::ostream& out, const RocCurve& curve);

struct EvalReport {
    std::string method;
    std::size_t repeats = 0;
    std::size_t excluded = 0;  ///< documents without a stable prediction
    std::size_t evaluated = 0;
    // holdout
    std::optional<double> auc;
    std::optional<double> auc_ci_low;
    std::optional<double> auc_ci_high;
    std::optional<double> averaged_curve_auc;
    std::vector<double> repeat_aucs;
    std::size_t degenerate_repeats = 0;  ///< test splits with a single class
    std::optional<RocCurve> curve;
    // loocv
    std::optional<double> brier;
    std::optional<double> accuracy;
    std::optional<double> mse;  ///< numeric responses
};

struct HoldoutOptions {
    double train_fraction = 0.95;
    std::size_t repeats = 100;
    std::uint64_t seed = 1;
    unsigned threads = 1;
    std::vector<double> thresholds = default_threshold_grid();
    /// false: fit the topic model once on the whole corpus and refit only the
    /// regression per split.
    bool refit_topic_model = true;
};

/// Random train/test splits, each retraining the whole pipeline; binary
/// responses only. AUC interval is the normal approximation over repeats.
EvalReport repeated_holdout_cv(const Corpus& corpus, const Pipeline& pipeline,
                               const HoldoutOptions& options = {});

struct LoocvOptions {
    std::uint64_t seed = 1;
    unsigned threads = 1;
    bool refit_topic_model = true;  ///< as in HoldoutOptions
};

/// Leave-one-out over every document. Binary and categorical responses give
/// a Brier score and hard accuracy; numeric responses give the mean squared
/// error.
EvalReport loocv(const Corpus& corpus, const Pipeline& pipeline, const LoocvOptions& options = {});

nlohmann::json to_json(const RocCurve& curve);
nlohmann::json to_json(const EvalReport& report);

}  // namespace topicreg
