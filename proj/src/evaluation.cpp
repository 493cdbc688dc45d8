#include "topicreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <ostream>

#include "topicreg/error.hpp"
#include "topicreg/parallel.hpp"
#include "topicreg/random.hpp"

namespace topicreg {

using nlohmann::json;

std::vector<double> default_threshold_grid(std::size_t size)
{
    require(size >= 2, "threshold grid needs at least two points");
    std::vector<double> grid(size);
    const double step = static_cast<double>(size - 1);
    for (std::size_t i = 0; i < size; ++i)
        grid[i] = static_cast<double>(i) / step;
    return grid;
}

namespace {

std::vector<double> descending(std::span<const double> thresholds)
{
    require(!thresholds.empty(), "threshold grid is empty");
    std::vector<double> t(thresholds.begin(), thresholds.end());
    std::sort(t.begin(), t.end(), std::greater<>());
    return t;
}

}  // namespace

RocCurve roc_points(std::span<const double> scores, std::span<const int> labels, std::span<const double> thresholds)
{
    require(scores.size() == labels.size(), "scores and labels differ in length");
    std::size_t positives = 0;
    for (int l : labels) {
        require(l == 0 || l == 1, "labels must be 0 or 1");
        positives += static_cast<std::size_t>(l);
    }
    const std::size_t negatives = labels.size() - positives;
    if (positives == 0 || negatives == 0)
        throw Error("degenerate labels");

    RocCurve curve;
    curve.thresholds = descending(thresholds);
    for (double t : curve.thresholds) {
        std::size_t tp = 0, fp = 0;
        for (std::size_t i = 0; i < scores.size(); ++i) {
            if (scores[i] >= t) {
                if (labels[i] == 1)
                    ++tp;
                else
                    ++fp;
            }
        }
        curve.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                                static_cast<double>(tp) / static_cast<double>(positives)});
    }
    curve.se_fpr.assign(curve.points.size(), 0.0);
    curve.se_tpr.assign(curve.points.size(), 0.0);
    return curve;
}

RocCurve threshold_averaged_roc(const std::vector<RocRun>& runs, std::span<const double> thresholds)
{
    require(!runs.empty(), "threshold averaging needs at least one run");
    std::vector<RocCurve> curves;
    curves.reserve(runs.size());
    for (const auto& run : runs)
        curves.push_back(roc_points(run.scores, run.labels, thresholds));

    RocCurve out;
    out.thresholds = curves.front().thresholds;
    const std::size_t n = curves.size();
    for (std::size_t t = 0; t < out.thresholds.size(); ++t) {
        // Offsets from the first run keep the mean of identical runs exact.
        const RocPoint first = curves.front().points[t];
        double sf = 0.0, st = 0.0;
        for (const auto& c : curves) {
            sf += c.points[t].fpr - first.fpr;
            st += c.points[t].tpr - first.tpr;
        }
        const RocPoint mean{first.fpr + sf / static_cast<double>(n), first.tpr + st / static_cast<double>(n)};
        double vf = 0.0, vt = 0.0;
        for (const auto& c : curves) {
            vf += std::pow(c.points[t].fpr - mean.fpr, 2);
            vt += std::pow(c.points[t].tpr - mean.tpr, 2);
        }
        out.points.push_back(mean);
        if (n > 1) {
            const double denom = static_cast<double>(n - 1) * static_cast<double>(n);
            out.se_fpr.push_back(std::sqrt(vf / denom));
            out.se_tpr.push_back(std::sqrt(vt / denom));
        } else {
            out.se_fpr.push_back(0.0);
            out.se_tpr.push_back(0.0);
        }
    }
    return out;
}

double auc(const RocCurve& curve)
{
    std::vector<RocPoint> pts = curve.points;
    pts.push_back({0.0, 0.0});
    pts.push_back({1.0, 1.0});
    std::sort(pts.begin(), pts.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr < b.fpr || (a.fpr == b.fpr && a.tpr < b.tpr);
    });
    double area = 0.0;
    for (std::size_t i = 1; i < pts.size(); ++i)
        area += (pts[i].fpr - pts[i - 1].fpr) * (pts[i].tpr + pts[i - 1].tpr) / 2.0;
    return area;
}

double brier_score(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& outcomes)
{
    require(probs.rows() == outcomes.rows() && probs.cols() == outcomes.cols(),
            "probability and outcome matrices differ in shape");
    require(probs.rows() > 0, "no observations");
    for (Eigen::Index j = 0; j < probs.rows(); ++j)
        require(std::abs(probs.row(j).sum() - 1.0) < 1e-8, "probability row does not sum to one");
    return (probs - outcomes).squaredNorm() / static_cast<double>(probs.rows());
}

double hard_accuracy(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& outcomes)
{
    require(probs.rows() == outcomes.rows() && probs.cols() == outcomes.cols(),
            "probability and outcome matrices differ in shape");
    require(probs.rows() > 0, "no observations");
    std::size_t hits = 0;
    for (Eigen::Index j = 0; j < probs.rows(); ++j) {
        Eigen::Index predicted = 0, observed = 0;
        probs.row(j).maxCoeff(&predicted);
        outcomes.row(j).maxCoeff(&observed);
        hits += predicted == observed ? 1 : 0;
    }
    return static_cast<double>(hits) / static_cast<double>(probs.rows());
}

void write_roc_csv(std::ostream& out, const RocCurve& curve)
{
    out << "threshold,fpr,tpr,se_fpr,se_tpr\n";
    out.precision(17);
    for (std::size_t i = 0; i < curve.points.size(); ++i)
        out << curve.thresholds[i] << ',' << curve.points[i].fpr << ',' << curve.points[i].tpr << ','
            << curve.se_fpr[i] << ',' << curve.se_tpr[i] << '\n';
}

namespace {

struct Scored {
    std::size_t row;
    Prediction prediction;
};

std::vector<Scored> fit_and_predict(const Corpus& corpus, const Pipeline& pipeline,
                                    const std::vector<std::size_t>& train, const std::vector<std::size_t>& test,
                                    std::uint64_t seed)
{
    const Corpus train_corpus = corpus.subset(train);
    const auto fitted = pipeline.fit(train_corpus, seed);
    std::vector<Scored> out;
    out.reserve(test.size());
    for (std::size_t j : test) {
        const Document& doc = corpus.docs[j];
        out.push_back({j, fitted->predict({doc.id(), corpus.decode(doc)})});
    }
    return out;
}

Eigen::RowVectorXd one_hot(const Responses& responses, std::size_t row)
{
    Eigen::RowVectorXd o = Eigen::RowVectorXd::Zero(static_cast<Eigen::Index>(responses.num_levels()));
    o(static_cast<Eigen::Index>(responses.values.at(row))) = 1.0;
    return o;
}

// Brier score and hard accuracy over stable class-probability predictions.
void score_probabilities(const std::vector<Scored>& scored, const Responses& responses, EvalReport& report)
{
    const auto s = static_cast<Eigen::Index>(responses.num_levels());
    std::vector<const Scored*> kept;
    for (const auto& sc : scored) {
        if (sc.prediction.stable && sc.prediction.values.size() == s)
            kept.push_back(&sc);
        else
            ++report.excluded;
    }
    report.evaluated = kept.size();
    if (kept.empty())
        return;
    Eigen::MatrixXd probs(static_cast<Eigen::Index>(kept.size()), s);
    Eigen::MatrixXd outcomes(probs.rows(), s);
    for (std::size_t i = 0; i < kept.size(); ++i) {
        probs.row(static_cast<Eigen::Index>(i)) = kept[i]->prediction.values.transpose();
        outcomes.row(static_cast<Eigen::Index>(i)) = one_hot(responses, kept[i]->row);
    }
    report.brier = brier_score(probs, outcomes);
    report.accuracy = hard_accuracy(probs, outcomes);
}

// The pipeline to run per split: the caller's, or one with a topic model
// frozen on the whole corpus.
const Pipeline& split_pipeline(const Corpus& corpus, const Pipeline& pipeline, bool refit_topic_model,
                               std::uint64_t seed, std::unique_ptr<Pipeline>& holder)
{
    if (refit_topic_model)
        return pipeline;
    holder = pipeline.freeze_topic_model(corpus, seed);
    require(holder != nullptr, "this pipeline cannot refit the regression alone");
    return *holder;
}

}  // namespace

EvalReport repeated_holdout_cv(const Corpus& corpus, const Pipeline& pipeline, const HoldoutOptions& options)
{
    require(options.train_fraction > 0.0 && options.train_fraction < 1.0, "train fraction must lie in (0, 1)");
    require(options.repeats >= 1, "at least one repeat is required");
    require(corpus.responses && corpus.responses->kind == ResponseKind::binary,
            "repeated holdout needs binary responses");
    const std::size_t m = corpus.size();
    require(m >= 2, "repeated holdout needs at least two documents");
    const auto n_train = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(options.train_fraction * static_cast<double>(m))), 1, m - 1);

    std::unique_ptr<Pipeline> frozen;
    const Pipeline& split = split_pipeline(corpus, pipeline, options.refit_topic_model,
                                           derive_seed(options.seed, options.repeats), frozen);

    std::vector<std::vector<Scored>> results(options.repeats);
    parallel_for(options.repeats, options.threads, [&](std::size_t r) {
        const std::uint64_t seed = derive_seed(options.seed, r);
        std::vector<std::size_t> order(m);
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng(seed);
        std::shuffle(order.begin(), order.end(), rng);
        std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
        std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
        std::sort(train.begin(), train.end());
        std::sort(test.begin(), test.end());
        results[r] = fit_and_predict(corpus, split, train, test, derive_seed(seed, 1));
    });

    EvalReport report;
    report.method = "holdout";
    report.repeats = options.repeats;
    std::vector<RocRun> runs;
    std::vector<Scored> pooled;
    for (const auto& repeat : results) {
        RocRun run;
        for (const auto& sc : repeat) {
            pooled.push_back(sc);
            if (!sc.prediction.stable)
                continue;
            run.scores.push_back(sc.prediction.score());
            run.labels.push_back(static_cast<int>(corpus.responses->values[sc.row]));
        }
        const auto positives = std::count(run.labels.begin(), run.labels.end(), 1);
        if (positives == 0 || positives == static_cast<std::ptrdiff_t>(run.labels.size())) {
            ++report.degenerate_repeats;
            continue;
        }
        report.repeat_aucs.push_back(auc(roc_points(run.scores, run.labels, options.thresholds)));
        runs.push_back(std::move(run));
    }
    score_probabilities(pooled, *corpus.responses, report);
    if (runs.empty())
        throw Error("every holdout repeat had a single-class test set");

    const auto n = static_cast<double>(report.repeat_aucs.size());
    const double mean = std::accumulate(report.repeat_aucs.begin(), report.repeat_aucs.end(), 0.0) / n;
    double var = 0.0;
    for (double a : report.repeat_aucs)
        var += (a - mean) * (a - mean);
    const double se = n > 1 ? std::sqrt(var / (n - 1) / n) : 0.0;
    report.auc = mean;
    report.auc_ci_low = std::max(0.0, mean - 1.959963984540054 * se);
    report.auc_ci_high = std::min(1.0, mean + 1.959963984540054 * se);
    report.curve = threshold_averaged_roc(runs, options.thresholds);
    report.averaged_curve_auc = auc(*report.curve);
    return report;
}

EvalReport loocv(const Corpus& corpus, const Pipeline& pipeline, const LoocvOptions& options)
{
    require(corpus.responses.has_value(), "leave-one-out needs responses");
    const std::size_t m = corpus.size();
    require(m >= 2, "leave-one-out needs at least two documents");

    std::unique_ptr<Pipeline> frozen;
    const Pipeline& split =
        split_pipeline(corpus, pipeline, options.refit_topic_model, derive_seed(options.seed, m), frozen);

    std::vector<Scored> scored(m);
    parallel_for(m, options.threads, [&](std::size_t j) {
        std::vector<std::size_t> train;
        train.reserve(m - 1);
        for (std::size_t i = 0; i < m; ++i)
            if (i != j)
                train.push_back(i);
        scored[j] = fit_and_predict(corpus, split, train, {j}, derive_seed(options.seed, j)).front();
    });

    EvalReport report;
    report.method = "loocv";
    report.repeats = m;
    const Responses& responses = *corpus.responses;
    if (responses.kind == ResponseKind::numeric) {
        double sse = 0.0;
        for (const auto& sc : scored) {
            if (!sc.prediction.stable) {
                ++report.excluded;
                continue;
            }
            sse += std::pow(responses.values[sc.row] - sc.prediction.values(0), 2);
            ++report.evaluated;
        }
        if (report.evaluated > 0)
            report.mse = sse / static_cast<double>(report.evaluated);
    } else {
        score_probabilities(scored, responses, report);
    }
    return report;
}

json to_json(const RocCurve& curve)
{
    json points = json::array();
    for (const auto& p : curve.points)
        points.push_back({p.fpr, p.tpr});
    return json{{"thresholds", curve.thresholds},
                {"points", std::move(points)},
                {"se_fpr", curve.se_fpr},
                {"se_tpr", curve.se_tpr}};
}

json to_json(const EvalReport& r)
{
    json j{{"method", r.method},
           {"repeats", r.repeats},
           {"excluded", r.excluded},
           {"evaluated", r.evaluated}};
    auto put = [&](const char* key, const std::optional<double>& v) {
        if (v)
            j[key] = *v;
    };
    put("auc", r.auc);
    put("auc_ci_low", r.auc_ci_low);
    put("auc_ci_high", r.auc_ci_high);
    put("averaged_curve_auc", r.averaged_curve_auc);
    put("brier", r.brier);
    put("accuracy", r.accuracy);
    put("mse", r.mse);
    if (!r.repeat_aucs.empty()) {
        j["repeat_aucs"] = r.repeat_aucs;
        j["degenerate_repeats"] = r.degenerate_repeats;
    }
    if (r.curve)
        j["curve"] = to_json(*r.curve);
    return j;
}

}  // namespace topicreg
