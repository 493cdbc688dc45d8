#include <doctest.h>

#include <map>
#include <mutex>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "topicreg/error.hpp"
#include "topicreg/evaluation.hpp"

using namespace topicreg;

namespace {

Corpus labelled_corpus(std::size_t m, std::size_t levels, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, levels - 1);
    std::vector<std::vector<std::string>> docs;
    std::vector<std::string> raw;
    for (std::size_t j = 0; j < m; ++j) {
        const std::size_t y = j < levels ? j : pick(rng);  // every level present
        docs.push_back({"topic" + std::to_string(y), "shared", "word" + std::to_string(j % 7)});
        raw.push_back(levels == 2 ? std::to_string(y) : "c" + std::to_string(y));
    }
    std::vector<std::string> ids;
    for (std::size_t j = 0; j < m; ++j)
        ids.push_back("doc" + std::to_string(j));
    return make_corpus(docs, ids, Responses::parse(raw, levels == 2 ? ResponseKind::binary : ResponseKind::categorical));
}

// Answers with the true label looked up by id.
FunctionPipeline oracle_pipeline(const Corpus& full)
{
    std::map<std::string, double> truth;
    for (std::size_t j = 0; j < full.size(); ++j)
        truth[full.docs[j].id()] = full.responses->values[j];
    const auto levels = static_cast<Eigen::Index>(full.responses->num_levels());
    return FunctionPipeline([truth, levels](const Corpus&, std::uint64_t) {
        return [truth, levels](const HeldoutDocument& d) {
            Prediction p;
            p.values = Eigen::VectorXd::Zero(levels);
            p.values(static_cast<Eigen::Index>(truth.at(d.id))) = 1.0;
            return p;
        };
    });
}

FunctionPipeline constant_pipeline(Eigen::VectorXd values)
{
    return FunctionPipeline([values](const Corpus&, std::uint64_t) {
        return [values](const HeldoutDocument&) {
            Prediction p;
            p.values = values;
            return p;
        };
    });
}

}  // namespace

TEST_CASE("roc examples")
{
    const std::vector<double> half{0.5};
    const auto perfect = roc_points(std::vector<double>{1, 0, 1, 0}, std::vector<int>{1, 0, 1, 0}, half);
    CHECK(perfect.points[0] == RocPoint{0.0, 1.0});

    const auto flat = roc_points(std::vector<double>{0.5, 0.5, 0.5}, std::vector<int>{1, 0, 1},
                                 std::vector<double>{0.25, 0.75});
    CHECK(flat.thresholds == std::vector<double>{0.75, 0.25});
    CHECK(flat.points[0] == RocPoint{0.0, 0.0});
    CHECK(flat.points[1] == RocPoint{1.0, 1.0});

    const std::vector<double> s{0.9, 0.8, 0.4, 0.3};
    const std::vector<int> l{1, 0, 1, 0};
    const auto mid = roc_points(s, l, half);
    CHECK(mid.points[0] == RocPoint{0.5, 0.5});
    CHECK(auc(roc_points(s, l, default_threshold_grid(1001))) == doctest::Approx(0.75).epsilon(1e-15));

    // ties at the threshold count as positive
    const auto tie = roc_points(std::vector<double>{0.5, 0.2}, std::vector<int>{1, 0}, half);
    CHECK(tie.points[0].tpr == 1.0);

    CHECK_THROWS_WITH_AS(roc_points(s, std::vector<int>{1, 1, 1, 1}, half), "degenerate labels", Error);
    CHECK_THROWS_AS(roc_points(s, std::vector<int>{1, 0, 2, 0}, half), Error);
}

TEST_CASE("auc of reference curves")
{
    RocCurve perfect;
    perfect.points = {{0.0, 1.0}};
    CHECK(auc(perfect) == 1.0);
    RocCurve diagonal;
    diagonal.points = {{0.3, 0.3}, {0.7, 0.7}};
    CHECK(auc(diagonal) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(auc(RocCurve{}) == 0.5);
}

TEST_CASE("roc curves are monotone and auc equals the concordance probability")
{
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::uniform_int_distribution<int> n_pick(2, 60);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = n_pick(rng);
        std::vector<double> scores(static_cast<std::size_t>(n));
        std::vector<int> labels(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            labels[static_cast<std::size_t>(i)] = i < 1 ? 1 : (i < 2 ? 0 : u(rng) < 0.4);
            // coarse scores produce ties
            scores[static_cast<std::size_t>(i)] = std::round((u(rng) + 0.3 * labels[static_cast<std::size_t>(i)]) * 20) / 26;
        }
        // exact ROC: one threshold per distinct score
        std::vector<double> grid(scores);
        grid.push_back(2.0);
        const auto curve = roc_points(scores, labels, grid);
        for (std::size_t i = 1; i < curve.points.size(); ++i) {
            CHECK(curve.thresholds[i] <= curve.thresholds[i - 1]);
            CHECK(curve.points[i].fpr >= curve.points[i - 1].fpr);
            CHECK(curve.points[i].tpr >= curve.points[i - 1].tpr);
        }
        CHECK(curve.points.front() == RocPoint{0.0, 0.0});
        CHECK(curve.points.back() == RocPoint{1.0, 1.0});
        CHECK(std::abs(auc(curve) - oracle::concordance_auc(scores, labels)) < 1e-12);
    }
}

TEST_CASE("separated scores give auc 1 on any grid")
{
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        const double cut = 0.1 + 0.8 * u(rng);
        std::vector<double> scores;
        std::vector<int> labels;
        for (int i = 0; i < 20; ++i) {
            const int label = i % 2;
            labels.push_back(label);
            scores.push_back(label ? cut + (1 - cut) * u(rng) : cut * u(rng) * 0.999);
        }
        const std::vector<double> grid(scores.begin(), scores.end());
        CHECK(auc(roc_points(scores, labels, grid)) == 1.0);
        CHECK(oracle::concordance_auc(scores, labels) == 1.0);
    }
}

TEST_CASE("threshold averaging")
{
    const auto grid = default_threshold_grid();
    CHECK(grid.size() == 101);
    CHECK(grid[50] == 0.5);

    const RocRun a{{0.9, 0.8, 0.4, 0.3, 0.65}, {1, 0, 1, 0, 1}};
    const auto single = roc_points(a.scores, a.labels, grid);
    const auto one = threshold_averaged_roc({a}, grid);
    CHECK(one.points == single.points);
    const auto twice = threshold_averaged_roc({a, a}, grid);
    CHECK(twice.points == single.points);
    for (std::size_t copies = 3; copies <= 11; ++copies)
        CHECK(threshold_averaged_roc(std::vector<RocRun>(copies, a), grid).points == single.points);
    for (double se : twice.se_tpr)
        CHECK(se == 0.0);

    // TPR 0.4 and 0.6 at threshold 0.5 average to 0.5
    const RocRun r1{{0.9, 0.8, 0.1, 0.2, 0.3, 0.1}, {1, 1, 1, 1, 1, 0}};
    const RocRun r2{{0.9, 0.8, 0.7, 0.2, 0.3, 0.1}, {1, 1, 1, 1, 1, 0}};
    const std::vector<double> at{0.5};
    CHECK(roc_points(r1.scores, r1.labels, at).points[0].tpr == doctest::Approx(0.4));
    CHECK(roc_points(r2.scores, r2.labels, at).points[0].tpr == doctest::Approx(0.6));
    const auto avg = threshold_averaged_roc({r1, r2}, at);
    CHECK(avg.points[0].tpr == doctest::Approx(0.5));
    CHECK(avg.se_tpr[0] == doctest::Approx(0.1));  // sd 0.1414 / sqrt 2

    std::ostringstream csv;
    write_roc_csv(csv, avg);
    CHECK(csv.str().rfind("threshold,fpr,tpr,se_fpr,se_tpr\n0.5,0,0.5", 0) == 0);
    CHECK_THROWS_AS(threshold_averaged_roc({}, grid), Error);
}

TEST_CASE("brier examples")
{
    Eigen::MatrixXd o(2, 2);
    o << 1, 0, 0, 1;
    CHECK(brier_score(o, o) == 0.0);
    CHECK(brier_score(Eigen::MatrixXd::Constant(2, 2, 0.5), o) == 0.5);
    Eigen::MatrixXd p(1, 2), y(1, 2);
    p << 0.7, 0.3;
    y << 0, 1;
    CHECK(brier_score(p, y) == doctest::Approx(0.98));
    y << 1, 0;
    CHECK(brier_score(p, y) == doctest::Approx(0.18));
    for (int s = 2; s <= 12; ++s) {
        Eigen::MatrixXd onehot = Eigen::MatrixXd::Identity(s, s);
        CHECK(brier_score(Eigen::MatrixXd::Constant(s, s, 1.0 / s), onehot) == doctest::Approx((s - 1.0) / s));
    }
    CHECK_THROWS_AS(brier_score(Eigen::MatrixXd::Constant(2, 3, 1.0 / 3), o), Error);
    Eigen::MatrixXd bad(1, 2);
    bad << 0.7, 0.7;
    CHECK_THROWS_AS(brier_score(bad, y), Error);
}

TEST_CASE("brier is uniquely minimised by the outcomes")
{
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> level(0, 4);
    std::exponential_distribution<double> e(1.0);
    for (int trial = 0; trial < 500; ++trial) {
        const int m = 1 + trial % 9, s = 5;
        Eigen::MatrixXd outcomes = Eigen::MatrixXd::Zero(m, s);
        for (int j = 0; j < m; ++j)
            outcomes(j, level(rng)) = 1.0;
        Eigen::MatrixXd probs = outcomes;
        const int row = trial % m;
        const double eps = 1e-3 + 0.5 * (trial % 3) / 3.0;
        Eigen::RowVectorXd other(s);
        for (int c = 0; c < s; ++c)
            other(c) = e(rng);
        probs.row(row) = (1 - eps) * probs.row(row) + eps * other / other.sum();
        const double b = brier_score(probs, outcomes);
        CHECK(b > 0.0);
        CHECK(b <= 2.0);
    }
}

TEST_CASE("hard accuracy")
{
    Eigen::MatrixXd p(3, 3), o(3, 3);
    p << 0.6, 0.3, 0.1, 0.2, 0.2, 0.6, 0.3, 0.4, 0.3;
    o << 1, 0, 0, 0, 1, 0, 0, 1, 0;
    CHECK(hard_accuracy(p, o) == doctest::Approx(2.0 / 3));
}

TEST_CASE("holdout with an oracle and a constant pipeline")
{
    const Corpus corpus = labelled_corpus(120, 2, 1);
    HoldoutOptions opt;
    opt.repeats = 30;
    opt.train_fraction = 0.8;
    const auto perfect = repeated_holdout_cv(corpus, oracle_pipeline(corpus), opt);
    CHECK(*perfect.auc == 1.0);
    CHECK(*perfect.auc_ci_low == 1.0);
    CHECK(*perfect.auc_ci_high == 1.0);
    CHECK(*perfect.averaged_curve_auc == 1.0);
    CHECK(*perfect.brier == 0.0);
    CHECK(perfect.repeat_aucs.size() + perfect.degenerate_repeats == 30);
    CHECK(perfect.evaluated == 30 * 24);

    const auto coin = repeated_holdout_cv(corpus, constant_pipeline(Eigen::Vector2d(0.5, 0.5)), opt);
    CHECK(*coin.auc == doctest::Approx(0.5));
    CHECK(*coin.auc_ci_low <= 0.5);
    CHECK(*coin.auc_ci_high >= 0.5);
    CHECK(*coin.brier == doctest::Approx(0.5));
    CHECK(*coin.accuracy >= 0.0);
}

TEST_CASE("holdout splits never leak test documents into training")
{
    const Corpus corpus = labelled_corpus(60, 2, 2);
    std::mutex lock;
    std::vector<std::set<std::string>> trained;
    FunctionPipeline spy([&](const Corpus& train, std::uint64_t) {
        std::set<std::string> ids;
        for (const auto& d : train.docs)
            ids.insert(d.id());
        std::scoped_lock g(lock);
        trained.push_back(ids);
        return [ids](const HeldoutDocument& d) {
            Prediction p;
            p.values = Eigen::Vector2d(0.5, 0.5);
            p.stable = ids.count(d.id) == 0;
            return p;
        };
    });
    HoldoutOptions opt;
    opt.repeats = 20;
    opt.threads = 4;
    const auto report = repeated_holdout_cv(corpus, spy, opt);
    CHECK(report.excluded == 0);
    CHECK(trained.size() == 20);
    for (const auto& ids : trained)
        CHECK(ids.size() == 57);

    LoocvOptions lo;
    lo.threads = 3;
    trained.clear();
    const auto l = loocv(corpus, spy, lo);
    CHECK(l.excluded == 0);
    CHECK(l.evaluated == 60);
    CHECK(trained.size() == 60);
}

TEST_CASE("unstable predictions are excluded and counted")
{
    const Corpus corpus = labelled_corpus(40, 3, 3);
    FunctionPipeline flaky([](const Corpus&, std::uint64_t) {
        return [](const HeldoutDocument& d) {
            Prediction p;
            p.values = Eigen::Vector3d::Constant(1.0 / 3);
            p.stable = d.id.back() != '7';
            return p;
        };
    });
    const auto r = loocv(corpus, flaky);
    CHECK(r.excluded == 4);  // doc7, doc17, doc27, doc37
    CHECK(r.evaluated == 36);
    CHECK(*r.brier == doctest::Approx(2.0 / 3));
}

TEST_CASE("loocv on categorical responses")
{
    const Corpus corpus = labelled_corpus(50, 10, 4);
    const auto uniform = loocv(corpus, constant_pipeline(Eigen::VectorXd::Constant(10, 0.1)));
    CHECK(*uniform.brier == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(uniform.repeats == 50);

    const auto perfect = loocv(corpus, oracle_pipeline(corpus));
    CHECK(*perfect.brier == 0.0);
    CHECK(*perfect.accuracy == 1.0);

    const auto j = to_json(perfect);
    CHECK(j["method"] == "loocv");
    CHECK(j["brier"] == 0.0);
    CHECK_FALSE(j.contains("auc"));
}

TEST_CASE("loocv on numeric responses reports mse")
{
    std::vector<std::vector<std::string>> docs{{"a"}, {"b"}, {"c"}, {"d"}};
    Corpus corpus = make_corpus(docs, {}, Responses::parse({"1", "2", "3", "6"}, ResponseKind::numeric));
    // predicts the training mean
    FunctionPipeline mean([](const Corpus& train, std::uint64_t) {
        double sum = 0.0;
        for (double v : train.responses->values)
            sum += v;
        const double mu = sum / static_cast<double>(train.size());
        return [mu](const HeldoutDocument&) {
            Prediction p;
            p.values = Eigen::VectorXd::Constant(1, mu);
            return p;
        };
    });
    const auto r = loocv(corpus, mean);
    // held-out residuals: 1 - 11/3, 2 - 10/3, 3 - 3, 6 - 2
    const double mse = (std::pow(8.0 / 3, 2) + std::pow(4.0 / 3, 2) + 0.0 + 16.0) / 4.0;
    CHECK(*r.mse == doctest::Approx(mse).epsilon(1e-12));
    CHECK_FALSE(r.brier.has_value());
}

TEST_CASE("evaluation is reproducible and thread-independent")
{
    const Corpus corpus = labelled_corpus(80, 2, 5);
    // noisy scores that depend on the training seed
    FunctionPipeline noisy([](const Corpus&, std::uint64_t seed) {
        return [seed](const HeldoutDocument& d) {
            std::mt19937_64 rng(seed ^ std::hash<std::string>{}(d.id));
            const double s = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
            Prediction p;
            p.values = Eigen::Vector2d(1 - s, s);
            return p;
        };
    });
    HoldoutOptions opt;
    opt.repeats = 25;
    const auto a = repeated_holdout_cv(corpus, noisy, opt);
    opt.threads = 4;
    const auto b = repeated_holdout_cv(corpus, noisy, opt);
    CHECK(to_json(a).dump() == to_json(b).dump());
    opt.seed = 2;
    CHECK(to_json(repeated_holdout_cv(corpus, noisy, opt)).dump() != to_json(a).dump());
}

TEST_CASE("regression-only evaluation")
{
    const Corpus corpus = labelled_corpus(40, 2, 6);
    HoldoutOptions opt;
    opt.repeats = 5;
    opt.refit_topic_model = false;
    CHECK_THROWS_AS(repeated_holdout_cv(corpus, oracle_pipeline(corpus), opt), Error);

    PipelineConfig config = default_pipeline_config(ModelKind::lda, 2);
    config.lda.burnin = 50;
    config.lda.iterations = 20;
    config.lda.keep = 5;
    const TopicRegressionPipeline pipeline(config);
    const auto a = repeated_holdout_cv(corpus, pipeline, opt);
    const auto b = repeated_holdout_cv(corpus, pipeline, opt);
    CHECK(to_json(a).dump() == to_json(b).dump());
    CHECK(*a.auc >= 0.0);
    CHECK(*a.auc <= 1.0);

    LoocvOptions lo;
    lo.refit_topic_model = false;
    const auto l = loocv(corpus, pipeline, lo);
    CHECK(l.evaluated + l.excluded == 40);
    CHECK(*l.brier >= 0.0);
    CHECK(*l.brier <= 2.0);

    config.kind = ModelKind::slda;
    CHECK_THROWS_AS(loocv(corpus, TopicRegressionPipeline(config), lo), Error);
}

TEST_CASE("holdout argument checks")
{
    const Corpus corpus = labelled_corpus(20, 3, 7);
    CHECK_THROWS_AS(repeated_holdout_cv(corpus, constant_pipeline(Eigen::Vector3d::Constant(1.0 / 3))), Error);
    const Corpus binary = labelled_corpus(20, 2, 7);
    HoldoutOptions opt;
    opt.train_fraction = 1.0;
    CHECK_THROWS_AS(repeated_holdout_cv(binary, oracle_pipeline(binary), opt), Error);
    opt.train_fraction = 0.5;
    opt.repeats = 0;
    CHECK_THROWS_AS(repeated_holdout_cv(binary, oracle_pipeline(binary), opt), Error);
}
