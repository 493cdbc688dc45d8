#include <doctest.h>

#include <random>
#include <set>

#include "topicreg/error.hpp"
#include "topicreg/model_selection.hpp"

using namespace topicreg;

namespace {

// LDA corpus with a numeric response linear in the true proportions.
Corpus linear_response_corpus(std::size_t k_true, std::size_t m, std::uint64_t seed)
{
    LdaConfig c;
    c.k = k_true;
    c.alpha = 0.3;
    c.beta = 0.05;
    c.xi = 80;
    c.seed = seed;
    auto sim = simulate_lda_corpus(c, m, std::nullopt, 60);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 0.1);
    Responses r;
    r.kind = ResponseKind::numeric;
    for (std::size_t j = 0; j < m; ++j) {
        double y = 0.0;
        for (std::size_t l = 0; l < k_true; ++l)
            y += 4.0 * static_cast<double>(l) * sim.theta(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(l));
        r.values.push_back(y + noise(rng));
    }
    sim.corpus.responses = r;
    return sim.corpus;
}

PipelineConfig quick_lda()
{
    PipelineConfig p = default_pipeline_config(ModelKind::lda, 2);
    p.lda.burnin = 150;
    p.lda.iterations = 100;
    p.lda.keep = 10;
    return p;
}

}  // namespace

TEST_CASE("cvpe arithmetic")
{
    CHECK(cvpe({{{1, 2, 3}, {1, 2, 3}}, {{0.5}, {0.5}}}).cvpe == 0.0);
    CHECK(cvpe({{{0, 0}, {1, -1}}}).cvpe == 1.0);

    const auto v = cvpe({{{2}, {0}}, {{1, 1, 1}, {1, 1, 1}}});
    CHECK(v.cvpe == 1.0);
    CHECK(v.fold_sizes == std::vector<std::size_t>{1, 3});
    CHECK(v.fold_mse == std::vector<double>{4.0, 0.0});

    CHECK_THROWS_WITH_AS(cvpe({{{1}, {1}}, {{}, {}}}), "empty fold", Error);
    CHECK_THROWS_AS(cvpe({}), Error);
    CHECK_THROWS_AS(cvpe({{{1, 2}, {1}}}), Error);
}

TEST_CASE("cvpe is the size-weighted mean of fold MSEs")
{
    std::mt19937_64 rng(1);
    std::uniform_int_distribution<int> size(1, 12);
    std::normal_distribution<double> z(0.0, 1.0);
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<FoldPredictions> folds(static_cast<std::size_t>(1 + trial % 7));
        double total = 0.0;
        std::size_t m = 0;
        for (auto& f : folds) {
            const int n = size(rng);
            for (int i = 0; i < n; ++i) {
                f.y.push_back(z(rng));
                f.y_hat.push_back(z(rng));
                total += (f.y.back() - f.y_hat.back()) * (f.y.back() - f.y_hat.back());
            }
            m += static_cast<std::size_t>(n);
        }
        const auto v = cvpe(folds);
        // with every fold weighted by its size this is the pooled mean
        CHECK(v.cvpe == doctest::Approx(total / static_cast<double>(m)).epsilon(1e-12));
        double recomposed = 0.0;
        for (std::size_t i = 0; i < folds.size(); ++i)
            recomposed += static_cast<double>(v.fold_sizes[i]) / static_cast<double>(m) * v.fold_mse[i];
        CHECK(v.cvpe == doctest::Approx(recomposed).epsilon(1e-14));
    }
}

TEST_CASE("folds partition the documents")
{
    for (std::size_t m : {2u, 7u, 10u, 53u, 200u}) {
        for (std::size_t k : {1u, 3u, 10u}) {
            const auto folds = make_folds(m, k, 42);
            CHECK(folds.size() == std::min(k, m));
            std::set<std::size_t> seen;
            std::size_t smallest = m, largest = 0;
            for (const auto& f : folds) {
                CHECK_FALSE(f.empty());
                smallest = std::min(smallest, f.size());
                largest = std::max(largest, f.size());
                for (std::size_t r : f)
                    CHECK(seen.insert(r).second);
            }
            CHECK(seen.size() == m);
            CHECK(*seen.rbegin() == m - 1);
            CHECK(largest - smallest <= 1);
        }
    }
    CHECK(make_folds(30, 5, 7) == make_folds(30, 5, 7));
    CHECK(make_folds(30, 5, 7) != make_folds(30, 5, 8));
    CHECK_THROWS_AS(make_folds(1, 2, 1), Error);
    CHECK_THROWS_AS(make_folds(5, 0, 1), Error);
}

TEST_CASE("single candidate is chosen and the report is self-consistent")
{
    const Corpus corpus = linear_response_corpus(2, 40, 3);
    SelectionOptions opt;
    opt.folds = 4;
    opt.seed = 9;
    const auto report = select_num_topics(corpus, quick_lda(), {3}, opt);
    CHECK(report.chosen_k == 3);
    REQUIRE(report.candidates.size() == 1);
    CHECK(report.folds == 4);

    const auto& cand = report.candidates[0];
    CHECK(cand.rows.size() == corpus.size());
    CHECK(cand.excluded == 0);
    // training and test rows never overlap, and every document is tested once
    std::set<std::size_t> tested(cand.rows.begin(), cand.rows.end());
    CHECK(tested.size() == corpus.size());
    std::set<std::string> ids;
    for (const auto& fold : report.fold_rows) {
        std::set<std::string> test_ids, train_ids;
        for (std::size_t r : fold)
            test_ids.insert(corpus.docs[r].id());
        for (std::size_t j = 0; j < corpus.size(); ++j)
            if (!std::binary_search(fold.begin(), fold.end(), j))
                train_ids.insert(corpus.docs[j].id());
        for (const auto& id : test_ids)
            CHECK(train_ids.count(id) == 0);
    }

    // recompute CVPE from the stored out-of-fold predictions
    std::vector<std::vector<double>> losses;
    std::size_t at = 0;
    for (const auto& fold : report.fold_rows) {
        std::vector<double> l;
        for (std::size_t i = 0; i < fold.size(); ++i, ++at) {
            const double y = corpus.responses->values[cand.rows[at]];
            const double yhat = cand.predictions[at].values(0);
            l.push_back((y - yhat) * (y - yhat));
        }
        losses.push_back(l);
    }
    CHECK(cand.value.cvpe == doctest::Approx(cvpe_from_losses(losses).cvpe).epsilon(1e-12));

    const auto j = to_json(report);
    CHECK(j["chosen_k"] == 3);
    CHECK(j["candidates"][0]["fold_sizes"].size() == 4);
}

TEST_CASE("selection is reproducible and independent of thread count")
{
    const Corpus corpus = linear_response_corpus(2, 30, 4);
    SelectionOptions opt;
    opt.folds = 3;
    const auto a = select_num_topics(corpus, quick_lda(), {2, 3}, opt);
    opt.threads = 4;
    const auto b = select_num_topics(corpus, quick_lda(), {2, 3}, opt);
    CHECK(to_json(a).dump() == to_json(b).dump());
}

TEST_CASE("the generating topic count beats a much larger one")
{
    const Corpus corpus = linear_response_corpus(3, 150, 11);
    SelectionOptions opt;
    opt.folds = 5;
    opt.seed = 2;
    opt.threads = 4;
    const auto report = select_num_topics(corpus, quick_lda(), {3, 10}, opt);
    CHECK(report.candidates[0].value.cvpe <= report.candidates[1].value.cvpe);
    CHECK(report.chosen_k == 3);
}

TEST_CASE("ties go to the smallest k and bad input is rejected")
{
    // An all-zero response is fitted exactly by every k, so CVPE ties at 0.
    Corpus corpus = linear_response_corpus(2, 20, 5);
    corpus.responses->values.assign(corpus.size(), 0.0);
    SelectionOptions opt;
    opt.folds = 4;
    const auto report = select_num_topics(corpus, quick_lda(), {4, 2, 3}, opt);
    for (const auto& c : report.candidates)
        CHECK(c.value.cvpe == 0.0);
    CHECK(report.chosen_k == 2);

    CHECK_THROWS_AS(select_num_topics(corpus, quick_lda(), {}, opt), Error);
    Corpus unlabelled = corpus;
    unlabelled.responses.reset();
    CHECK_THROWS_AS(select_num_topics(unlabelled, quick_lda(), {2}, opt), Error);
}
