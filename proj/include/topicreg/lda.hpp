#pragma once

#include <cstdint>
#include <optional>
#include <variant>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

#include "topicreg/corpus.hpp"
#include "topicreg/random.hpp"

namespace topicreg {

/// k x v, one distribution over the vocabulary per row.
using TopicMatrix = Eigen::MatrixXd;
/// Point on the k-simplex.
using TopicProportions = Eigen::VectorXd;

struct LdaConfig {
    std::size_t k = 2;
    double alpha = 0.1;
    double beta = 0.1;
    double xi = 100.0;  ///< Mean document length, simulation only.
    std::size_t burnin = 1000;
    std::size_t iterations = 1000;
    std::size_t keep = 50;  ///< Thinning interval for averaged samples.
    std::uint64_t seed = 1;

    void validate() const;
};

struct LdaModel {
    TopicMatrix phi;     ///< k x v
    Eigen::MatrixXd theta;  ///< m x k, training documents
    LdaConfig config;
    std::size_t samples = 0;  ///< Number of averaged post-burnin samples.
};

/// Collapsed Gibbs sampler state. Count tables are kept consistent with the
/// assignments after every token move.
class GibbsState {
public:
    GibbsState(const Corpus& corpus, const LdaConfig& config, Rng& rng);

    void sweep(Rng& rng);

    /// Recounts every table from the assignments and compares.
    bool consistent() const;

    /// Smoothed estimates (n_lw + beta) / (n_l + v beta) and
    /// (n_jl + alpha) / (n_j + k alpha).
    TopicMatrix phi() const;
    Eigen::MatrixXd theta() const;

    const std::vector<std::vector<std::uint32_t>>& assignments() const { return z_; }

private:
    const Corpus* corpus_;
    std::size_t k_;
    std::size_t v_;
    double alpha_;
    double beta_;
    std::vector<std::vector<std::uint32_t>> z_;
    std::vector<std::uint32_t> topic_term_;  ///< k x v, row-major
    std::vector<std::uint32_t> doc_topic_;   ///< m x k, row-major
    std::vector<std::uint32_t> topic_total_;
    std::vector<double> weights_;
};

LdaModel fit_lda_gibbs(const Corpus& corpus, const LdaConfig& config);

/// Document lengths: Poisson(xi) with zero draws redrawn, or uniform on a
/// closed integer range.
struct PoissonLength {};
struct UniformLength {
    std::size_t min;
    std::size_t max;
};
using LengthModel = std::variant<PoissonLength, UniformLength>;

struct SimulatedLda {
    Corpus corpus;
    Eigen::MatrixXd theta;  ///< m x k ground truth
    TopicMatrix phi;
};

/// Draws documents from the LDA generative process. When `phi` is absent,
/// topics are drawn from Dir(beta) over `vocabulary_size` terms. When
/// `fixed_theta` is given it replaces the Dir(alpha) draw for every document.
/// Vocabulary terms are "w0", "w1", ...; every term is present even if unused.
SimulatedLda simulate_lda_corpus(const LdaConfig& config, std::size_t m,
                                 std::optional<TopicMatrix> phi = {},
                                 std::size_t vocabulary_size = 100,
                                 LengthModel lengths = PoissonLength{},
                                 std::optional<TopicProportions> fixed_theta = {});

/// N . log(theta phi); zero counts contribute nothing even where theta phi is
/// zero. Returns -inf for an impossible document.
double log_likelihood_theta(const Document& doc, const TopicProportions& theta,
                            const TopicMatrix& phi);

struct MleOptions {
    /// Iteration stops once l(theta) is provably within tol of the maximum.
    double tol = 1e-8;
    std::size_t max_iterations = 10000;
};

/// Maximum-likelihood topic proportions of a document under fixed topics,
/// by the EM fixed point theta_l <- (1/n) sum_i N_i theta_l phi_li / (theta phi)_i,
/// stopped by the duality gap max_l dl/dtheta_l - n.
/// The document must be encoded against phi's vocabulary.
TopicProportions estimate_theta_mle(const Document& doc, const TopicMatrix& phi,
                                    const MleOptions& options = {});

/// Greedy maximum-overlap matching: result[e] is the true topic matched to
/// estimated topic e. Overlap is sum_w min(estimated_ew, truth_tw).
std::vector<std::size_t> align_topics(const TopicMatrix& estimated, const TopicMatrix& truth);

/// Half the L1 distance between two distributions.
double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

void check_topic_matrix(const TopicMatrix& phi, double tol = 1e-8);

nlohmann::json to_json(const LdaConfig& config);
LdaConfig lda_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LdaModel& model);
LdaModel lda_model_from_json(const nlohmann::json& j);

}  // namespace topicreg
