#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "topicreg/pipeline.hpp"

namespace topicreg::cli {

/// Invalid command line; maps to exit code 2.
class UsageError : public std::runtime_error {
public:
    UsageError(const std::string& message, std::string usage)
        : std::runtime_error(message), usage_(std::move(usage)) {}
    const std::string& usage() const { return usage_; }

private:
    std::string usage_;
};

enum class Command { clean, simulate, train, select_k, predict, evaluate };

std::string to_string(Command command);

struct RunConfig {
    Command command = Command::train;
    std::string input;
    std::string output;
    std::string model_file;  ///< predict
    std::string roc_csv;     ///< evaluate, optional
    std::string truth;       ///< simulate, optional ground-truth JSON
    ModelKind model = ModelKind::lda;
    std::string format = "csv";
    std::string response_kind = "auto";  ///< auto | numeric | binary | categorical
    std::uint64_t seed = 1;
    unsigned threads = 1;

    std::size_t k = 2;
    std::size_t k_min = 2;
    std::size_t k_max = 40;
    std::size_t folds = 10;

    std::string method = "holdout";
    std::size_t repeats = 100;
    double train_fraction = 0.95;
    bool regression_only = false;  ///< evaluate: topic model fitted once

    // cleaning
    bool stem = true;
    bool lowercase = true;
    bool strip_punct = true;
    bool stopwords = true;

    // LDA / sLDA / HMTM hyperparameters
    double alpha = -1.0;  ///< negative: model default
    double beta = -1.0;
    std::size_t burnin = 1000;
    std::size_t iterations = 1000;
    std::size_t keep = 50;
    double topic_prior = 0.1;
    double variance = 0.25;
    std::size_t e_iterations = 10;
    std::size_t m_iterations = 4;
    std::size_t em_iterations = 200;
    double gamma = -1.0;  ///< symmetric transition prior; negative: 1/k
    double min_doc_fraction = 0.025;

    // simulate
    std::size_t docs = 100;
    std::size_t vocab = 100;
    std::size_t length_min = 50;
    std::size_t length_max = 100;
    std::string response = "linear";  ///< none | linear | binary | class

    std::vector<std::size_t> k_range() const;
    PipelineConfig pipeline_config() const;
};

/// argv excludes the program name. Throws UsageError.
RunConfig parse_args(const std::vector<std::string>& args);

/// Executes a command. Returns 0 on success, 1 on runtime failure and 2 on
/// an invalid configuration. Messages go to `log`.
int run(const RunConfig& config, std::ostream& log);

/// parse_args + run with exit-code mapping.
int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace topicreg::cli
