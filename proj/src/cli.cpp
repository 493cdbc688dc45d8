#include "topicreg/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "topicreg/corpus_io.hpp"
#include "topicreg/error.hpp"
#include "topicreg/evaluation.hpp"
#include "topicreg/json_eigen.hpp"
#include "topicreg/model_selection.hpp"
#include "topicreg/random.hpp"

namespace topicreg::cli {

using nlohmann::json;

std::string to_string(Command command)
{
    switch (command) {
    case Command::clean: return "clean";
    case Command::simulate: return "simulate";
    case Command::train: return "train";
    case Command::select_k: return "select-k";
    case Command::predict: return "predict";
    case Command::evaluate: return "evaluate";
    }
    return "train";
}

std::vector<std::size_t> RunConfig::k_range() const
{
    std::vector<std::size_t> out;
    for (std::size_t k = k_min; k <= k_max; ++k)
        out.push_back(k);
    return out;
}

PipelineConfig RunConfig::pipeline_config() const
{
    PipelineConfig c = default_pipeline_config(model, k);
    c.threads = threads;
    c.min_document_fraction = min_doc_fraction;

    c.lda.burnin = burnin;
    c.lda.iterations = iterations;
    c.lda.keep = keep;
    if (alpha > 0.0) {
        c.lda.alpha = alpha;
        c.slda.alpha = alpha;
        c.hmtm.alpha = alpha;
    }
    if (beta > 0.0) {
        c.lda.beta = beta;
        c.hmtm.beta = beta;
    }
    c.slda.topic_prior = topic_prior;
    c.slda.sigma2 = variance;
    c.slda.e_iterations = e_iterations;
    c.slda.m_iterations = m_iterations;
    c.hmtm.em_iterations = em_iterations;
    if (gamma > 0.0 && model == ModelKind::hmtm)
        c.hmtm.gamma = Eigen::MatrixXd::Constant(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k), gamma);
    return c;
}

namespace {

struct Parser {
    CLI::App app{"Topic-model regression: fit topic models to labelled text and predict responses", "topicreg"};
    RunConfig config;
    std::string model_name = "lda";
    std::map<CLI::App*, Command> commands;

    void common(CLI::App* sub, bool with_model)
    {
        sub->add_option("--seed", config.seed, "master random seed");
        sub->add_option("--threads", config.threads, "worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--format", config.format, "corpus format")->check(CLI::IsMember({"csv", "jsonl"}));
        if (with_model)
            sub->add_option("--model", model_name, "lda | slda | hmtm | hmtm-persistent | wordcount");
    }

    void cleaning(CLI::App* sub)
    {
        sub->add_flag("!--no-stem", config.stem, "keep words unstemmed");
        sub->add_flag("!--no-lowercase", config.lowercase, "keep letter case");
        sub->add_flag("!--no-strip", config.strip_punct, "keep punctuation and digits");
        sub->add_flag("!--no-stopwords", config.stopwords, "keep stopwords");
        sub->add_option("--response-kind", config.response_kind, "response family")
            ->check(CLI::IsMember({"auto", "numeric", "binary", "categorical"}));
    }

    void hyper(CLI::App* sub)
    {
        sub->add_option("--k", config.k, "number of topics")->check(CLI::PositiveNumber);
        sub->add_option("--alpha", config.alpha, "document prior (LDA, sLDA) or start prior (HMTM)");
        sub->add_option("--beta", config.beta, "topic prior (LDA, HMTM)");
        sub->add_option("--burnin", config.burnin, "Gibbs burn-in sweeps");
        sub->add_option("--iterations", config.iterations, "Gibbs sweeps after burn-in");
        sub->add_option("--keep", config.keep, "thinning interval of averaged samples")->check(CLI::PositiveNumber);
        sub->add_option("--topic-prior", config.topic_prior, "sLDA topic smoothing");
        sub->add_option("--variance", config.variance, "sLDA initial response variance");
        sub->add_option("--e-iterations", config.e_iterations, "sLDA E-step iterations");
        sub->add_option("--m-iterations", config.m_iterations, "sLDA EM rounds");
        sub->add_option("--em-iterations", config.em_iterations, "HMTM EM iterations");
        sub->add_option("--gamma", config.gamma, "symmetric HMTM transition prior");
        sub->add_option("--min-doc-fraction", config.min_doc_fraction, "word-count candidate threshold");
    }

    CLI::App* command(const std::string& name, const std::string& help, Command cmd)
    {
        CLI::App* sub = app.add_subcommand(name, help);
        commands[sub] = cmd;
        return sub;
    }

    Parser()
    {
        app.require_subcommand(1);

        auto* clean = command("clean", "clean a raw corpus", Command::clean);
        clean->add_option("--in", config.input, "raw corpus");
        clean->add_option("--out", config.output, "cleaned corpus");
        common(clean, false);
        cleaning(clean);

        auto* simulate = command("simulate", "draw a synthetic corpus", Command::simulate);
        simulate->add_option("--out", config.output, "corpus file");
        simulate->add_option("--truth", config.truth, "ground-truth JSON");
        simulate->add_option("--docs", config.docs, "number of documents")->check(CLI::PositiveNumber);
        simulate->add_option("--vocab", config.vocab, "vocabulary size")->check(CLI::PositiveNumber);
        simulate->add_option("--length-min", config.length_min, "shortest document")->check(CLI::PositiveNumber);
        simulate->add_option("--length-max", config.length_max, "longest document")->check(CLI::PositiveNumber);
        simulate->add_option("--response", config.response, "response attached to documents")
            ->check(CLI::IsMember({"none", "linear", "binary", "class"}));
        common(simulate, true);
        hyper(simulate);

        auto* train = command("train", "fit a topic regression", Command::train);
        train->add_option("--in", config.input, "labelled corpus");
        train->add_option("--out", config.output, "model JSON");
        common(train, true);
        cleaning(train);
        hyper(train);

        auto* select = command("select-k", "choose the number of topics by CVPE", Command::select_k);
        select->add_option("--in", config.input, "labelled corpus");
        select->add_option("--out", config.output, "report JSON");
        select->add_option("--k-min", config.k_min, "smallest candidate")->check(CLI::PositiveNumber);
        select->add_option("--k-max", config.k_max, "largest candidate")->check(CLI::PositiveNumber);
        select->add_option("--folds", config.folds, "cross-validation folds")->check(CLI::Range(2, 1000000));
        common(select, true);
        cleaning(select);
        hyper(select);

        auto* predict = command("predict", "predict responses of new documents", Command::predict);
        predict->add_option("--model-file", config.model_file, "model JSON written by train");
        predict->add_option("--in", config.input, "documents");
        predict->add_option("--out", config.output, "predictions CSV");
        common(predict, false);
        cleaning(predict);

        auto* evaluate = command("evaluate", "cross-validated predictive performance", Command::evaluate);
        evaluate->add_option("--in", config.input, "labelled corpus");
        evaluate->add_option("--out", config.output, "report JSON");
        evaluate->add_option("--roc-csv", config.roc_csv, "threshold-averaged ROC curve");
        evaluate->add_option("--method", config.method, "holdout | loocv")
            ->check(CLI::IsMember({"holdout", "loocv"}));
        evaluate->add_option("--repeats", config.repeats, "holdout repeats")->check(CLI::PositiveNumber);
        evaluate->add_option("--train-fraction", config.train_fraction, "holdout training share")
            ->check(CLI::Range(0.0, 1.0));
        evaluate->add_flag("--regression-only", config.regression_only,
                           "fit the topic model once on the whole corpus and refit only the regression per split");
        common(evaluate, true);
        cleaning(evaluate);
        hyper(evaluate);
    }
};

bool ends_with(const std::string& s, const std::string& suffix)
{
    return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

CorpusFormat format_for(const RunConfig& c, const std::string& path)
{
    if (c.format == "csv" && ends_with(path, ".jsonl"))
        return CorpusFormat::jsonl;
    return corpus_format_from_string(c.format);
}

CleaningConfig cleaning_of(const RunConfig& c)
{
    CleaningConfig cleaning;
    cleaning.lowercase = c.lowercase;
    cleaning.strip_punct_numbers = c.strip_punct;
    cleaning.stem = c.stem;
    if (!c.stopwords)
        cleaning.stopword_list.clear();
    return cleaning;
}

std::optional<ResponseKind> response_kind_of(const RunConfig& c)
{
    if (c.response_kind == "auto")
        return std::nullopt;
    return response_kind_from_string(c.response_kind);
}

std::vector<RawDocument> read_input(const RunConfig& c)
{
    if (!std::filesystem::exists(c.input))
        throw Error("input file '" + c.input + "' does not exist");
    return read_raw_corpus(c.input, format_for(c, c.input));
}

Corpus labelled_corpus(const RunConfig& c)
{
    Corpus corpus = corpus_from_raw(read_input(c), cleaning_of(c), response_kind_of(c), c.threads);
    require(corpus.responses.has_value(), "every document in '" + c.input + "' needs a response");
    return corpus;
}

std::ofstream open_output(const std::string& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write output file '" + path + "'");
    return out;
}

void write_json(const std::string& path, const json& j)
{
    auto out = open_output(path);
    out << j.dump(2) << '\n';
}

// Letters only, avoiding vowels and the suffix letters l, s and y, so the
// words pass through cleaning and stemming unchanged.
std::string synthetic_word(TermId id)
{
    static constexpr std::string_view letters = "bcdfghjkmnpqrtvwxz";
    std::string word = "x";
    std::size_t v = id;
    do {
        word.push_back(letters[v % letters.size()]);
        v /= letters.size();
    } while (v > 0);
    return word;
}

std::string format_number(double v)
{
    std::ostringstream s;
    s.precision(17);
    s << v;
    return s.str();
}

void usage_fail(const std::string& message)
{
    throw UsageError(message, "run 'topicreg --help' for usage");
}

void require_paths(const RunConfig& c)
{
    auto need = [&](const std::string& value, const char* flag) {
        if (value.empty())
            usage_fail(to_string(c.command) + " needs " + flag);
    };
    switch (c.command) {
    case Command::clean:
        need(c.input, "--in");
        need(c.output, "--out");
        break;
    case Command::simulate: need(c.output, "--out"); break;
    case Command::train:
        need(c.input, "--in");
        need(c.output, "--out");
        break;
    case Command::select_k:
        need(c.input, "--in");
        if (c.k_min > c.k_max)
            usage_fail("--k-min exceeds --k-max");
        break;
    case Command::predict:
        need(c.model_file, "--model-file");
        need(c.input, "--in");
        need(c.output, "--out");
        break;
    case Command::evaluate: need(c.input, "--in"); break;
    }
    if (c.command == Command::simulate && c.length_min > c.length_max)
        usage_fail("--length-min exceeds --length-max");
}

int run_clean(const RunConfig& c, std::ostream& log)
{
    const auto raw = read_input(c);
    const auto tokens = clean_documents(raw, cleaning_of(c), c.threads);
    std::vector<RawDocument> cleaned = raw;
    for (std::size_t j = 0; j < cleaned.size(); ++j) {
        std::string text;
        for (const auto& t : tokens[j]) {
            if (!text.empty())
                text.push_back(' ');
            text += t;
        }
        cleaned[j].text = std::move(text);
    }
    auto out = open_output(c.output);
    if (format_for(c, c.output) == CorpusFormat::jsonl)
        write_raw_jsonl(out, cleaned);
    else
        write_raw_csv(out, cleaned);
    log << "cleaned " << cleaned.size() << " documents\n";
    return 0;
}

int run_simulate(const RunConfig& c, std::ostream& log)
{
    Rng rng(derive_seed(c.seed, 0));
    Eigen::MatrixXd theta;
    Corpus corpus;
    json truth;
    const PipelineConfig pc = c.pipeline_config();
    if (c.model == ModelKind::lda || c.model == ModelKind::slda || c.model == ModelKind::wordcount) {
        LdaConfig lc = pc.lda;
        lc.seed = c.seed;
        auto sim = simulate_lda_corpus(lc, c.docs, std::nullopt, c.vocab, UniformLength{c.length_min, c.length_max});
        theta = sim.theta;
        corpus = std::move(sim.corpus);
        truth = {{"phi", matrix_to_json(sim.phi)}, {"theta", matrix_to_json(sim.theta)}};
    } else {
        HmtmConfig hc = pc.hmtm;
        hc.seed = c.seed;
        std::uniform_int_distribution<std::size_t> len(c.length_min, c.length_max);
        std::vector<std::size_t> lengths(c.docs);
        for (auto& n : lengths)
            n = len(rng);
        auto sim = simulate_hmtm_corpus(hc, c.docs, lengths, std::nullopt, c.vocab);
        theta.resize(static_cast<Eigen::Index>(c.docs), static_cast<Eigen::Index>(c.k));
        for (std::size_t j = 0; j < c.docs; ++j) {
            const auto& transitions = sim.truth.transitions[j];
            TopicProportions eq;
            try {
                eq = equilibrium_distribution(transitions);
            } catch (const Error&) {
                eq = row_average_distribution(transitions);
            }
            theta.row(static_cast<Eigen::Index>(j)) = eq.transpose();
        }
        corpus = std::move(sim.corpus);
        truth = to_json(sim.truth);
        truth["theta"] = matrix_to_json(theta);
    }

    std::normal_distribution<double> noise(0.0, 0.1);
    std::vector<RawDocument> raw;
    std::vector<std::string> responses;
    for (std::size_t j = 0; j < corpus.size(); ++j) {
        const Document& doc = corpus.docs[j];
        RawDocument r;
        r.id = doc.id();
        for (TermId t : doc.tokens()) {
            if (!r.text.empty())
                r.text.push_back(' ');
            r.text += synthetic_word(t);
        }
        const auto row = theta.row(static_cast<Eigen::Index>(j));
        if (c.response == "linear") {
            r.response = format_number(5.0 * row(0) + noise(rng));
        } else if (c.response == "binary") {
            const double p = 1.0 / (1.0 + std::exp(-8.0 * (row(0) - 0.5)));
            r.response = std::bernoulli_distribution(p)(rng) ? "1" : "0";
        } else if (c.response == "class") {
            Eigen::Index top = 0;
            row.maxCoeff(&top);
            r.response = "class" + std::string(1, static_cast<char>('a' + top % 26)) + std::to_string(top / 26);
        }
        if (r.response)
            responses.push_back(*r.response);
        raw.push_back(std::move(r));
    }
    truth["responses"] = responses;

    auto out = open_output(c.output);
    if (format_for(c, c.output) == CorpusFormat::jsonl)
        write_raw_jsonl(out, raw);
    else
        write_raw_csv(out, raw);
    if (!c.truth.empty())
        write_json(c.truth, truth);
    log << "simulated " << raw.size() << " documents (" << to_string(c.model) << ", k=" << c.k << ")\n";
    return 0;
}

int run_train(const RunConfig& c, std::ostream& log)
{
    const Corpus corpus = labelled_corpus(c);
    const TopicRegressionPipeline pipeline(c.pipeline_config());
    const auto fitted = pipeline.fit(corpus, c.seed);
    json model = fitted->to_json();
    model["cleaning"] = {{"lowercase", c.lowercase},
                         {"strip_punct_numbers", c.strip_punct},
                         {"stopwords", c.stopwords},
                         {"stem", c.stem}};
    write_json(c.output, model);
    log << "trained " << to_string(c.model) << " (k=" << c.k << ") on " << corpus.size() << " documents, "
        << corpus.vocabulary.size() << " terms\n";
    return 0;
}

int run_select_k(const RunConfig& c, std::ostream& log)
{
    const Corpus corpus = labelled_corpus(c);
    SelectionOptions options;
    options.folds = c.folds;
    options.seed = c.seed;
    options.threads = c.threads;
    const auto report = select_num_topics(corpus, c.pipeline_config(), c.k_range(), options);
    if (!c.output.empty())
        write_json(c.output, to_json(report));
    for (const auto& cand : report.candidates)
        log << "k=" << cand.k << " cvpe=" << format_number(cand.value.cvpe) << " excluded=" << cand.excluded << '\n';
    log << "chosen k=" << report.chosen_k << '\n';
    return 0;
}

int run_predict(const RunConfig& c, std::ostream& log)
{
    std::ifstream model_in(c.model_file);
    if (!model_in)
        throw Error("cannot open model file '" + c.model_file + "'");
    json mj;
    try {
        mj = json::parse(model_in);
    } catch (const json::exception& e) {
        throw Error("model file '" + c.model_file + "' is not valid JSON: " + e.what());
    }
    const auto fitted = fitted_pipeline_from_json(mj);
    const auto raw = read_input(c);
    // Documents are cleaned the way the training corpus was.
    RunConfig cleaning = c;
    if (mj.contains("cleaning")) {
        const json& cj = mj["cleaning"];
        cleaning.lowercase = cj.value("lowercase", c.lowercase);
        cleaning.strip_punct = cj.value("strip_punct_numbers", c.strip_punct);
        cleaning.stopwords = cj.value("stopwords", c.stopwords);
        cleaning.stem = cj.value("stem", c.stem);
    }
    const auto tokens = clean_documents(raw, cleaning_of(cleaning), c.threads);

    const json& response = mj.at("response");
    const auto kind = response_kind_from_string(response.at("kind").get<std::string>());
    std::vector<std::string> columns;
    if (kind == ResponseKind::numeric) {
        columns = {"prediction"};
    } else if (kind == ResponseKind::binary) {
        columns = {"p_0", "p_1"};
    } else {
        for (const auto& level : response.at("levels"))
            columns.push_back("p_" + level.get<std::string>());
    }

    auto out = open_output(c.output);
    out << "doc_id";
    for (const auto& col : columns)
        out << ',' << csv_escape(col);
    out << ",stable,note\n";
    std::size_t skipped = 0;
    for (std::size_t j = 0; j < raw.size(); ++j) {
        const Prediction p = fitted->predict({raw[j].id, tokens[j]});
        out << csv_escape(raw[j].id);
        for (std::size_t i = 0; i < columns.size(); ++i) {
            out << ',';
            if (p.stable)
                out << format_number(p.values(static_cast<Eigen::Index>(i)));
        }
        out << ',' << (p.stable ? 1 : 0) << ',' << csv_escape(p.note) << '\n';
        if (!p.stable)
            ++skipped;
    }
    log << "predicted " << raw.size() - skipped << " of " << raw.size() << " documents; skipped " << skipped << '\n';
    return 0;
}

int run_evaluate(const RunConfig& c, std::ostream& log)
{
    const Corpus corpus = labelled_corpus(c);
    const TopicRegressionPipeline pipeline(c.pipeline_config());
    EvalReport report;
    if (c.method == "holdout") {
        HoldoutOptions options;
        options.train_fraction = c.train_fraction;
        options.repeats = c.repeats;
        options.seed = c.seed;
        options.threads = c.threads;
        options.refit_topic_model = !c.regression_only;
        report = repeated_holdout_cv(corpus, pipeline, options);
    } else {
        LoocvOptions options;
        options.seed = c.seed;
        options.threads = c.threads;
        options.refit_topic_model = !c.regression_only;
        report = loocv(corpus, pipeline, options);
    }
    if (!c.output.empty())
        write_json(c.output, to_json(report));
    if (!c.roc_csv.empty() && report.curve) {
        auto out = open_output(c.roc_csv);
        write_roc_csv(out, *report.curve);
    }
    log << report.method << ": evaluated " << report.evaluated << ", excluded " << report.excluded << '\n';
    if (report.auc)
        log << "AUC " << format_number(*report.auc) << " (95% CI " << format_number(*report.auc_ci_low) << " to "
            << format_number(*report.auc_ci_high) << ")\n";
    if (report.brier)
        log << "Brier " << format_number(*report.brier) << ", hard accuracy " << format_number(*report.accuracy)
            << '\n';
    if (report.mse)
        log << "MSE " << format_number(*report.mse) << '\n';
    return 0;
}

}  // namespace

RunConfig parse_args(const std::vector<std::string>& args)
{
    Parser parser;
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        parser.app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        throw UsageError("", parser.app.help());
    } catch (const CLI::CallForAllHelp&) {
        throw UsageError("", parser.app.help("", CLI::AppFormatMode::All));
    } catch (const CLI::ParseError& e) {
        throw UsageError(e.what(), parser.app.help());
    }
    RunConfig config = parser.config;
    for (const auto& [sub, cmd] : parser.commands)
        if (sub->parsed())
            config.command = cmd;
    try {
        config.model = model_kind_from_string(parser.model_name);
    } catch (const Error& e) {
        throw UsageError(e.what(), parser.app.help());
    }
    return config;
}

int run(const RunConfig& config, std::ostream& log)
{
    try {
        require_paths(config);
    } catch (const UsageError& e) {
        log << "error: " << e.what() << '\n' << e.usage() << '\n';
        return 2;
    }
    try {
        switch (config.command) {
        case Command::clean: return run_clean(config, log);
        case Command::simulate: return run_simulate(config, log);
        case Command::train: return run_train(config, log);
        case Command::select_k: return run_select_k(config, log);
        case Command::predict: return run_predict(config, log);
        case Command::evaluate: return run_evaluate(config, log);
        }
    } catch (const std::exception& e) {
        log << "error: " << e.what() << '\n';
        return 1;
    }
    return 1;
}

int main_entry(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    RunConfig config;
    try {
        config = parse_args(args);
    } catch (const UsageError& e) {
        if (std::string(e.what()).empty()) {
            out << e.usage();
            return 0;
        }
        err << "error: " << e.what() << '\n' << e.usage();
        return 2;
    }
    return run(config, err);
}

}  // namespace topicreg::cli
