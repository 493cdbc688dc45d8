#include "topicreg/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>

#include "topicreg/error.hpp"

namespace topicreg {

Vocabulary::Vocabulary(std::vector<std::string> terms) : terms_(std::move(terms))
{
    require(!terms_.empty(), "empty vocabulary");
    index_.reserve(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i) {
        const bool inserted = index_.emplace(terms_[i], static_cast<TermId>(i)).second;
        require(inserted, "duplicate vocabulary term '" + terms_[i] + "'");
    }
}

std::optional<TermId> Vocabulary::find(const std::string& term) const
{
    if (auto it = index_.find(term); it != index_.end())
        return it->second;
    return std::nullopt;
}

Document::Document(std::string id, std::vector<TermId> tokens)
    : id_(std::move(id)), tokens_(std::move(tokens))
{
    std::map<TermId, std::uint32_t> tally;
    for (TermId t : tokens_)
        ++tally[t];
    counts_.reserve(tally.size());
    for (const auto& [term, count] : tally)
        counts_.push_back({term, count});
}

std::uint32_t Document::count(TermId term) const
{
    auto it = std::lower_bound(counts_.begin(), counts_.end(), term,
                               [](const TermCount& c, TermId t) { return c.term < t; });
    return it != counts_.end() && it->term == term ? it->count : 0;
}

std::vector<std::uint32_t> Document::dense_counts(std::size_t vocabulary_size) const
{
    std::vector<std::uint32_t> dense(vocabulary_size, 0);
    for (const auto& c : counts_)
        dense.at(c.term) = c.count;
    return dense;
}

std::string to_string(ResponseKind kind)
{
    switch (kind) {
    case ResponseKind::numeric: return "numeric";
    case ResponseKind::binary: return "binary";
    case ResponseKind::categorical: return "categorical";
    }
    return "numeric";
}

ResponseKind response_kind_from_string(const std::string& name)
{
    if (name == "numeric")
        return ResponseKind::numeric;
    if (name == "binary")
        return ResponseKind::binary;
    if (name == "categorical")
        return ResponseKind::categorical;
    throw Error("unknown response kind '" + name + "'");
}

std::size_t Responses::num_levels() const
{
    switch (kind) {
    case ResponseKind::numeric: return 1;
    case ResponseKind::binary: return 2;
    case ResponseKind::categorical: return levels.size();
    }
    return 1;
}

namespace {

std::optional<double> parse_number(const std::string& s)
{
    const char* begin = s.data();
    const char* end = s.data() + s.size();
    while (begin < end && *begin == ' ')
        ++begin;
    while (end > begin && end[-1] == ' ')
        --end;
    if (begin == end)
        return std::nullopt;
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(begin, end, value);
    if (ec != std::errc{} || ptr != end || !std::isfinite(value))
        return std::nullopt;
    return value;
}

}  // namespace

Responses Responses::infer(const std::vector<std::string>& raw)
{
    Responses out;
    std::vector<double> numbers;
    numbers.reserve(raw.size());
    bool numeric = true;
    for (const auto& s : raw) {
        auto v = parse_number(s);
        if (!v) {
            numeric = false;
            break;
        }
        numbers.push_back(*v);
    }
    if (numeric) {
        const bool binary = !numbers.empty() && std::all_of(numbers.begin(), numbers.end(), [](double v) {
            return v == 0.0 || v == 1.0;
        });
        out.kind = binary ? ResponseKind::binary : ResponseKind::numeric;
        out.values = std::move(numbers);
        return out;
    }
    return parse(raw, ResponseKind::categorical);
}

Responses Responses::parse(const std::vector<std::string>& raw, ResponseKind kind)
{
    if (kind == ResponseKind::categorical) {
        Responses out;
        out.kind = kind;
        std::map<std::string, std::size_t> level_index;
        for (const auto& s : raw) {
            auto [it, inserted] = level_index.emplace(s, out.levels.size());
            if (inserted)
                out.levels.push_back(s);
            out.values.push_back(static_cast<double>(it->second));
        }
        return out;
    }
    Responses out;
    out.kind = kind;
    for (const auto& s : raw) {
        auto v = parse_number(s);
        require(v.has_value(), "response '" + s + "' is not numeric");
        if (kind == ResponseKind::binary)
            require(*v == 0.0 || *v == 1.0, "binary response '" + s + "' is not 0 or 1");
        out.values.push_back(*v);
    }
    return out;
}

Responses Responses::subset(std::span<const std::size_t> rows) const
{
    Responses out;
    out.kind = kind;
    out.levels = levels;
    out.values.reserve(rows.size());
    for (std::size_t r : rows)
        out.values.push_back(values.at(r));
    return out;
}

void Corpus::validate() const
{
    for (const auto& doc : docs)
        for (TermId t : doc.tokens())
            require(t < vocabulary.size(), "token id out of vocabulary range in document '" + doc.id() + "'");
    if (responses)
        require(responses->size() == docs.size(), "response count differs from document count");
}

std::vector<std::string> Corpus::decode(const Document& doc) const
{
    return decode_document(doc, vocabulary);
}

Corpus Corpus::subset(std::span<const std::size_t> rows) const
{
    std::vector<std::vector<std::string>> token_docs;
    std::vector<std::string> ids;
    token_docs.reserve(rows.size());
    for (std::size_t r : rows) {
        const auto& doc = docs.at(r);
        token_docs.push_back(decode(doc));
        ids.push_back(doc.id());
    }
    std::optional<Responses> sub;
    if (responses)
        sub = responses->subset(rows);
    return make_corpus(token_docs, std::move(ids), std::move(sub));
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& token_docs)
{
    std::vector<std::string> terms;
    std::unordered_map<std::string, TermId> seen;
    for (const auto& doc : token_docs)
        for (const auto& token : doc)
            if (seen.emplace(token, static_cast<TermId>(terms.size())).second)
                terms.push_back(token);
    require(!terms.empty(), "empty vocabulary");
    return Vocabulary(std::move(terms));
}

Document encode_document(const std::vector<std::string>& tokens, const Vocabulary& vocabulary,
                         std::string id)
{
    std::vector<TermId> ids;
    ids.reserve(tokens.size());
    for (const auto& token : tokens)
        if (auto t = vocabulary.find(token))
            ids.push_back(*t);
    return Document(std::move(id), std::move(ids));
}

std::vector<std::string> decode_document(const Document& doc, const Vocabulary& vocabulary)
{
    std::vector<std::string> out;
    out.reserve(doc.length());
    for (TermId t : doc.tokens())
        out.push_back(vocabulary.term(t));
    return out;
}

std::vector<TermId> filter_by_document_frequency(const Corpus& corpus, double min_fraction)
{
    require(min_fraction >= 0.0 && min_fraction <= 1.0, "min_fraction must lie in [0, 1]");
    const auto threshold = static_cast<std::size_t>(
        std::ceil(min_fraction * static_cast<double>(corpus.size()) - 1e-12));
    std::vector<std::size_t> df(corpus.vocabulary.size(), 0);
    for (const auto& doc : corpus.docs)
        for (const auto& c : doc.counts())
            ++df[c.term];
    std::vector<TermId> out;
    for (std::size_t t = 0; t < df.size(); ++t)
        if (df[t] >= threshold)
            out.push_back(static_cast<TermId>(t));
    return out;
}

Corpus make_corpus(const std::vector<std::vector<std::string>>& token_docs, std::vector<std::string> ids,
                   std::optional<Responses> responses)
{
    Corpus corpus;
    corpus.vocabulary = build_vocabulary(token_docs);
    corpus.docs.reserve(token_docs.size());
    for (std::size_t j = 0; j < token_docs.size(); ++j) {
        std::string id = j < ids.size() ? ids[j] : std::to_string(j);
        corpus.docs.push_back(encode_document(token_docs[j], corpus.vocabulary, std::move(id)));
    }
    corpus.responses = std::move(responses);
    corpus.validate();
    return corpus;
}

}  // namespace topicreg
