#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace topicreg {

using TermId = std::uint32_t;

class Vocabulary {
public:
    Vocabulary() = default;

    /// Throws if `terms` is empty or contains duplicates.
    explicit Vocabulary(std::vector<std::string> terms);

    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }
    const std::string& term(TermId id) const { return terms_.at(id); }
    const std::vector<std::string>& terms() const { return terms_; }
    std::optional<TermId> find(const std::string& term) const;

    bool operator==(const Vocabulary& other) const { return terms_ == other.terms_; }

private:
    std::vector<std::string> terms_;
    std::unordered_map<std::string, TermId> index_;
};

struct TermCount {
    TermId term;
    std::uint32_t count;
    bool operator==(const TermCount&) const = default;
};

/// Token sequence plus its bag-of-words counts (sparse, sorted by term id).
class Document {
public:
    Document() = default;
    Document(std::string id, std::vector<TermId> tokens);

    const std::string& id() const { return id_; }
    const std::vector<TermId>& tokens() const { return tokens_; }
    const std::vector<TermCount>& counts() const { return counts_; }
    std::size_t length() const { return tokens_.size(); }
    bool empty() const { return tokens_.empty(); }

    std::uint32_t count(TermId term) const;
    std::vector<std::uint32_t> dense_counts(std::size_t vocabulary_size) const;

private:
    std::string id_;
    std::vector<TermId> tokens_;
    std::vector<TermCount> counts_;
};

enum class ResponseKind { numeric, binary, categorical };

std::string to_string(ResponseKind kind);
ResponseKind response_kind_from_string(const std::string& name);

/// Column of per-document responses with an explicit family tag. Categorical
/// values are level indices into `levels`; binary values are 0 or 1.
struct Responses {
    ResponseKind kind = ResponseKind::numeric;
    std::vector<double> values;
    std::vector<std::string> levels;

    std::size_t size() const { return values.size(); }
    std::size_t num_levels() const;

    /// Infers the family from raw strings: all 0/1 -> binary, all numeric ->
    /// numeric, otherwise categorical with levels in first-appearance order.
    static Responses infer(const std::vector<std::string>& raw);
    /// Reads raw strings as the given family; throws when a value does not fit.
    static Responses parse(const std::vector<std::string>& raw, ResponseKind kind);
    Responses subset(std::span<const std::size_t> rows) const;
};

struct Corpus {
    std::vector<Document> docs;
    Vocabulary vocabulary;
    std::optional<Responses> responses;

    std::size_t size() const { return docs.size(); }

    /// Throws if a token id is out of range or the response count differs.
    void validate() const;

    /// Documents at `rows`, re-encoded against a vocabulary built from those
    /// documents only.
    Corpus subset(std::span<const std::size_t> rows) const;

    std::vector<std::string> decode(const Document& doc) const;
};

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& token_docs);

/// Out-of-vocabulary tokens are dropped.
Document encode_document(const std::vector<std::string>& tokens, const Vocabulary& vocabulary,
                         std::string id = {});

std::vector<std::string> decode_document(const Document& doc, const Vocabulary& vocabulary);

/// Term ids occurring in at least ceil(min_fraction * m) documents.
std::vector<TermId> filter_by_document_frequency(const Corpus& corpus, double min_fraction);

/// Builds a corpus from cleaned token sequences.
Corpus make_corpus(const std::vector<std::vector<std::string>>& token_docs,
                   std::vector<std::string> ids = {}, std::optional<Responses> responses = {});

}  // namespace topicreg
