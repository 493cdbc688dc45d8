#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "topicreg/corpus.hpp"
#include "topicreg/text.hpp"

namespace topicreg {

/// One row of an input corpus before cleaning.
struct RawDocument {
    std::string id;
    std::string text;
    std::optional<std::string> response;
};

enum class CorpusFormat { csv, jsonl };

CorpusFormat corpus_format_from_string(const std::string& name);

/// Splits one CSV record honouring RFC 4180 quoting. Records spanning lines
/// are joined by read_raw_csv.
std::vector<std::string> split_csv_record(const std::string& line);
std::string csv_escape(const std::string& field);

/// CSV with a header row naming `id`, `text` and optionally `response`.
std::vector<RawDocument> read_raw_csv(std::istream& in);
/// One JSON object per line with fields id, text, response (optional).
std::vector<RawDocument> read_raw_jsonl(std::istream& in);
std::vector<RawDocument> read_raw_corpus(const std::filesystem::path& path, CorpusFormat format);

void write_raw_csv(std::ostream& out, const std::vector<RawDocument>& docs);
void write_raw_jsonl(std::ostream& out, const std::vector<RawDocument>& docs);

/// Cleans every document and builds a corpus over the resulting vocabulary.
/// Responses are attached only when every row carries one; their family is
/// inferred unless `kind` is given.
Corpus corpus_from_raw(const std::vector<RawDocument>& raw, const CleaningConfig& cleaning,
                       std::optional<ResponseKind> kind = {}, unsigned threads = 1);

/// Token strings of each raw document after cleaning.
std::vector<std::vector<std::string>> clean_documents(const std::vector<RawDocument>& raw,
                                                      const CleaningConfig& cleaning,
                                                      unsigned threads = 1);

nlohmann::json to_json(const Vocabulary& vocabulary);
Vocabulary vocabulary_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Document& doc);
Document document_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Responses& responses);
Responses responses_from_json(const nlohmann::json& j);

}  // namespace topicreg
