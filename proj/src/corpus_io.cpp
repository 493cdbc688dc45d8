#include "topicreg/corpus_io.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "topicreg/error.hpp"
#include "topicreg/parallel.hpp"

namespace topicreg {

using nlohmann::json;

CorpusFormat corpus_format_from_string(const std::string& name)
{
    if (name == "csv")
        return CorpusFormat::csv;
    if (name == "jsonl")
        return CorpusFormat::jsonl;
    throw Error("unknown corpus format '" + name + "'");
}

std::vector<std::string> split_csv_record(const std::string& line)
{
    std::vector<std::string> fields;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c != '\r') {
            field.push_back(c);
        }
    }
    require(!quoted, "unterminated quoted CSV field");
    fields.push_back(std::move(field));
    return fields;
}

std::string csv_escape(const std::string& field)
{
    if (field.find_first_of(",\"\n\r") == std::string::npos)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

namespace {

bool balanced_quotes(const std::string& record)
{
    return std::count(record.begin(), record.end(), '"') % 2 == 0;
}

// Reads one logical CSV record, joining physical lines inside quotes.
bool read_record(std::istream& in, std::string& record)
{
    record.clear();
    std::string line;
    if (!std::getline(in, line))
        return false;
    record = line;
    while (!balanced_quotes(record) && std::getline(in, line)) {
        record.push_back('\n');
        record += line;
    }
    return true;
}

std::string strip_bom(std::string s)
{
    if (s.size() >= 3 && static_cast<unsigned char>(s[0]) == 0xEF
        && static_cast<unsigned char>(s[1]) == 0xBB && static_cast<unsigned char>(s[2]) == 0xBF)
        s.erase(0, 3);
    return s;
}

}  // namespace

std::vector<RawDocument> read_raw_csv(std::istream& in)
{
    std::string record;
    require(read_record(in, record), "CSV input has no header row");
    const auto header = split_csv_record(strip_bom(record));
    auto column = [&](const std::string& name) -> std::optional<std::size_t> {
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end())
            return std::nullopt;
        return static_cast<std::size_t>(it - header.begin());
    };
    const auto id_col = column("id");
    const auto text_col = column("text");
    const auto response_col = column("response");
    require(text_col.has_value(), "CSV header must name a 'text' column");

    std::vector<RawDocument> docs;
    std::size_t line_no = 1;
    while (read_record(in, record)) {
        ++line_no;
        if (record.empty() || record == "\r")
            continue;
        const auto fields = split_csv_record(record);
        require(fields.size() == header.size(),
                "CSV record " + std::to_string(line_no) + " has " + std::to_string(fields.size())
                    + " fields, expected " + std::to_string(header.size()));
        RawDocument doc;
        doc.id = id_col ? fields[*id_col] : std::to_string(docs.size());
        doc.text = fields[*text_col];
        if (response_col && !fields[*response_col].empty())
            doc.response = fields[*response_col];
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<RawDocument> read_raw_jsonl(std::istream& in)
{
    std::vector<RawDocument> docs;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos)
            continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw Error("JSONL line " + std::to_string(line_no) + ": " + e.what());
        }
        require(j.is_object() && j.contains("text"), "JSONL line " + std::to_string(line_no) + " lacks 'text'");
        RawDocument doc;
        doc.id = j.contains("id") ? (j["id"].is_string() ? j["id"].get<std::string>() : j["id"].dump())
                                  : std::to_string(docs.size());
        doc.text = j["text"].get<std::string>();
        if (j.contains("response") && !j["response"].is_null())
            doc.response = j["response"].is_string() ? j["response"].get<std::string>() : j["response"].dump();
        docs.push_back(std::move(doc));
    }
    return docs;
}

std::vector<RawDocument> read_raw_corpus(const std::filesystem::path& path, CorpusFormat format)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot open input file '" + path.string() + "'");
    return format == CorpusFormat::csv ? read_raw_csv(in) : read_raw_jsonl(in);
}

void write_raw_csv(std::ostream& out, const std::vector<RawDocument>& docs)
{
    const bool with_response = std::any_of(docs.begin(), docs.end(), [](const auto& d) { return d.response.has_value(); });
    out << (with_response ? "id,text,response\n" : "id,text\n");
    for (const auto& d : docs) {
        out << csv_escape(d.id) << ',' << csv_escape(d.text);
        if (with_response)
            out << ',' << csv_escape(d.response.value_or(""));
        out << '\n';
    }
}

void write_raw_jsonl(std::ostream& out, const std::vector<RawDocument>& docs)
{
    for (const auto& d : docs) {
        json j = {{"id", d.id}, {"text", d.text}};
        if (d.response)
            j["response"] = *d.response;
        out << j.dump() << '\n';
    }
}

std::vector<std::vector<std::string>> clean_documents(const std::vector<RawDocument>& raw,
                                                      const CleaningConfig& cleaning, unsigned threads)
{
    std::vector<std::vector<std::string>> tokens(raw.size());
    parallel_for(raw.size(), threads, [&](std::size_t i) { tokens[i] = clean_text(raw[i].text, cleaning); });
    return tokens;
}

Corpus corpus_from_raw(const std::vector<RawDocument>& raw, const CleaningConfig& cleaning,
                       std::optional<ResponseKind> kind, unsigned threads)
{
    const auto tokens = clean_documents(raw, cleaning, threads);
    std::vector<std::string> ids;
    ids.reserve(raw.size());
    for (const auto& d : raw)
        ids.push_back(d.id);
    std::optional<Responses> responses;
    if (!raw.empty() && std::all_of(raw.begin(), raw.end(), [](const auto& d) { return d.response.has_value(); })) {
        std::vector<std::string> values;
        values.reserve(raw.size());
        for (const auto& d : raw)
            values.push_back(*d.response);
        responses = kind ? Responses::parse(values, *kind) : Responses::infer(values);
    }
    return make_corpus(tokens, std::move(ids), std::move(responses));
}

json to_json(const Vocabulary& vocabulary)
{
    return json{{"terms", vocabulary.terms()}};
}

Vocabulary vocabulary_from_json(const json& j)
{
    return Vocabulary(j.at("terms").get<std::vector<std::string>>());
}

json to_json(const Document& doc)
{
    return json{{"id", doc.id()}, {"tokens", doc.tokens()}};
}

Document document_from_json(const json& j)
{
    return Document(j.at("id").get<std::string>(), j.at("tokens").get<std::vector<TermId>>());
}

json to_json(const Responses& responses)
{
    return json{{"kind", to_string(responses.kind)}, {"values", responses.values}, {"levels", responses.levels}};
}

Responses responses_from_json(const json& j)
{
    Responses r;
    r.kind = response_kind_from_string(j.at("kind").get<std::string>());
    r.values = j.at("values").get<std::vector<double>>();
    r.levels = j.value("levels", std::vector<std::string>{});
    return r;
}

}  // namespace topicreg
