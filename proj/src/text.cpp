#include "topicreg/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <unordered_map>

namespace topicreg {

namespace detail {
extern const std::string_view snowball_stopwords_text;
}

namespace {

// Porter2 treats y as a vowel; an upper-case Y marks a consonantal y.
bool is_vowel(char c)
{
    return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u' || c == 'y';
}

bool ends_with(const std::string& w, std::string_view suffix)
{
    return w.size() >= suffix.size()
           && std::string_view(w).substr(w.size() - suffix.size()) == suffix;
}

bool has_vowel(const std::string& w, std::size_t begin, std::size_t end)
{
    for (std::size_t i = begin; i < end && i < w.size(); ++i)
        if (is_vowel(w[i]))
            return true;
    return false;
}

// Position after the first non-vowel that follows a vowel, searching from `from`.
std::size_t region_start(const std::string& w, std::size_t from)
{
    for (std::size_t i = std::max<std::size_t>(from, 1); i < w.size(); ++i)
        if (!is_vowel(w[i]) && is_vowel(w[i - 1]))
            return i + 1;
    return w.size();
}

bool is_double(const std::string& w)
{
    if (w.size() < 2)
        return false;
    const char a = w[w.size() - 1];
    if (a != w[w.size() - 2])
        return false;
    return std::string_view("bdfgmnprt").find(a) != std::string_view::npos;
}

// Short syllable ending at position `end` (exclusive). A word ending in
// "past" counts as well.
bool ends_in_short_syllable(const std::string& w, std::size_t end)
{
    if (end == 2)
        return is_vowel(w[0]) && !is_vowel(w[1]);
    if (end >= 3) {
        const char c = w[end - 1];
        if (!is_vowel(w[end - 3]) && is_vowel(w[end - 2]) && !is_vowel(c) && c != 'w' && c != 'x' && c != 'Y')
            return true;
    }
    return end >= 4 && std::string_view(w).substr(end - 4, 4) == "past";
}

bool valid_li_ending(char c)
{
    return std::string_view("cdeghkmnrt").find(c) != std::string_view::npos;
}

struct Rule {
    std::string_view suffix;
    std::string_view replacement;
};

// Longest listed suffix the word ends with, or nullptr.
template <std::size_t N>
const Rule* longest_suffix(const std::string& w, const std::array<Rule, N>& rules)
{
    const Rule* best = nullptr;
    for (const auto& rule : rules)
        if (ends_with(w, rule.suffix) && (!best || rule.suffix.size() > best->suffix.size()))
            best = &rule;
    return best;
}

void replace_suffix(std::string& w, std::size_t suffix_len, std::string_view replacement)
{
    w.resize(w.size() - suffix_len);
    w.append(replacement);
}

void step0(std::string& w)
{
    for (std::string_view s : {"'s'", "'s", "'"})
        if (ends_with(w, s)) {
            w.resize(w.size() - s.size());
            return;
        }
}

void step1a(std::string& w)
{
    if (ends_with(w, "sses")) {
        replace_suffix(w, 4, "ss");
    } else if (ends_with(w, "ied") || ends_with(w, "ies")) {
        replace_suffix(w, 3, w.size() > 4 ? "i" : "ie");
    } else if (ends_with(w, "us") || ends_with(w, "ss")) {
        return;
    } else if (ends_with(w, "s")) {
        if (w.size() >= 2 && has_vowel(w, 0, w.size() - 2))
            w.pop_back();
    }
}

void step1b(std::string& w, std::size_t r1)
{
    static constexpr std::array<Rule, 6> rules{{
        {"eed", "ee"}, {"eedly", "ee"}, {"ed", ""}, {"edly", ""}, {"ing", ""}, {"ingly", ""},
    }};
    const Rule* rule = longest_suffix(w, rules);
    if (!rule)
        return;
    const std::size_t start = w.size() - rule->suffix.size();
    const std::string stem = w.substr(0, start);
    if (rule->suffix == "eed" || rule->suffix == "eedly") {
        if (start >= r1 && stem != "succ" && stem != "proc" && stem != "exc")
            replace_suffix(w, rule->suffix.size(), "ee");
        return;
    }
    if (rule->suffix == "ing") {
        if (stem.size() == 2 && stem[1] == 'y' && !is_vowel(stem[0])) {
            w = stem.substr(0, 1) + "ie";
            return;
        }
        for (std::string_view keep : {"even", "cann", "inn", "earr", "herr", "out"})
            if (stem == keep)
                return;
    }
    if (!has_vowel(w, 0, start))
        return;
    w.resize(start);
    if (ends_with(w, "at") || ends_with(w, "bl") || ends_with(w, "iz")) {
        w.push_back('e');
    } else if (is_double(w)) {
        // "add", "egg" and "odd" keep their double letter.
        if (!(w.size() == 3 && std::string_view("aeo").find(w[0]) != std::string_view::npos))
            w.pop_back();
    } else if (r1 == w.size() && ends_in_short_syllable(w, w.size())) {
        w.push_back('e');
    }
}

void step1c(std::string& w)
{
    const std::size_t n = w.size();
    if (n > 2 && (w[n - 1] == 'y' || w[n - 1] == 'Y') && !is_vowel(w[n - 2]))
        w[n - 1] = 'i';
}

void step2(std::string& w, std::size_t r1)
{
    static constexpr std::array<Rule, 25> rules{{
        {"tional", "tion"}, {"enci", "ence"},   {"anci", "ance"},   {"abli", "able"},
        {"entli", "ent"},   {"izer", "ize"},    {"ization", "ize"}, {"ational", "ate"},
        {"ation", "ate"},   {"ator", "ate"},    {"alism", "al"},    {"aliti", "al"},
        {"alli", "al"},     {"fulness", "ful"}, {"ousli", "ous"},   {"ousness", "ous"},
        {"iveness", "ive"}, {"iviti", "ive"},   {"biliti", "ble"},  {"bli", "ble"},
        {"ogi", "og"},      {"fulli", "ful"},   {"lessli", "less"}, {"li", ""},
        {"ogist", "og"},
    }};
    const Rule* rule = longest_suffix(w, rules);
    if (!rule)
        return;
    const std::size_t start = w.size() - rule->suffix.size();
    if (start < r1)
        return;
    if (rule->suffix == "ogi") {
        if (start >= 1 && w[start - 1] == 'l')
            replace_suffix(w, 3, "og");
    } else if (rule->suffix == "li") {
        if (start >= 1 && valid_li_ending(w[start - 1]))
            w.resize(start);
    } else {
        replace_suffix(w, rule->suffix.size(), rule->replacement);
    }
}

void step3(std::string& w, std::size_t r1, std::size_t r2)
{
    static constexpr std::array<Rule, 9> rules{{
        {"tional", "tion"}, {"ational", "ate"}, {"alize", "al"}, {"icate", "ic"}, {"iciti", "ic"},
        {"ical", "ic"},     {"ful", ""},        {"ness", ""},    {"ative", ""},
    }};
    const Rule* rule = longest_suffix(w, rules);
    if (!rule)
        return;
    const std::size_t start = w.size() - rule->suffix.size();
    if (start < r1)
        return;
    if (rule->suffix == "ative" && start < r2)
        return;
    replace_suffix(w, rule->suffix.size(), rule->replacement);
}

void step4(std::string& w, std::size_t r2)
{
    static constexpr std::array<Rule, 18> rules{{
        {"al", ""},  {"ance", ""}, {"ence", ""}, {"er", ""},  {"ic", ""},  {"able", ""},
        {"ible", ""}, {"ant", ""}, {"ement", ""}, {"ment", ""}, {"ent", ""}, {"ism", ""},
        {"ate", ""}, {"iti", ""},  {"ous", ""},  {"ive", ""}, {"ize", ""}, {"ion", ""},
    }};
    const Rule* rule = longest_suffix(w, rules);
    if (!rule)
        return;
    const std::size_t start = w.size() - rule->suffix.size();
    if (start < r2)
        return;
    if (rule->suffix == "ion" && !(start >= 1 && (w[start - 1] == 's' || w[start - 1] == 't')))
        return;
    w.resize(start);
}

void step5(std::string& w, std::size_t r1, std::size_t r2)
{
    if (w.empty())
        return;
    const std::size_t last = w.size() - 1;
    if (w[last] == 'e') {
        if (last >= r2 || (last >= r1 && !ends_in_short_syllable(w, last)))
            w.pop_back();
    } else if (w[last] == 'l') {
        if (last >= r2 && last >= 1 && w[last - 1] == 'l')
            w.pop_back();
    }
}

const std::unordered_map<std::string_view, std::string_view>& exceptional_forms()
{
    static const std::unordered_map<std::string_view, std::string_view> forms{
        {"skis", "ski"},     {"skies", "sky"},   {"idly", "idl"},     {"gently", "gentl"},
        {"ugly", "ugli"},    {"early", "earli"}, {"only", "onli"},    {"singly", "singl"},
        {"sky", "sky"},      {"news", "news"},   {"howe", "howe"},    {"atlas", "atlas"},
        {"cosmos", "cosmos"}, {"bias", "bias"},  {"andes", "andes"},
    };
    return forms;
}

}  // namespace

std::string porter2_stem(std::string_view word)
{
    std::string w(word);
    for (char c : w)
        if (!((c >= 'a' && c <= 'z') || c == '\''))
            return w;
    if (w.size() <= 2)
        return w;

    if (auto it = exceptional_forms().find(w); it != exceptional_forms().end())
        return std::string(it->second);

    if (w[0] == '\'')
        w.erase(0, 1);

    if (w[0] == 'y')
        w[0] = 'Y';
    for (std::size_t i = 1; i < w.size(); ++i)
        if (w[i] == 'y' && is_vowel(w[i - 1]))
            w[i] = 'Y';

    std::size_t r1 = region_start(w, 1);
    for (std::string_view prefix :
         {"arsen", "commun", "emerg", "gener", "inter", "later", "organ", "past", "univers"})
        if (w.starts_with(prefix)) {
            r1 = prefix.size();
            break;
        }
    const std::size_t r2 = region_start(w, r1 + 1);

    step0(w);
    step1a(w);
    step1b(w, r1);
    step1c(w);
    step2(w, r1);
    step3(w, r1, r2);
    step4(w, r2);
    step5(w, r1, r2);
    std::replace(w.begin(), w.end(), 'Y', 'y');
    return w;
}

namespace {

bool is_ascii_alpha(unsigned char c)
{
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z');
}

// Bytes that survive punctuation/number stripping: ASCII letters and any
// non-ASCII byte (UTF-8 letters are not classified further).
bool is_kept(unsigned char c)
{
    return is_ascii_alpha(c) || c >= 0x80;
}

std::vector<std::string> split_whitespace(std::string_view text)
{
    std::vector<std::string> tokens;
    std::size_t i = 0;
    while (i < text.size()) {
        while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i])))
            ++i;
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j])))
            ++j;
        if (j > i)
            tokens.emplace_back(text.substr(i, j - i));
        i = j;
    }
    return tokens;
}

std::string normalise(std::string_view raw, bool lowercase, bool strip)
{
    std::string text(raw);
    for (char& ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (strip && !is_kept(c) && !std::isspace(c))
            ch = ' ';
        else if (lowercase && c < 0x80)
            ch = static_cast<char>(std::tolower(c));
    }
    return text;
}

}  // namespace

const std::set<std::string>& snowball_english_stopwords()
{
    static const std::set<std::string> words = [] {
        std::set<std::string> out;
        for (const auto& entry : split_whitespace(detail::snowball_stopwords_text))
            for (auto& piece : split_whitespace(normalise(entry, true, true)))
                out.insert(std::move(piece));
        return out;
    }();
    return words;
}

std::vector<std::string> clean_text(std::string_view raw, const CleaningConfig& config)
{
    std::vector<std::string> out;
    for (auto& token : split_whitespace(normalise(raw, config.lowercase, config.strip_punct_numbers))) {
        if (config.stopword_list.contains(token))
            continue;
        if (config.stem) {
            token = porter2_stem(token);
            // A stem can coincide with a stopword ("thes" -> "the"); drop it so
            // that cleaning is idempotent.
            if (config.stopword_list.contains(token))
                continue;
        }
        out.push_back(std::move(token));
    }
    return out;
}

}  // namespace topicreg
