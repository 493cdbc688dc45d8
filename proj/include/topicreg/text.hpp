#pragma once

#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace topicreg {

/// Porter2 (Snowball English) stemmer. Words containing characters outside
/// a-z and the apostrophe are returned unchanged.
std::string porter2_stem(std::string_view word);

/// The Snowball English stopword list, normalised by the same punctuation
/// rule applied to text ("don't" contributes "don" and "t").
const std::set<std::string>& snowball_english_stopwords();

struct CleaningConfig {
    bool lowercase = true;
    bool strip_punct_numbers = true;
    std::set<std::string> stopword_list = snowball_english_stopwords();
    bool stem = true;

    /// Cleaning without stemming, as used for structure-sensitive corpora.
    static CleaningConfig unstemmed()
    {
        CleaningConfig config;
        config.stem = false;
        return config;
    }
};

/// Punctuation/digit removal, lowercasing, stopword removal and stemming, in
/// that order. Tokens are split on whitespace; order is preserved.
std::vector<std::string> clean_text(std::string_view raw, const CleaningConfig& config);

}  // namespace topicreg
