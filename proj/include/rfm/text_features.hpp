#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "rfm/dataset.hpp"

namespace rfm {

inline constexpr std::size_t kNumBaseFeatures = 13;

// phi_1..phi_13, in this order:
//   0 length (characters)        1 words per sentence       2 characters per word
//   3 vowel proportion           4 punctuation proportion   5 alliteration transitions
//   6 adjectives  7 adverbs  8 verbs  9 nouns (proportions of words)
//   10 synonyms of context words 11 antonyms of context words 12 overlap with context
using BaseFeatureVector = std::array<double, kNumBaseFeatures>;

enum class PosTag : std::uint8_t { Adjective = 1, Adverb = 2, Verb = 4, Noun = 8 };

// Word -> part-of-speech tags plus a symmetric synonym/antonym thesaurus.
class Lexicon {
 public:
  Lexicon() = default;

  // Tag lexicon lines: "word<TAB>TAG[,TAG...]" with TAG in {ADJ, ADV, VERB, NOUN}.
  // Thesaurus lines:   "word<TAB>syn|ant<TAB>word".
  // '#' starts a comment line. Malformed lines raise DataError.
  static Lexicon parse(std::string_view tag_lexicon, std::string_view thesaurus);
  static Lexicon load(const std::filesystem::path& tag_lexicon, const std::filesystem::path& thesaurus);

  // The lexicon compiled into the library (data/lexicon.tsv, data/thesaurus.tsv).
  static std::shared_ptr<const Lexicon> bundled();

  bool has_tag(std::string_view word, PosTag tag) const;
  std::uint8_t tags(std::string_view word) const;
  bool are_synonyms(std::string_view a, std::string_view b) const;
  bool are_antonyms(std::string_view a, std::string_view b) const;

  const std::vector<std::string>& words_with_tag(PosTag tag) const;
  std::vector<std::string> synonyms_of(std::string_view word) const;
  std::vector<std::string> antonyms_of(std::string_view word) const;
  std::size_t size() const { return tags_.size(); }

 private:
  using Relation = std::unordered_map<std::string, std::unordered_set<std::string>>;
  static bool related(const Relation& rel, std::string_view a, std::string_view b);

  std::unordered_map<std::string, std::uint8_t> tags_;
  Relation synonyms_;
  Relation antonyms_;
  std::array<std::vector<std::string>, 4> by_tag_;
};

// Lowercased maximal runs of ASCII letters.
std::vector<std::string> tokenize_words(std::string_view text);

// Computes the raw (un-normalised) base features of a (context, response) pair.
class FeatureExtractor {
 public:
  explicit FeatureExtractor(std::shared_ptr<const Lexicon> lexicon);
  // Uses the bundled lexicon.
  FeatureExtractor();

  BaseFeatureVector extract_raw_features(std::string_view context, std::string_view response) const;

  const Lexicon& lexicon() const { return *lexicon_; }

 private:
  std::shared_ptr<const Lexicon> lexicon_;
};

// Per-feature min-max scaling followed by centring on the median of the
// scaled corpus values.
struct FeatureNormalizer {
  BaseFeatureVector min{};
  BaseFeatureVector max{};
  BaseFeatureVector median{};  // median of the min-max normalised values
  std::size_t fitted_on = 0;

  // clamp((raw - min) / (max - min), 0, 1) - median; a degenerate range maps to 0.
  BaseFeatureVector apply(const BaseFeatureVector& raw) const;

  // Stable hex digest of all fields, used to tie models to the normalizer they
  // were trained with.
  std::string fingerprint() const;

  bool operator==(const FeatureNormalizer&) const = default;
};

FeatureNormalizer fit_normalizer(std::span<const BaseFeatureVector> raw_features);
// Fits over both (context, response) occurrences of every pair.
FeatureNormalizer fit_normalizer(std::span<const PreferencePair> corpus, const FeatureExtractor& extractor);

BaseFeatureVector apply_normalizer(const FeatureNormalizer& normalizer, const BaseFeatureVector& raw);

void save_normalizer(const std::filesystem::path& path, const FeatureNormalizer& normalizer);
FeatureNormalizer load_normalizer(const std::filesystem::path& path);
std::string normalizer_to_json(const FeatureNormalizer& normalizer);
FeatureNormalizer normalizer_from_json(std::string_view text);

}  // namespace rfm
