#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rfm/dataset.hpp"
#include "rfm/text_features.hpp"

namespace rfm {

// Deterministic generator of English-like contexts and responses built from the
// lexicon vocabulary. Each response draws its own style (sentence count and
// length, part-of-speech mix, punctuation, alliteration, reuse of context
// words, synonyms and antonyms) so that all thirteen base features vary
// across the corpus.
struct CorpusOptions {
  std::uint64_t seed = 0;
  // Scales how far response styles spread; 1 is the training distribution and
  // larger values produce a shifted, more extreme pool (used for best-of-n
  // candidates).
  double style_spread = 1.0;
};

std::vector<PreferencePair> generate_pairs(const Lexicon& lexicon, std::size_t count, const CorpusOptions& options);

std::vector<CandidateSet> generate_candidate_sets(const Lexicon& lexicon, std::size_t set_count,
                                                  std::size_t candidates_per_set, const CorpusOptions& options);

}  // namespace rfm
