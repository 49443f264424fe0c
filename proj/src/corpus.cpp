#include "rfm/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>

#include "rfm/random.hpp"

namespace rfm {
namespace {

constexpr std::array<const char*, 34> kFunctionWords = {
    "the", "a", "an", "of", "to", "in", "on", "and", "or", "but", "with", "for", "at", "by", "from", "as", "that",
    "this", "it", "we", "you", "they", "he", "she", "not", "so", "if", "then", "there", "because", "about", "into",
    "over", "under"};

constexpr std::array<const char*, 6> kContextOpeners = {
    "Tell me about", "What do you think of", "Describe", "Can you explain", "Write something about", "Help me with"};

struct Style {
  std::size_t sentences = 1;
  double words_per_sentence = 8;
  std::array<double, 5> pos_weights{};  // adj, adv, verb, noun, function
  double copy_rate = 0;
  double synonym_rate = 0;
  double antonym_rate = 0;
  double long_word_bias = 0.5;
  double alliteration_rate = 0;
  double comma_rate = 0;
  double exclaim_rate = 0;
  double question_rate = 0;
};

class Generator {
 public:
  Generator(const Lexicon& lex, Rng& rng, double spread) : lex_(lex), rng_(rng), spread_(spread) {
    for (auto tag : {PosTag::Adjective, PosTag::Adverb, PosTag::Verb, PosTag::Noun}) {
      pools_.push_back(&lex_.words_with_tag(tag));
    }
  }

  std::pair<std::string, std::vector<std::string>> context() {
    std::vector<std::string> topic;
    const std::size_t n = 2 + rng_.index(3);
    for (std::size_t i = 0; i < n; ++i) {
      const auto* pool = pools_[rng_.index(4)];
      topic.push_back((*pool)[rng_.index(pool->size())]);
    }
    std::string text = kContextOpeners[rng_.index(kContextOpeners.size())];
    for (std::size_t i = 0; i < topic.size(); ++i) {
      text += i == 0 ? " the " : (i + 1 == topic.size() ? " and " : ", ");
      text += topic[i];
    }
    text += rng_.bernoulli(0.5) ? "?" : ".";
    return {text, topic};
  }

  std::string response(const std::vector<std::string>& topic) {
    const Style s = draw_style();
    std::vector<std::string> synonyms, antonyms;
    for (const auto& w : topic) {
      for (auto& x : lex_.synonyms_of(w)) synonyms.push_back(std::move(x));
      for (auto& x : lex_.antonyms_of(w)) antonyms.push_back(std::move(x));
    }
    std::string out;
    for (std::size_t k = 0; k < s.sentences; ++k) {
      const double len = std::max(1.0, s.words_per_sentence * rng_.uniform(0.6, 1.4));
      const auto n_words = static_cast<std::size_t>(std::lround(len));
      std::string prev;
      std::string sentence;
      for (std::size_t i = 0; i < n_words; ++i) {
        std::string w = pick_word(s, topic, synonyms, antonyms, prev);
        if (i == 0) w[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(w[0])));
        if (i > 0) sentence += rng_.bernoulli(s.comma_rate) ? ", " : " ";
        sentence += w;
        prev = w;
      }
      const double u = rng_.uniform();
      sentence += u < s.exclaim_rate ? "!" : (u < s.exclaim_rate + s.question_rate ? "?" : ".");
      if (!out.empty()) out += ' ';
      out += sentence;
    }
    return out;
  }

 private:
  double spread(double lo, double hi) {
    // Draws from [lo, hi] and pushes the value outward by the spread factor.
    const double mid = 0.5 * (lo + hi);
    return mid + (rng_.uniform(lo, hi) - mid) * spread_;
  }

  Style draw_style() {
    Style s;
    s.sentences = 1 + static_cast<std::size_t>(std::clamp(spread(0.0, 5.0), 0.0, 9.0));
    s.words_per_sentence = std::clamp(spread(3.0, 17.0), 1.0, 40.0);
    for (auto& w : s.pos_weights) {
      const double u = rng_.uniform(0.05, 1.0);
      w = std::pow(u, 1.0 + spread_);
    }
    auto rate = [&](double hi) { return std::clamp(spread(0.0, hi), 0.0, 0.95); };
    const double u = rng_.uniform();
    s.copy_rate = u < 0.3 ? 0.0 : rate(0.35);
    s.synonym_rate = rng_.bernoulli(0.5) ? rate(0.35) : 0.0;
    s.antonym_rate = rng_.bernoulli(0.5) ? rate(0.35) : 0.0;
    s.long_word_bias = std::clamp(spread(0.0, 1.0), 0.0, 1.0);
    s.alliteration_rate = rate(0.6);
    s.comma_rate = rate(0.3);
    s.exclaim_rate = rate(0.5);
    s.question_rate = rate(0.3);
    return s;
  }

  const std::string& from_pool(const std::vector<std::string>& pool, double long_bias) {
    const auto& a = pool[rng_.index(pool.size())];
    const auto& b = pool[rng_.index(pool.size())];
    const bool prefer_long = rng_.bernoulli(long_bias);
    return (a.size() >= b.size()) == prefer_long ? a : b;
  }

  std::string pick_word(const Style& s, const std::vector<std::string>& topic, const std::vector<std::string>& syn,
                        const std::vector<std::string>& ant, const std::string& prev) {
    const double u = rng_.uniform();
    if (u < s.copy_rate) return topic[rng_.index(topic.size())];
    if (u < s.copy_rate + s.synonym_rate && !syn.empty()) return syn[rng_.index(syn.size())];
    if (u < s.copy_rate + s.synonym_rate + s.antonym_rate && !ant.empty()) return ant[rng_.index(ant.size())];

    const std::size_t cls = rng_.categorical(s.pos_weights);
    if (cls == 4) {
      std::string w = kFunctionWords[rng_.index(kFunctionWords.size())];
      return w;
    }
    const auto& pool = *pools_[cls];
    if (!prev.empty() && rng_.bernoulli(s.alliteration_rate)) {
      const char first = static_cast<char>(std::tolower(static_cast<unsigned char>(prev[0])));
      const auto lo = std::lower_bound(pool.begin(), pool.end(), std::string(1, first));
      auto hi = lo;
      while (hi != pool.end() && (*hi)[0] == first) ++hi;
      if (hi != lo) return *(lo + static_cast<std::ptrdiff_t>(rng_.index(static_cast<std::size_t>(hi - lo))));
    }
    return from_pool(pool, s.long_word_bias);
  }

  const Lexicon& lex_;
  Rng& rng_;
  double spread_;
  std::vector<const std::vector<std::string>*> pools_;
};

}  // namespace

std::vector<PreferencePair> generate_pairs(const Lexicon& lexicon, std::size_t count, const CorpusOptions& options) {
  Rng rng(derive_seed(options.seed, "corpus-pairs"));
  Generator gen(lexicon, rng, options.style_spread);
  std::vector<PreferencePair> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto [context, topic] = gen.context();
    std::string a = gen.response(topic);
    std::string b = gen.response(topic);
    out.push_back({std::move(context), std::move(a), std::move(b)});
  }
  return out;
}

std::vector<CandidateSet> generate_candidate_sets(const Lexicon& lexicon, std::size_t set_count,
                                                  std::size_t candidates_per_set, const CorpusOptions& options) {
  Rng rng(derive_seed(options.seed, "corpus-candidates"));
  Generator gen(lexicon, rng, options.style_spread);
  std::vector<CandidateSet> out;
  out.reserve(set_count);
  for (std::size_t i = 0; i < set_count; ++i) {
    auto [context, topic] = gen.context();
    CandidateSet set{std::move(context), {}};
    for (std::size_t k = 0; k < candidates_per_set; ++k) set.candidates.push_back(gen.response(topic));
    out.push_back(std::move(set));
  }
  return out;
}

}  // namespace rfm
