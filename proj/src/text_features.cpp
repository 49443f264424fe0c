#include "rfm/text_features.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "rfm/error.hpp"

namespace rfm {

namespace detail {
extern const std::string_view kBundledTagLexicon;
extern const std::string_view kBundledThesaurus;
}  // namespace detail

namespace {

std::size_t tag_slot(PosTag tag) {
  switch (tag) {
    case PosTag::Adjective: return 0;
    case PosTag::Adverb: return 1;
    case PosTag::Verb: return 2;
    case PosTag::Noun: return 3;
  }
  return 0;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

template <typename F>
void for_each_data_line(std::string_view text, F&& f) {
  std::size_t n = 0;
  for (auto line : split(text, '\n')) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    const auto t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    f(line, n);
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open lexicon file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

bool is_vowel(unsigned char c) {
  switch (std::tolower(c)) {
    case 'a': case 'e': case 'i': case 'o': case 'u': return true;
    default: return false;
  }
}

bool is_sentence_end(char c) { return c == '.' || c == '!' || c == '?'; }

double ratio(double num, double den) { return den > 0.0 ? num / den : 0.0; }

}  // namespace

Lexicon Lexicon::parse(std::string_view tag_lexicon, std::string_view thesaurus) {
  Lexicon lex;
  for_each_data_line(tag_lexicon, [&](std::string_view line, std::size_t n) {
    const auto cols = split(line, '\t');
    if (cols.size() != 2) throw DataError("tag lexicon: expected word<TAB>tags", n);
    const auto word = lower(trim(cols[0]));
    if (word.empty()) throw DataError("tag lexicon: empty word", n);
    std::uint8_t mask = 0;
    for (auto t : split(cols[1], ',')) {
      t = trim(t);
      if (t == "ADJ") mask |= static_cast<std::uint8_t>(PosTag::Adjective);
      else if (t == "ADV") mask |= static_cast<std::uint8_t>(PosTag::Adverb);
      else if (t == "VERB") mask |= static_cast<std::uint8_t>(PosTag::Verb);
      else if (t == "NOUN") mask |= static_cast<std::uint8_t>(PosTag::Noun);
      else throw DataError("tag lexicon: unknown tag '" + std::string(t) + "'", n);
    }
    lex.tags_[word] |= mask;
  });
  for (const auto& [word, mask] : lex.tags_) {
    for (PosTag t : {PosTag::Adjective, PosTag::Adverb, PosTag::Verb, PosTag::Noun}) {
      if (mask & static_cast<std::uint8_t>(t)) lex.by_tag_[tag_slot(t)].push_back(word);
    }
  }
  for (auto& v : lex.by_tag_) std::sort(v.begin(), v.end());

  for_each_data_line(thesaurus, [&](std::string_view line, std::size_t n) {
    const auto cols = split(line, '\t');
    if (cols.size() != 3) throw DataError("thesaurus: expected word<TAB>syn|ant<TAB>word", n);
    const auto a = lower(trim(cols[0]));
    const auto kind = trim(cols[1]);
    const auto b = lower(trim(cols[2]));
    if (a.empty() || b.empty()) throw DataError("thesaurus: empty word", n);
    Relation* rel = nullptr;
    if (kind == "syn") rel = &lex.synonyms_;
    else if (kind == "ant") rel = &lex.antonyms_;
    else throw DataError("thesaurus: relation must be syn or ant", n);
    (*rel)[a].insert(b);
    (*rel)[b].insert(a);
  });
  return lex;
}

Lexicon Lexicon::load(const std::filesystem::path& tag_lexicon, const std::filesystem::path& thesaurus) {
  return parse(read_file(tag_lexicon), read_file(thesaurus));
}

std::shared_ptr<const Lexicon> Lexicon::bundled() {
  static const auto lex = std::make_shared<const Lexicon>(parse(detail::kBundledTagLexicon, detail::kBundledThesaurus));
  return lex;
}

std::uint8_t Lexicon::tags(std::string_view word) const {
  const auto it = tags_.find(std::string(word));
  return it == tags_.end() ? 0 : it->second;
}

bool Lexicon::has_tag(std::string_view word, PosTag tag) const {
  return (tags(word) & static_cast<std::uint8_t>(tag)) != 0;
}

bool Lexicon::related(const Relation& rel, std::string_view a, std::string_view b) {
  const auto it = rel.find(std::string(a));
  return it != rel.end() && it->second.contains(std::string(b));
}

bool Lexicon::are_synonyms(std::string_view a, std::string_view b) const { return related(synonyms_, a, b); }
bool Lexicon::are_antonyms(std::string_view a, std::string_view b) const { return related(antonyms_, a, b); }

const std::vector<std::string>& Lexicon::words_with_tag(PosTag tag) const { return by_tag_[tag_slot(tag)]; }

std::vector<std::string> Lexicon::synonyms_of(std::string_view word) const {
  const auto it = synonyms_.find(std::string(word));
  if (it == synonyms_.end()) return {};
  std::vector<std::string> out(it->second.begin(), it->second.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> Lexicon::antonyms_of(std::string_view word) const {
  const auto it = antonyms_.find(std::string(word));
  if (it == antonyms_.end()) return {};
  std::vector<std::string> out(it->second.begin(), it->second.end());
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<std::string> tokenize_words(std::string_view text) {
  std::vector<std::string> words;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalpha(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(std::move(current));
  return words;
}

FeatureExtractor::FeatureExtractor(std::shared_ptr<const Lexicon> lexicon) : lexicon_(std::move(lexicon)) {
  if (!lexicon_) throw Error("FeatureExtractor: lexicon is required");
}

FeatureExtractor::FeatureExtractor() : FeatureExtractor(Lexicon::bundled()) {}

BaseFeatureVector FeatureExtractor::extract_raw_features(std::string_view context, std::string_view response) const {
  while (!response.empty() && std::isspace(static_cast<unsigned char>(response.back()))) response.remove_suffix(1);

  // Character statistics over code points; continuation bytes are skipped.
  double chars = 0, vowels = 0, punct = 0;
  for (char ch : response) {
    const auto c = static_cast<unsigned char>(ch);
    if ((c & 0xC0) == 0x80) continue;
    chars += 1;
    if (c < 0x80) {
      if (is_vowel(c)) vowels += 1;
      if (std::ispunct(c)) punct += 1;
    }
  }

  // Words and sentences in one pass.
  std::vector<std::string> words;
  double sentences = 0;
  std::size_t words_in_sentence = 0;
  std::string current;
  auto flush_word = [&] {
    if (!current.empty()) {
      words.push_back(std::move(current));
      current.clear();
      ++words_in_sentence;
    }
  };
  for (char ch : response) {
    const auto c = static_cast<unsigned char>(ch);
    if (c < 0x80 && std::isalpha(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
      continue;
    }
    flush_word();
    if (is_sentence_end(ch) && words_in_sentence > 0) {
      sentences += 1;
      words_in_sentence = 0;
    }
  }
  flush_word();
  if (words_in_sentence > 0) sentences += 1;

  const double n_words = static_cast<double>(words.size());
  double letters = 0;
  for (const auto& w : words) letters += static_cast<double>(w.size());

  double alliterations = 0;
  for (std::size_t i = 1; i < words.size(); ++i) {
    if (words[i].front() == words[i - 1].front()) alliterations += 1;
  }

  std::array<double, 4> pos{};
  for (const auto& w : words) {
    const auto mask = lexicon_->tags(w);
    for (std::size_t k = 0; k < 4; ++k) {
      if (mask & (1u << k)) pos[k] += 1;
    }
  }

  const auto context_words = tokenize_words(context);
  const std::unordered_set<std::string> context_set(context_words.begin(), context_words.end());
  double synonyms = 0, antonyms = 0, overlap = 0;
  for (const auto& w : words) {
    if (context_set.contains(w)) overlap += 1;
    bool syn = false, ant = false;
    for (const auto& cw : context_set) {
      syn = syn || lexicon_->are_synonyms(cw, w);
      ant = ant || lexicon_->are_antonyms(cw, w);
      if (syn && ant) break;
    }
    if (syn) synonyms += 1;
    if (ant) antonyms += 1;
  }

  return {
      chars,
      ratio(n_words, sentences),
      ratio(letters, n_words),
      ratio(vowels, chars),
      ratio(punct, chars),
      ratio(alliterations, std::max(n_words - 1.0, 1.0)),
      ratio(pos[0], n_words),
      ratio(pos[1], n_words),
      ratio(pos[2], n_words),
      ratio(pos[3], n_words),
      ratio(synonyms, n_words),
      ratio(antonyms, n_words),
      ratio(overlap, n_words),
  };
}

BaseFeatureVector FeatureNormalizer::apply(const BaseFeatureVector& raw) const {
  BaseFeatureVector out{};
  for (std::size_t i = 0; i < kNumBaseFeatures; ++i) {
    const double range = max[i] - min[i];
    if (!(range > 0.0)) {
      out[i] = 0.0;
      continue;
    }
    const double scaled = std::clamp((raw[i] - min[i]) / range, 0.0, 1.0);
    out[i] = scaled - median[i];
  }
  return out;
}

std::string FeatureNormalizer::fingerprint() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int k = 0; k < 8; ++k) {
      h ^= (v >> (8 * k)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto* arr : {&min, &max, &median}) {
    for (double v : *arr) mix(std::bit_cast<std::uint64_t>(v));
  }
  mix(fitted_on);
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

FeatureNormalizer fit_normalizer(std::span<const BaseFeatureVector> raw) {
  if (raw.empty()) throw DataError("cannot fit a normalizer on an empty corpus");
  FeatureNormalizer norm;
  norm.fitted_on = raw.size();
  std::vector<double> column(raw.size());
  for (std::size_t f = 0; f < kNumBaseFeatures; ++f) {
    double lo = raw[0][f], hi = raw[0][f];
    for (const auto& v : raw) {
      lo = std::min(lo, v[f]);
      hi = std::max(hi, v[f]);
    }
    norm.min[f] = lo;
    norm.max[f] = hi;
    const double range = hi - lo;
    if (!(range > 0.0)) {
      norm.median[f] = 0.0;
      continue;
    }
    for (std::size_t i = 0; i < raw.size(); ++i) column[i] = (raw[i][f] - lo) / range;
    std::sort(column.begin(), column.end());
    const std::size_t n = column.size();
    norm.median[f] = n % 2 == 1 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return norm;
}

FeatureNormalizer fit_normalizer(std::span<const PreferencePair> corpus, const FeatureExtractor& extractor) {
  if (corpus.empty()) throw DataError("cannot fit a normalizer on an empty corpus");
  std::vector<BaseFeatureVector> raw;
  raw.reserve(2 * corpus.size());
  for (const auto& p : corpus) {
    raw.push_back(extractor.extract_raw_features(p.context, p.response_a));
    raw.push_back(extractor.extract_raw_features(p.context, p.response_b));
  }
  return fit_normalizer(raw);
}

BaseFeatureVector apply_normalizer(const FeatureNormalizer& normalizer, const BaseFeatureVector& raw) {
  return normalizer.apply(raw);
}

std::string normalizer_to_json(const FeatureNormalizer& n) {
  nlohmann::json j;
  j["format"] = "rfm-normalizer";
  j["version"] = 1;
  j["min"] = n.min;
  j["max"] = n.max;
  j["median"] = n.median;
  j["fitted_on"] = n.fitted_on;
  return j.dump();
}

FeatureNormalizer normalizer_from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("normalizer: ") + e.what());
  }
  if (j.value("format", "") != "rfm-normalizer") throw DataError("normalizer: unexpected format tag");
  if (j.value("version", 0) != 1) throw DataError("normalizer: unsupported version");
  FeatureNormalizer n;
  try {
    n.min = j.at("min").get<BaseFeatureVector>();
    n.max = j.at("max").get<BaseFeatureVector>();
    n.median = j.at("median").get<BaseFeatureVector>();
    n.fitted_on = j.at("fitted_on").get<std::size_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("normalizer: ") + e.what());
  }
  if (n.fitted_on < 1) throw DataError("normalizer: fitted_on must be positive");
  return n;
}

void save_normalizer(const std::filesystem::path& path, const FeatureNormalizer& normalizer) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << normalizer_to_json(normalizer) << '\n';
}

FeatureNormalizer load_normalizer(const std::filesystem::path& path) { return normalizer_from_json(read_file(path)); }

}  // namespace rfm
