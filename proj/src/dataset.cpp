#include "rfm/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include <json.hpp>

#include "rfm/error.hpp"
#include "rfm/random.hpp"

namespace rfm {
namespace {

using nlohmann::json;

bool blank(std::string_view s) {
  return std::all_of(s.begin(), s.end(), [](unsigned char c) { return std::isspace(c) != 0; });
}

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return in;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

json parse_object(std::string_view line, std::size_t line_number, const std::set<std::string>& fields) {
  if (!is_valid_utf8(line)) throw DataError("invalid UTF-8", line_number);
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed record: ") + e.what(), line_number);
  }
  if (!j.is_object()) throw DataError("malformed record: expected an object", line_number);
  for (const auto& [key, _] : j.items()) {
    if (!fields.contains(key)) throw DataError("unknown field '" + key + "'", line_number);
  }
  for (const auto& f : fields) {
    if (!j.contains(f)) throw DataError("missing field '" + f + "'", line_number);
  }
  return j;
}

std::string get_string(const json& j, const char* key, std::size_t line_number) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw DataError(std::string("field '") + key + "' must be a string", line_number);
  return v.get<std::string>();
}

PreferencePair pair_from_json(const json& j, std::size_t line_number) {
  PreferencePair p{get_string(j, "context", line_number), get_string(j, "response_a", line_number),
                   get_string(j, "response_b", line_number)};
  validate_pair(p, line_number);
  return p;
}

template <typename F>
void for_each_line(const std::filesystem::path& path, F&& f) {
  auto in = open_input(path);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;
    f(line, n);
  }
}

}  // namespace

bool is_valid_utf8(std::string_view text) noexcept {
  std::size_t i = 0;
  const std::size_t n = text.size();
  while (i < n) {
    const auto c = static_cast<unsigned char>(text[i]);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return false;
    }
    if (i + len > n) return false;
    for (std::size_t k = 1; k < len; ++k) {
      const auto cc = static_cast<unsigned char>(text[i + k]);
      if ((cc & 0xC0) != 0x80) return false;
      cp = (cp << 6) | (cc & 0x3F);
    }
    // Overlong forms, surrogates and out-of-range code points.
    if ((len == 2 && cp < 0x80) || (len == 3 && cp < 0x800) || (len == 4 && cp < 0x10000)) return false;
    if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) return false;
    i += len;
  }
  return true;
}

void validate_pair(const PreferencePair& pair, std::size_t line) {
  if (blank(pair.context)) throw DataError("context is empty", line);
  if (blank(pair.response_a)) throw DataError("response_a is empty", line);
  if (blank(pair.response_b)) throw DataError("response_b is empty", line);
}

void validate_record(const PreferenceRecord& record, std::size_t line) {
  if (record.rater_id.empty()) throw DataError("rater_id is empty", line);
  if (record.label != 0 && record.label != 1) throw DataError("label must be 0 or 1", line);
  validate_pair(record.pair, line);
}

PreferenceRecord parse_preference_record(std::string_view line, std::size_t line_number) {
  static const std::set<std::string> fields{"rater_id", "context", "response_a", "response_b", "label"};
  const json j = parse_object(line, line_number, fields);
  PreferenceRecord r;
  r.rater_id = get_string(j, "rater_id", line_number);
  const auto& label = j.at("label");
  if (!label.is_number_integer()) throw DataError("label must be the integer 0 or 1", line_number);
  const auto value = label.get<std::int64_t>();
  if (value != 0 && value != 1) throw DataError("label must be 0 or 1, got " + std::to_string(value), line_number);
  r.label = static_cast<int>(value);
  r.pair = pair_from_json(j, line_number);
  validate_record(r, line_number);
  return r;
}

std::string format_preference_record(const PreferenceRecord& r) {
  json j;
  j["rater_id"] = r.rater_id;
  j["context"] = r.pair.context;
  j["response_a"] = r.pair.response_a;
  j["response_b"] = r.pair.response_b;
  j["label"] = r.label;
  return j.dump();
}

std::vector<PreferenceRecord> load_preference_records(const std::filesystem::path& path) {
  std::vector<PreferenceRecord> out;
  for_each_line(path, [&](const std::string& line, std::size_t n) { out.push_back(parse_preference_record(line, n)); });
  return out;
}

void save_preference_records(const std::filesystem::path& path, std::span<const PreferenceRecord> records) {
  auto out = open_output(path);
  for (const auto& r : records) out << format_preference_record(r) << '\n';
}

std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path) {
  static const std::set<std::string> fields{"context", "response_a", "response_b"};
  std::vector<PreferencePair> out;
  for_each_line(path, [&](const std::string& line, std::size_t n) {
    out.push_back(pair_from_json(parse_object(line, n, fields), n));
  });
  return out;
}

void save_preference_pairs(const std::filesystem::path& path, std::span<const PreferencePair> pairs) {
  auto out = open_output(path);
  for (const auto& p : pairs) {
    json j;
    j["context"] = p.context;
    j["response_a"] = p.response_a;
    j["response_b"] = p.response_b;
    out << j.dump() << '\n';
  }
}

std::vector<CandidateSet> load_candidate_sets(const std::filesystem::path& path) {
  static const std::set<std::string> fields{"context", "candidates"};
  std::vector<CandidateSet> out;
  for_each_line(path, [&](const std::string& line, std::size_t n) {
    const json j = parse_object(line, n, fields);
    CandidateSet set;
    set.context = get_string(j, "context", n);
    if (blank(set.context)) throw DataError("context is empty", n);
    const auto& cands = j.at("candidates");
    if (!cands.is_array()) throw DataError("field 'candidates' must be an array", n);
    if (cands.empty()) throw DataError("candidate list is empty", n);
    for (const auto& c : cands) {
      if (!c.is_string()) throw DataError("candidates must be strings", n);
      set.candidates.push_back(c.get<std::string>());
      if (blank(set.candidates.back())) throw DataError("candidate is empty", n);
    }
    out.push_back(std::move(set));
  });
  return out;
}

void save_candidate_sets(const std::filesystem::path& path, std::span<const CandidateSet> sets) {
  auto out = open_output(path);
  for (const auto& s : sets) {
    json j;
    j["context"] = s.context;
    j["candidates"] = s.candidates;
    out << j.dump() << '\n';
  }
}

std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count,
                                                                            double validation_fraction,
                                                                            std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
    throw ConfigError("validation_fraction", "must lie strictly between 0 and 1");
  }
  if (count == 0) throw DataError("cannot split an empty dataset");
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(derive_seed(seed, "split"));
  rng.shuffle(order);
  const auto n_val = static_cast<std::size_t>(std::ceil(validation_fraction * static_cast<double>(count) - 1e-9));
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::vector<std::size_t> train(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
  std::sort(val.begin(), val.end());
  std::sort(train.begin(), train.end());
  return {std::move(train), std::move(val)};
}

}  // namespace rfm
