#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace rfm {

// A context x with two candidate responses y and y', in file order.
struct PreferencePair {
  std::string context;
  std::string response_a;
  std::string response_b;

  bool operator==(const PreferencePair&) const = default;
};

// A pair ranked by a rater. label == 1 encodes response_a preferred over
// response_b.
struct PreferenceRecord {
  std::string rater_id;
  PreferencePair pair;
  int label = 0;

  bool operator==(const PreferenceRecord&) const = default;
};

// A context and its pool of candidate responses (order preserved, duplicates
// allowed).
struct CandidateSet {
  std::string context;
  std::vector<std::string> candidates;

  bool operator==(const CandidateSet&) const = default;
};

// True when `text` is well-formed UTF-8.
bool is_valid_utf8(std::string_view text) noexcept;

// Throws DataError if any of the three texts is empty after trimming.
void validate_pair(const PreferencePair& pair, std::size_t line = 0);
void validate_record(const PreferenceRecord& record, std::size_t line = 0);

// Line-delimited JSON files. Blank lines are skipped; every other line must be
// one object with exactly the documented fields.
//   records:        {"rater_id", "context", "response_a", "response_b", "label"}
//   pairs:          {"context", "response_a", "response_b"}
//   candidate sets: {"context", "candidates": [...]}
std::vector<PreferenceRecord> load_preference_records(const std::filesystem::path& path);
void save_preference_records(const std::filesystem::path& path, std::span<const PreferenceRecord> records);

std::vector<PreferencePair> load_preference_pairs(const std::filesystem::path& path);
void save_preference_pairs(const std::filesystem::path& path, std::span<const PreferencePair> pairs);

std::vector<CandidateSet> load_candidate_sets(const std::filesystem::path& path);
void save_candidate_sets(const std::filesystem::path& path, std::span<const CandidateSet> sets);

// Single-line parsers, exposed for the service and for tests.
PreferenceRecord parse_preference_record(std::string_view line, std::size_t line_number = 0);
std::string format_preference_record(const PreferenceRecord& record);

template <typename T>
struct DatasetSplit {
  std::vector<T> train;
  std::vector<T> validation;
};

// Deterministic shuffle keyed by `seed`; the validation part receives
// ceil(validation_fraction * N) items. Both parts keep the input order.
template <typename T>
DatasetSplit<T> split_dataset(std::span<const T> items, double validation_fraction, std::uint64_t seed);

// Indices form of split_dataset: (train indices, validation indices), each
// ascending.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_indices(std::size_t count,
                                                                            double validation_fraction,
                                                                            std::uint64_t seed);

template <typename T>
DatasetSplit<T> split_dataset(std::span<const T> items, double validation_fraction, std::uint64_t seed) {
  auto [train_idx, val_idx] = split_indices(items.size(), validation_fraction, seed);
  DatasetSplit<T> out;
  out.train.reserve(train_idx.size());
  out.validation.reserve(val_idx.size());
  for (std::size_t i : train_idx) out.train.push_back(items[i]);
  for (std::size_t i : val_idx) out.validation.push_back(items[i]);
  return out;
}

}  // namespace rfm
