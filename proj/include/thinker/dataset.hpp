#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace thinker::dataset {

/// One question with its canonical ground-truth answer.
struct QAItem {
  std::string id;
  std::string question;
  std::string answer;

  bool operator==(const QAItem&) const = default;
};

/// Ordered question-answer corpus. Item ids are unique.
struct Dataset {
  std::vector<QAItem> items;
  std::string source_path;

  std::size_t size() const { return items.size(); }
  bool empty() const { return items.empty(); }
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reads a line-delimited JSON file with records {id?, question, answer}.
/// Blank lines are skipped; records without an id get "line-<n>" (1-based).
Dataset load_dataset(const std::filesystem::path& path);

/// Parses dataset records from an in-memory buffer. `source` is used in
/// error messages only.
Dataset parse_dataset(const std::string& contents, const std::string& source = "<memory>");

/// Writes `dataset` in the same line-delimited format load_dataset reads.
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);

/// Draws `n` items deterministically from (dataset, n, seed). Without
/// replacement when n <= size, with replacement otherwise.
std::vector<QAItem> sample_batch(const Dataset& dataset, std::size_t n, std::uint64_t seed);

}  // namespace thinker::dataset
