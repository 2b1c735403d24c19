#include "thinker/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

namespace thinker::dataset {
namespace {

std::string require_string(const nlohmann::json& record, const char* field, std::size_t line_no,
                           const std::string& source) {
  auto it = record.find(field);
  if (it == record.end()) {
    throw DatasetError(source + ":" + std::to_string(line_no) + ": missing field \"" + field + "\"");
  }
  if (!it->is_string()) {
    throw DatasetError(source + ":" + std::to_string(line_no) + ": field \"" + field + "\" must be a string");
  }
  auto value = it->get<std::string>();
  if (value.empty()) {
    throw DatasetError(source + ":" + std::to_string(line_no) + ": field \"" + field + "\" is empty");
  }
  return value;
}

bool blank(const std::string& line) {
  return std::all_of(line.begin(), line.end(), [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

Dataset parse_dataset(const std::string& contents, const std::string& source) {
  Dataset ds;
  ds.source_path = source;
  std::unordered_set<std::string> seen;
  std::istringstream in(contents);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (blank(line)) continue;

    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw DatasetError(source + ":" + std::to_string(line_no) + ": malformed record: " + e.what());
    }
    if (!record.is_object()) {
      throw DatasetError(source + ":" + std::to_string(line_no) + ": record must be a JSON object");
    }

    QAItem item;
    if (record.contains("id")) {
      item.id = require_string(record, "id", line_no, source);
    } else {
      item.id = "line-" + std::to_string(line_no);
    }
    item.question = require_string(record, "question", line_no, source);
    item.answer = require_string(record, "answer", line_no, source);

    if (!seen.insert(item.id).second) {
      throw DatasetError(source + ":" + std::to_string(line_no) + ": duplicate id \"" + item.id + "\"");
    }
    ds.items.push_back(std::move(item));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DatasetError("cannot read dataset file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  if (in.bad()) throw DatasetError("error reading dataset file " + path.string());
  return parse_dataset(buf.str(), path.string());
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DatasetError("cannot write dataset file " + path.string());
  for (const auto& item : dataset.items) {
    nlohmann::ordered_json rec;
    rec["id"] = item.id;
    rec["question"] = item.question;
    rec["answer"] = item.answer;
    out << rec.dump() << '\n';
  }
  if (!out) throw DatasetError("error writing dataset file " + path.string());
}

std::vector<QAItem> sample_batch(const Dataset& dataset, std::size_t n, std::uint64_t seed) {
  if (dataset.empty()) throw DatasetError("cannot sample from an empty dataset");
  std::mt19937_64 rng(seed);
  std::vector<QAItem> out;
  out.reserve(n);
  const std::size_t size = dataset.size();
  if (n <= size) {
    // Partial Fisher-Yates over indices.
    std::vector<std::size_t> idx(size);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < n; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, size - 1);
      std::swap(idx[i], idx[pick(rng)]);
      out.push_back(dataset.items[idx[i]]);
    }
  } else {
    std::uniform_int_distribution<std::size_t> pick(0, size - 1);
    for (std::size_t i = 0; i < n; ++i) out.push_back(dataset.items[pick(rng)]);
  }
  return out;
}

}  // namespace thinker::dataset
