// SPDX-License-Identifier: Apache-2.0
#include "hecto/tasks.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "hecto/error.hpp"
#include "hecto/rng.hpp"

namespace hecto {

namespace {

// Each generator owns a stream derived from the seed so that mixing
// generators never shares draws.
Rng task_rng(std::uint64_t seed, std::uint64_t salt) { return Rng(seed * 0x100000001b3ULL + salt); }

void check_lengths(LengthRange r, int minimum) {
  if (r.min < minimum || r.max < r.min) {
    throw ParameterError("invalid length range [" + std::to_string(r.min) + ", " + std::to_string(r.max) + "]");
  }
}

int filler(Rng& rng) { return vocab::kFillerFirst + static_cast<int>(rng.index(vocab::kFillerWidth)); }

Example static_example(Rng& rng, LengthRange lengths) {
  const int len = rng.between(lengths.min, lengths.max);
  const int label = rng.bernoulli(0.5) ? 1 : 0;
  // majority count strictly above half
  const int majority = rng.between(len / 2 + 1, len);
  Example e;
  e.target = label;
  e.tokens.reserve(static_cast<std::size_t>(len));
  const int major_first = label == 0 ? vocab::kGroupAFirst : vocab::kGroupBFirst;
  const int minor_first = label == 0 ? vocab::kGroupBFirst : vocab::kGroupAFirst;
  for (int i = 0; i < len; ++i) {
    const int first = i < majority ? major_first : minor_first;
    e.tokens.push_back(first + static_cast<int>(rng.index(vocab::kGroupWidth)));
  }
  rng.shuffle(e.tokens);
  return e;
}

Example temporal_example(Rng& rng, LengthRange lengths) {
  const int len = rng.between(lengths.min, lengths.max);
  Example e;
  e.tokens.resize(static_cast<std::size_t>(len));
  for (auto& t : e.tokens) t = filler(rng);
  const std::size_t pa = rng.index(static_cast<std::size_t>(len));
  std::size_t pb = rng.index(static_cast<std::size_t>(len - 1));
  if (pb >= pa) ++pb;
  e.tokens[pa] = vocab::kMarkerA;
  e.tokens[pb] = vocab::kMarkerB;
  e.target = pa < pb ? 1.0 : 0.0;
  return e;
}

}  // namespace

int static_label(const std::vector<int>& tokens) {
  int a = 0, b = 0;
  for (int t : tokens) {
    a += vocab::in_group_a(t) ? 1 : 0;
    b += vocab::in_group_b(t) ? 1 : 0;
  }
  return a > b ? 0 : 1;
}

int temporal_label(const std::vector<int>& tokens) {
  const auto a = std::find(tokens.begin(), tokens.end(), vocab::kMarkerA);
  const auto b = std::find(tokens.begin(), tokens.end(), vocab::kMarkerB);
  if (a == tokens.end() || b == tokens.end()) throw DataError("temporal sequence needs both markers");
  return a < b ? 1 : 0;
}

double regression_target(const std::vector<int>& tokens) {
  const auto a = std::find(tokens.begin(), tokens.end(), vocab::kMarkerA);
  if (a == tokens.end() || tokens.size() < 2) throw DataError("regression sequence needs a marker and length >= 2");
  return 5.0 * static_cast<double>(a - tokens.begin()) / static_cast<double>(tokens.size() - 1);
}

std::string_view to_string(SubtaskTag tag) { return tag == SubtaskTag::temporal ? "temporal" : "static"; }

SubtaskTag parse_subtask_tag(std::string_view name) {
  if (name == "static") return SubtaskTag::static_reasoning;
  if (name == "temporal") return SubtaskTag::temporal;
  throw DataError("unknown subtask tag '" + std::string(name) + "'");
}

Dataset gen_static(std::size_t n, std::uint64_t seed, LengthRange lengths) {
  if (n < 1) throw ParameterError("gen_static needs n >= 1");
  check_lengths(lengths, 1);
  Rng rng = task_rng(seed, 1);
  Dataset d;
  d.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) d.examples.push_back(static_example(rng, lengths));
  return d;
}

Dataset gen_temporal(std::size_t n, std::uint64_t seed, LengthRange lengths) {
  if (n < 1) throw ParameterError("gen_temporal needs n >= 1");
  check_lengths(lengths, 2);
  Rng rng = task_rng(seed, 2);
  Dataset d;
  d.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) d.examples.push_back(temporal_example(rng, lengths));
  return d;
}

Dataset gen_mixed(std::size_t n, double ratio, std::uint64_t seed, LengthRange lengths) {
  if (n < 1) throw ParameterError("gen_mixed needs n >= 1");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ParameterError("gen_mixed ratio must be in (0, 1)");
  check_lengths(lengths, 2);
  const auto n_static = static_cast<std::size_t>(std::llround(static_cast<double>(n) * ratio));
  Rng rng = task_rng(seed, 3);
  Dataset d;
  d.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Example e = i < n_static ? static_example(rng, lengths) : temporal_example(rng, lengths);
    e.tag = i < n_static ? SubtaskTag::static_reasoning : SubtaskTag::temporal;
    d.examples.push_back(std::move(e));
  }
  rng.shuffle(d.examples);
  return d;
}

Dataset gen_regression(std::size_t n, std::uint64_t seed, LengthRange lengths) {
  if (n < 1) throw ParameterError("gen_regression needs n >= 1");
  check_lengths(lengths, 2);
  Rng rng = task_rng(seed, 4);
  Dataset d;
  d.mode = TaskMode::regression;
  d.examples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int len = rng.between(lengths.min, lengths.max);
    Example e;
    e.tokens.resize(static_cast<std::size_t>(len));
    for (auto& t : e.tokens) t = filler(rng);
    const std::size_t pa = rng.index(static_cast<std::size_t>(len));
    e.tokens[pa] = vocab::kMarkerA;
    e.target = 5.0 * static_cast<double>(pa) / static_cast<double>(len - 1);
    d.examples.push_back(std::move(e));
  }
  return d;
}

Dataset generate(std::string_view task, std::size_t n, std::uint64_t seed, double ratio) {
  if (task == "static") return gen_static(n, seed);
  if (task == "temporal") return gen_temporal(n, seed);
  if (task == "mixed") return gen_mixed(n, ratio, seed);
  if (task == "regression") return gen_regression(n, seed);
  throw UsageError("unknown task '" + std::string(task) + "' (expected static, temporal, mixed or regression)");
}

void validate_dataset(const Dataset& data, std::size_t vocab_size, std::size_t max_tokens, std::size_t num_classes) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto& e = data.examples[i];
    if (e.tokens.empty() || e.tokens.size() > max_tokens) {
      throw DataError("example " + std::to_string(i) + " has " + std::to_string(e.tokens.size()) +
                      " tokens (allowed 1.." + std::to_string(max_tokens) + ")");
    }
    for (int t : e.tokens) {
      if (t < 0 || static_cast<std::size_t>(t) >= vocab_size) {
        throw DataError("example " + std::to_string(i) + " has token " + std::to_string(t) + " outside vocabulary");
      }
    }
    if (!std::isfinite(e.target)) throw DataError("example " + std::to_string(i) + " has a non-finite target");
    if (data.mode == TaskMode::classification) {
      if (e.target != std::floor(e.target)) {
        throw ModeError("example " + std::to_string(i) + " has a non-integer target in a classification dataset");
      }
      if (e.target < 0 || e.target >= static_cast<double>(num_classes)) {
        throw DataError("example " + std::to_string(i) + " has label " + std::to_string(e.label()) +
                        " outside [0, " + std::to_string(num_classes) + ")");
      }
    }
  }
}

std::string to_jsonl(const Dataset& data) {
  std::string out;
  for (const auto& e : data.examples) {
    nlohmann::ordered_json j;
    j["tokens"] = e.tokens;
    if (data.mode == TaskMode::classification) {
      j["target"] = e.label();
    } else {
      j["target"] = e.target;
    }
    if (e.tag) j["tag"] = to_string(*e.tag);
    out += j.dump();
    out += '\n';
  }
  return out;
}

void save_jsonl(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f << to_jsonl(data);
  if (!f) throw IoError("failed writing " + path.string());
}

Dataset parse_jsonl(std::string_view text, TaskMode mode, std::size_t vocab_size) {
  Dataset d;
  d.mode = mode;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& err) {
      throw ParseError(line_no, std::string("malformed JSON: ") + err.what());
    }
    if (!j.is_object()) throw ParseError(line_no, "record is not an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
      if (it.key() != "tokens" && it.key() != "target" && it.key() != "tag") {
        throw ParseError(line_no, "unknown field '" + it.key() + "'");
      }
    }
    if (!j.contains("tokens") || !j["tokens"].is_array()) throw ParseError(line_no, "missing tokens array");
    if (!j.contains("target") || !j["target"].is_number()) throw ParseError(line_no, "missing numeric target");
    Example e;
    for (const auto& t : j["tokens"]) {
      if (!t.is_number_integer()) throw ParseError(line_no, "token is not an integer");
      const auto v = t.get<long long>();
      if (v < 0 || static_cast<unsigned long long>(v) >= vocab_size) {
        throw ParseError(line_no, "token " + std::to_string(v) + " outside vocabulary of size " +
                                      std::to_string(vocab_size));
      }
      e.tokens.push_back(static_cast<int>(v));
    }
    if (e.tokens.empty()) throw ParseError(line_no, "empty token sequence");
    e.target = j["target"].get<double>();
    if (!std::isfinite(e.target)) throw ParseError(line_no, "non-finite target");
    if (mode == TaskMode::classification && (e.target != std::floor(e.target) || e.target < 0)) {
      throw ParseError(line_no, "classification target must be a non-negative integer");
    }
    if (j.contains("tag")) {
      if (!j["tag"].is_string()) throw ParseError(line_no, "tag must be a string");
      try {
        e.tag = parse_subtask_tag(j["tag"].get<std::string>());
      } catch (const DataError& err) {
        throw ParseError(line_no, err.what());
      }
    }
    d.examples.push_back(std::move(e));
  }
  return d;
}

Dataset load_jsonl(const std::filesystem::path& path, TaskMode mode, std::size_t vocab_size) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_jsonl(ss.str(), mode, vocab_size);
}

Split holdout_split(const Dataset& data, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0.0 && fraction < 1.0)) throw ParameterError("holdout fraction must be in [0, 1)");
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng = task_rng(seed, 5);
  rng.shuffle(order);
  const auto n_test = static_cast<std::size_t>(std::llround(static_cast<double>(data.size()) * fraction));
  Split s;
  s.train.mode = s.test.mode = data.mode;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& target = i < order.size() - n_test ? s.train : s.test;
    target.examples.push_back(data.examples[order[i]]);
  }
  return s;
}

}  // namespace hecto
