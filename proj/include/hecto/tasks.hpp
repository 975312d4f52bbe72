// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "hecto/experts.hpp"

namespace hecto {

/// Token layout shared by the synthetic generators. Ids 0 and 1 are unused.
namespace vocab {
inline constexpr int kSize = 32;
inline constexpr int kGroupAFirst = 2;  // static group A: 2..7
inline constexpr int kGroupBFirst = 8;  // static group B: 8..13
inline constexpr int kGroupWidth = 6;
inline constexpr int kMarkerA = 14;
inline constexpr int kMarkerB = 15;
inline constexpr int kFillerFirst = 16;  // temporal filler: 16..31
inline constexpr int kFillerWidth = 16;

inline bool in_group_a(int t) { return t >= kGroupAFirst && t < kGroupAFirst + kGroupWidth; }
inline bool in_group_b(int t) { return t >= kGroupBFirst && t < kGroupBFirst + kGroupWidth; }
inline bool is_filler(int t) { return t >= kFillerFirst && t < kFillerFirst + kFillerWidth; }
}  // namespace vocab

enum class SubtaskTag { static_reasoning, temporal };

std::string_view to_string(SubtaskTag tag);
SubtaskTag parse_subtask_tag(std::string_view name);

struct Example {
  std::vector<int> tokens;
  double target = 0.0;
  std::optional<SubtaskTag> tag;

  int label() const { return static_cast<int>(target); }
  bool operator==(const Example&) const = default;
};

struct Dataset {
  TaskMode mode = TaskMode::classification;
  std::vector<Example> examples;

  std::size_t size() const { return examples.size(); }
  bool empty() const { return examples.empty(); }
  bool operator==(const Dataset&) const = default;
};

/// Sequence length bounds, inclusive.
struct LengthRange {
  int min = 6;
  int max = 23;
};

inline constexpr LengthRange kStaticLengths{6, 23};
inline constexpr LengthRange kTemporalLengths{6, 16};

/// Ground truth of each generator as a function of the tokens alone.
/// 0 when group A tokens outnumber group B tokens, 1 otherwise.
int static_label(const std::vector<int>& tokens);
/// 1 iff the first marker a precedes the first marker b.
int temporal_label(const std::vector<int>& tokens);
/// 5 * pos(a) / (length - 1).
double regression_target(const std::vector<int>& tokens);

/// Tokens from groups A and B only, never tied. Label 0 when A is the
/// majority, 1 when B is.
Dataset gen_static(std::size_t n, std::uint64_t seed, LengthRange lengths = kStaticLengths);

/// Temporal filler plus exactly one marker a and one marker b at two
/// uniformly chosen positions. Label 1 iff a precedes b.
Dataset gen_temporal(std::size_t n, std::uint64_t seed, LengthRange lengths = kTemporalLengths);

/// round(n * ratio) tagged static examples and the rest tagged temporal,
/// shuffled together. Both halves use the temporal length range.
Dataset gen_mixed(std::size_t n, double ratio, std::uint64_t seed, LengthRange lengths = kTemporalLengths);

/// Temporal filler plus one marker a; target 5 * pos(a) / (length - 1).
Dataset gen_regression(std::size_t n, std::uint64_t seed, LengthRange lengths = kTemporalLengths);

/// Dispatch by task name: static, temporal, mixed, regression.
Dataset generate(std::string_view task, std::size_t n, std::uint64_t seed, double ratio = 0.5);

inline constexpr std::string_view kTaskNames[] = {"static", "temporal", "mixed", "regression"};

/// Classification targets must be integers in [0, num_classes).
void validate_dataset(const Dataset& data, std::size_t vocab_size, std::size_t max_tokens, std::size_t num_classes);

/// One JSON object per line: {"tokens":[...],"target":x} plus "tag" when set.
void save_jsonl(const Dataset& data, const std::filesystem::path& path);
std::string to_jsonl(const Dataset& data);

/// Blank lines are skipped. Any malformed record raises ParseError carrying
/// its 1-based line number.
Dataset load_jsonl(const std::filesystem::path& path, TaskMode mode, std::size_t vocab_size = vocab::kSize);
Dataset parse_jsonl(std::string_view text, TaskMode mode, std::size_t vocab_size = vocab::kSize);

struct Split {
  Dataset train;
  Dataset test;
};

/// Seeded shuffle, then the last round(n * fraction) examples are held out.
Split holdout_split(const Dataset& data, double fraction, std::uint64_t seed);

}  // namespace hecto
