// SPDX-License-Identifier: Apache-2.0
#include "hecto/experiment.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "json.hpp"
#include "hecto/error.hpp"
#include "hecto/report.hpp"

namespace hecto {

namespace {

// Shortest decimal text that parses back to the same double.
std::string exact(double v) {
  char buf[40];
  for (int precision = 1; precision <= 17; ++precision) {
    std::snprintf(buf, sizeof(buf), "%.*g", precision, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(std::string_view s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    auto end = s.find(',', pos);
    if (end == std::string_view::npos) end = s.size();
    auto item = trim(s.substr(pos, end - pos));
    if (!item.empty()) out.push_back(item);
    pos = end + 1;
  }
  return out;
}

double to_double(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(d)) {
    throw UsageError(std::string(key) + ": '" + s + "' is not a number");
  }
  return d;
}

std::uint64_t to_uint(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  std::uint64_t out = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw UsageError(std::string(key) + ": '" + s + "' is not a non-negative integer");
  }
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  const std::string s = trim(v);
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw UsageError(std::string(key) + ": '" + s + "' is not a boolean");
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) out += (i ? "," : "") + items[i];
  return out;
}

template <typename F>
auto rethrow_as_usage(std::string_view key, F&& f) {
  try {
    return f();
  } catch (const UsageError&) {
    throw;
  } catch (const Error& e) {
    throw UsageError(std::string(key) + ": " + e.what());
  }
}

struct Field {
  std::function<void(ExperimentConfig&, std::string_view key, std::string_view value)> set;
  std::function<std::string(const ExperimentConfig&)> get;
};

// Section order and key order of the canonical text form.
const std::vector<std::pair<std::string, Field>>& schema() {
  using C = ExperimentConfig;
  using SV = std::string_view;
  static const std::vector<std::pair<std::string, Field>> fields = {
      {"experiment.preset", {[](C& c, SV, SV v) { c.preset = trim(v); }, [](const C& c) { return c.preset; }}},
      {"experiment.seeds",
       {[](C& c, SV k, SV v) {
          c.seeds.clear();
          for (const auto& s : split_list(v)) c.seeds.push_back(to_uint(k, s));
        },
        [](const C& c) {
          std::vector<std::string> s;
          for (auto x : c.seeds) s.push_back(std::to_string(x));
          return join(s);
        }}},
      {"task.name", {[](C& c, SV, SV v) { c.task.name = trim(v); }, [](const C& c) { return c.task.name; }}},
      {"task.n", {[](C& c, SV k, SV v) { c.task.n = to_uint(k, v); }, [](const C& c) { return std::to_string(c.task.n); }}},
      {"task.ratio", {[](C& c, SV k, SV v) { c.task.ratio = to_double(k, v); }, [](const C& c) { return exact(c.task.ratio); }}},
      {"task.data_seed",
       {[](C& c, SV k, SV v) { c.task.data_seed = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.task.data_seed); }}},
      {"task.holdout",
       {[](C& c, SV k, SV v) { c.task.holdout = to_double(k, v); }, [](const C& c) { return exact(c.task.holdout); }}},
      {"task.dataset", {[](C& c, SV, SV v) { c.task.dataset = trim(v); }, [](const C& c) { return c.task.dataset; }}},
      {"encoder.vocab_size",
       {[](C& c, SV k, SV v) { c.model.encoder.vocab_size = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.model.encoder.vocab_size); }}},
      {"encoder.d_embed",
       {[](C& c, SV k, SV v) { c.model.encoder.d_embed = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.model.encoder.d_embed); }}},
      {"encoder.max_len",
       {[](C& c, SV k, SV v) { c.model.encoder.max_len = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.model.encoder.max_len); }}},
      {"encoder.frozen",
       {[](C& c, SV k, SV v) { c.model.encoder.frozen = c.train.frozen_encoder = to_bool(k, v); },
        [](const C& c) { return std::string(c.model.encoder.frozen ? "true" : "false"); }}},
      {"model.experts",
       {[](C& c, SV k, SV v) {
          c.model.experts.clear();
          for (const auto& s : split_list(v)) {
            c.model.experts.push_back(rethrow_as_usage(k, [&] { return parse_expert_kind(s); }));
          }
        },
        [](const C& c) {
          std::vector<std::string> s;
          for (auto e : c.model.experts) s.emplace_back(to_string(e));
          return join(s);
        }}},
      {"model.mode",
       {[](C& c, SV k, SV v) {
          const auto s = trim(v);
          if (s == "classification") {
            c.model.dims.mode = TaskMode::classification;
          } else if (s == "regression") {
            c.model.dims.mode = TaskMode::regression;
          } else {
            throw UsageError(std::string(k) + ": expected classification or regression, got '" + s + "'");
          }
        },
        [](const C& c) {
          return std::string(c.model.dims.mode == TaskMode::regression ? "regression" : "classification");
        }}},
      {"model.num_classes",
       {[](C& c, SV k, SV v) { c.model.dims.num_classes = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.model.dims.num_classes); }}},
      {"model.d_proj",
       {[](C& c, SV k, SV v) { c.model.dims.d_proj = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.model.dims.d_proj); }}},
      {"model.d_hid",
       {[](C& c, SV k, SV v) { c.model.dims.d_hid = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.model.dims.d_hid); }}},
      {"model.tcn_dropout",
       {[](C& c, SV k, SV v) { c.model.dims.tcn_dropout = to_double(k, v); },
        [](const C& c) { return exact(c.model.dims.tcn_dropout); }}},
      {"gate.tau", {[](C& c, SV k, SV v) { c.model.gate.tau = to_double(k, v); }, [](const C& c) { return exact(c.model.gate.tau); }}},
      {"gate.input",
       {[](C& c, SV k, SV v) { c.model.gate.input = rethrow_as_usage(k, [&] { return parse_gate_input(trim(v)); }); },
        [](const C& c) { return std::string(to_string(c.model.gate.input)); }}},
      {"gate.policy",
       {[](C& c, SV k, SV v) {
          c.model.gate.policy = rethrow_as_usage(k, [&] { return parse_routing_policy(trim(v)); });
        },
        [](const C& c) { return std::string(to_string(c.model.gate.policy)); }}},
      {"gate.d_hidden",
       {[](C& c, SV k, SV v) { c.model.gate.d_hidden = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.model.gate.d_hidden); }}},
      {"loss.lambda_ent",
       {[](C& c, SV k, SV v) { c.train.loss.lambda_ent = to_double(k, v); },
        [](const C& c) { return exact(c.train.loss.lambda_ent); }}},
      {"loss.lambda_div",
       {[](C& c, SV k, SV v) { c.train.loss.lambda_div = to_double(k, v); },
        [](const C& c) { return exact(c.train.loss.lambda_div); }}},
      {"train.learning_rate",
       {[](C& c, SV k, SV v) { c.train.optim.learning_rate = to_double(k, v); },
        [](const C& c) { return exact(c.train.optim.learning_rate); }}},
      {"train.beta1",
       {[](C& c, SV k, SV v) { c.train.optim.beta1 = to_double(k, v); }, [](const C& c) { return exact(c.train.optim.beta1); }}},
      {"train.beta2",
       {[](C& c, SV k, SV v) { c.train.optim.beta2 = to_double(k, v); }, [](const C& c) { return exact(c.train.optim.beta2); }}},
      {"train.eps",
       {[](C& c, SV k, SV v) { c.train.optim.eps = to_double(k, v); }, [](const C& c) { return exact(c.train.optim.eps); }}},
      {"train.weight_decay",
       {[](C& c, SV k, SV v) { c.train.optim.weight_decay = to_double(k, v); },
        [](const C& c) { return exact(c.train.optim.weight_decay); }}},
      {"train.batch_size",
       {[](C& c, SV k, SV v) { c.train.batch_size = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.train.batch_size); }}},
      {"train.epochs",
       {[](C& c, SV k, SV v) { c.train.epochs = to_uint(k, v); }, [](const C& c) { return std::to_string(c.train.epochs); }}},
      {"train.eval_chunk",
       {[](C& c, SV k, SV v) { c.train.eval_chunk = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.train.eval_chunk); }}},
      {"report.latency_repetitions",
       {[](C& c, SV k, SV v) { c.report.latency_repetitions = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.report.latency_repetitions); }}},
      {"report.latency_samples",
       {[](C& c, SV k, SV v) { c.report.latency_samples = to_uint(k, v); },
        [](const C& c) { return std::to_string(c.report.latency_samples); }}},
  };
  return fields;
}

const Field& field(std::string_view key) {
  for (const auto& [name, f] : schema()) {
    if (name == key) return f;
  }
  throw UsageError("unknown config key '" + std::string(key) + "'");
}

ExperimentConfig desk() {
  ExperimentConfig c;
  c.preset = "desk";
  c.train.optim.learning_rate = 1e-3;
  c.train.epochs = 15;
  return c;
}

ExperimentConfig paper_main() {
  ExperimentConfig c;
  c.preset = "paper-main";
  c.train.optim.learning_rate = 2e-5;
  c.train.batch_size = 16;
  c.train.epochs = 5;
  c.train.loss = {0.05, 0.08};
  c.model.gate.tau = 1.5;
  c.seeds = {1, 2, 3};
  return c;
}

ExperimentConfig paper_dims() {
  ExperimentConfig c = paper_main();
  c.preset = "paper-dims";
  c.model.encoder.d_embed = 768;
  c.model.dims.d_proj = 256;
  c.model.dims.d_hid = 128;
  c.model.gate.d_hidden = 128;
  return c;
}

using Delta = std::function<void(ExperimentConfig&)>;

const std::vector<std::pair<std::string, Delta>>& deltas() {
  using C = ExperimentConfig;
  static const std::vector<std::pair<std::string, Delta>> table = {
      {"frozen", [](C& c) { c.model.encoder.frozen = c.train.frozen_encoder = true; }},
      {"top2", [](C& c) { c.model.gate.policy = RoutingPolicy::top2; }},
      {"no-reg",
       [](C& c) {
         c.train.loss = {0.0, 0.0};
         c.seeds = {42};
       }},
      {"experts-1",
       [](C& c) {
         c.model.experts = {ExpertKind::gru};
         c.model.encoder.frozen = c.train.frozen_encoder = true;
         c.seeds = {42};
       }},
      {"experts-2",
       [](C& c) {
         c.model.experts = {ExpertKind::ffnn, ExpertKind::gru};
         c.model.encoder.frozen = c.train.frozen_encoder = true;
         c.seeds = {42};
       }},
      {"experts-4",
       [](C& c) {
         c.model.experts = {ExpertKind::ffnn, ExpertKind::ffnn, ExpertKind::gru, ExpertKind::gru};
         c.model.encoder.frozen = c.train.frozen_encoder = true;
         c.seeds = {42};
       }},
      {"gate-mean", [](C& c) { c.model.gate.input = GateInput::mean_pool; }},
      {"soft-routing", [](C& c) { c.model.gate.policy = RoutingPolicy::soft; }},
      {"batch-64", [](C& c) { c.train.batch_size = 64; }},
      {"hecto-x",
       [](C& c) {
         c.model.experts = {ExpertKind::ffnn, ExpertKind::tcn};
         c.model.encoder.frozen = c.train.frozen_encoder = true;
       }},
      {"regressor",
       [](C& c) {
         c.model.dims.mode = TaskMode::regression;
         c.task.name = "regression";
         c.task.holdout = 0.3;
       }},
      {"ff-ff", [](C& c) { c.model.experts = {ExpertKind::ffnn, ExpertKind::ffnn}; }},
      {"gru-gru", [](C& c) { c.model.experts = {ExpertKind::gru, ExpertKind::gru}; }},
      {"ff-gru", [](C& c) { c.model.experts = {ExpertKind::ffnn, ExpertKind::gru}; }},
  };
  return table;
}

}  // namespace

void ExperimentConfig::validate() const {
  if (seeds.empty()) throw ParameterError("experiment.seeds must not be empty");
  if (task.dataset.empty()) {
    bool known = false;
    for (auto name : kTaskNames) known = known || name == task.name;
    if (!known) throw ParameterError("unknown task '" + task.name + "'");
    if (task.n < 1) throw ParameterError("task.n must be >= 1");
    if ((task.name == "regression") != (model.dims.mode == TaskMode::regression)) {
      throw ParameterError("task '" + task.name + "' does not match model.mode");
    }
  }
  if (!(task.holdout >= 0.0 && task.holdout < 1.0)) throw ParameterError("task.holdout must be in [0, 1)");
  if (task.name == "mixed" && !(task.ratio > 0.0 && task.ratio < 1.0)) throw ParameterError("task.ratio must be in (0, 1)");
  if (model.encoder.frozen != train.frozen_encoder) throw ParameterError("encoder.frozen is inconsistent");
  model.validate();
  train.validate();
  if (report.latency_repetitions < 1) throw ParameterError("report.latency_repetitions must be >= 1");
}

std::vector<std::string> preset_names() {
  std::vector<std::string> out{"desk", "paper-main", "paper-dims"};
  for (const auto& [name, _] : deltas()) out.push_back(name);
  return out;
}

bool is_base_preset(std::string_view name) { return name == "desk" || name == "paper-main" || name == "paper-dims"; }

ExperimentConfig resolve_presets(std::string_view list) {
  const auto names = split_list(list);
  if (names.empty()) throw UsageError("empty preset list");
  ExperimentConfig c = desk();
  std::size_t bases = 0;
  for (const auto& n : names) bases += is_base_preset(n) ? 1 : 0;
  if (bases > 1) throw UsageError("preset list '" + std::string(list) + "' names more than one base preset");
  for (const auto& n : names) {
    if (n == "desk") c = desk();
    if (n == "paper-main") c = paper_main();
    if (n == "paper-dims") c = paper_dims();
  }
  for (const auto& n : names) {
    if (is_base_preset(n)) continue;
    bool found = false;
    for (const auto& [name, apply] : deltas()) {
      if (name == n) {
        apply(c);
        found = true;
      }
    }
    if (!found) throw UsageError("unknown preset '" + n + "' (known: " + join(preset_names()) + ")");
  }
  c.preset = join(names);
  return c;
}

void apply_override(ExperimentConfig& config, std::string_view key, std::string_view value) {
  field(trim(key)).set(config, trim(key), value);
}

void apply_override(ExperimentConfig& config, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos) throw UsageError("override '" + std::string(assignment) + "' is not key=value");
  apply_override(config, assignment.substr(0, eq), assignment.substr(eq + 1));
}

std::string to_ini(const ExperimentConfig& config) {
  std::string out;
  std::string section;
  for (const auto& [name, f] : schema()) {
    const auto dot = name.find('.');
    const auto sec = name.substr(0, dot);
    if (sec != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + sec + "]\n";
      section = sec;
    }
    out += name.substr(dot + 1) + " = " + f.get(config) + "\n";
  }
  return out;
}

ExperimentConfig parse_ini(std::string_view text) {
  boost::property_tree::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw UsageError("config: line " + std::to_string(e.line()) + ": " + e.message());
  }
  ExperimentConfig c = desk();
  for (const auto& [section, keys] : tree) {
    if (keys.empty() && !keys.data().empty()) {
      throw UsageError("config: key '" + section + "' outside of a section");
    }
    for (const auto& [key, value] : keys) apply_override(c, section + "." + key, value.data());
  }
  return c;
}

ExperimentConfig load_ini(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw UsageError("config file " + path.string() + " does not exist");
  return parse_ini(read_file(path));
}

Dataset load_task_data(const ExperimentConfig& config) {
  if (!config.task.dataset.empty()) {
    if (!std::filesystem::exists(config.task.dataset)) {
      throw UsageError("dataset " + config.task.dataset + " does not exist");
    }
    return load_jsonl(config.task.dataset, config.model.dims.mode, config.model.encoder.vocab_size);
  }
  return generate(config.task.name, config.task.n, config.task.data_seed, config.task.ratio);
}

void save_checkpoint(const HectoModel& model, const ExperimentConfig& config, const std::filesystem::path& path) {
  nlohmann::ordered_json j;
  j["format"] = "hecto-checkpoint";
  j["version"] = 1;
  j["config"] = to_ini(config);
  nlohmann::ordered_json params = nlohmann::ordered_json::array();
  for (const auto& p : model.parameters()) {
    nlohmann::ordered_json jp;
    jp["name"] = p.name;
    jp["shape"] = p.value.shape();
    jp["data"] = std::vector<double>(p.value.data().begin(), p.value.data().end());
    params.push_back(std::move(jp));
  }
  j["parameters"] = std::move(params);
  write_file_atomic(path, j.dump() + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format").get<std::string>() != "hecto-checkpoint" || j.at("version").get<int>() != 1) {
      throw DataError("checkpoint " + path.string() + " has an unsupported format");
    }
    ExperimentConfig config = parse_ini(j.at("config").get<std::string>());
    Checkpoint ck{config, HectoModel(config.model, 0)};
    std::map<std::string, const nlohmann::json*> stored;
    for (const auto& jp : j.at("parameters")) stored[jp.at("name").get<std::string>()] = &jp;
    auto params = ck.model.parameters();
    if (stored.size() != params.size()) throw DataError("checkpoint parameter count does not match its config");
    for (auto& p : params) {
      auto it = stored.find(p.name);
      if (it == stored.end()) throw DataError("checkpoint is missing parameter " + p.name);
      const auto shape = it->second->at("shape").get<Shape>();
      const auto data = it->second->at("data").get<std::vector<double>>();
      if (shape != p.value.shape() || data.size() != p.value.size()) {
        throw DataError("checkpoint parameter " + p.name + " has shape " + shape_string(shape) + ", expected " +
                        shape_string(p.value.shape()));
      }
      Tensor t = p.value;
      std::copy(data.begin(), data.end(), t.data().begin());
    }
    ck.model.encoder().set_frozen(config.model.encoder.frozen);
    return ck;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace hecto
