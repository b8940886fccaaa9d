#include "infgnn/config_io.hpp"

#include <fstream>
#include <functional>
#include <map>

#include "infgnn/errors.hpp"

namespace infgnn {

using nlohmann::json;

std::string to_string(HessianSetting h) {
  return h == HessianSetting::exact ? "exact" : "diagonal";
}

std::string to_string(BufferRanking r) {
  return r == BufferRanking::magnitude ? "magnitude" : "signed";
}

namespace {

HessianSetting hessian_from_string(const std::string& s) {
  if (s == "exact") return HessianSetting::exact;
  if (s == "diagonal") return HessianSetting::diagonal;
  throw ConfigError("hessian: expected exact or diagonal, got '" + s + "'");
}

BufferRanking ranking_from_string(const std::string& s) {
  if (s == "signed") return BufferRanking::signed_descending;
  if (s == "magnitude") return BufferRanking::magnitude;
  throw ConfigError("ranking: expected signed or magnitude, got '" + s + "'");
}

template <class Cfg>
using Setter = std::function<void(Cfg&, const json&)>;

template <class T>
T get_as(const json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError("");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.get<long long>() < 0) throw ConfigError("");
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError("");
    } else {
      if (!v.is_string()) throw ConfigError("");
    }
    return v.get<T>();
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "' has a value of the wrong type: " + v.dump());
  }
}

#define FIELD(name) \
  {#name, [](auto& c, const json& v) { c.name = get_as<decltype(c.name)>(v, #name); }}

const std::map<std::string, Setter<TrainConfig>>& train_setters() {
  static const std::map<std::string, Setter<TrainConfig>> table = {
      FIELD(input_steps), FIELD(horizon), FIELD(hidden1), FIELD(hidden2), FIELD(conv_width),
      {"adjacency",
       [](TrainConfig& c, const json& v) {
         c.adjacency = adjacency_mode_from_string(get_as<std::string>(v, "adjacency"));
       }},
      FIELD(epochs), FIELD(pseudo_epochs), FIELD(batch_size), FIELD(lr), FIELD(buffer_capacity),
      FIELD(memory_fraction), FIELD(sim_set_size),
      {"hessian",
       [](TrainConfig& c, const json& v) {
         c.hessian = hessian_from_string(get_as<std::string>(v, "hessian"));
       }},
      FIELD(damping), FIELD(exact_parameter_cap),
      {"ranking",
       [](TrainConfig& c, const json& v) {
         c.ranking = ranking_from_string(get_as<std::string>(v, "ranking"));
       }},
      FIELD(subgraph_fraction), FIELD(k_hop), FIELD(lambda_ewc), FIELD(lambda_ris),
      FIELD(fisher_samples), FIELD(fisher_full_graph), FIELD(ri_block_windows), FIELD(ri_blocks),
      FIELD(train_fraction), FIELD(test_fraction), FIELD(mape_floor), FIELD(seed),
      FIELD(model_tag), FIELD(use_subgraph), FIELD(informative_subgraph), FIELD(use_buffer),
      FIELD(informative_buffer), FIELD(use_ris), FIELD(use_ewc),
  };
  return table;
}

const std::map<std::string, Setter<SynthConfig>>& synth_setters() {
  static const std::map<std::string, Setter<SynthConfig>> table = {
      FIELD(intervals), FIELD(initial_nodes), FIELD(growth), FIELD(removals), FIELD(steps),
      FIELD(features), FIELD(period), FIELD(drift_strength), FIELD(stable_fraction),
      FIELD(attach_degree),
  };
  return table;
}

#undef FIELD

template <class Cfg>
Cfg apply_json(const json& j, Cfg base, const std::map<std::string, Setter<Cfg>>& setters) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(base, value);
  }
  return base;
}

json read_json_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot read config file " + file.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + file.string() + " is not valid JSON: " + e.what());
  }
}

}  // namespace

json to_json(const TrainConfig& c) {
  return {
      {"input_steps", c.input_steps},
      {"horizon", c.horizon},
      {"hidden1", c.hidden1},
      {"hidden2", c.hidden2},
      {"conv_width", c.conv_width},
      {"adjacency", to_string(c.adjacency)},
      {"epochs", c.epochs},
      {"pseudo_epochs", c.pseudo_epochs},
      {"batch_size", c.batch_size},
      {"lr", c.lr},
      {"buffer_capacity", c.buffer_capacity},
      {"memory_fraction", c.memory_fraction},
      {"sim_set_size", c.sim_set_size},
      {"hessian", to_string(c.hessian)},
      {"damping", c.damping},
      {"exact_parameter_cap", c.exact_parameter_cap},
      {"ranking", to_string(c.ranking)},
      {"subgraph_fraction", c.subgraph_fraction},
      {"k_hop", c.k_hop},
      {"lambda_ewc", c.lambda_ewc},
      {"lambda_ris", c.lambda_ris},
      {"fisher_samples", c.fisher_samples},
      {"fisher_full_graph", c.fisher_full_graph},
      {"ri_block_windows", c.ri_block_windows},
      {"ri_blocks", c.ri_blocks},
      {"train_fraction", c.train_fraction},
      {"test_fraction", c.test_fraction},
      {"mape_floor", c.mape_floor},
      {"seed", c.seed},
      {"model_tag", c.model_tag},
      {"use_subgraph", c.use_subgraph},
      {"informative_subgraph", c.informative_subgraph},
      {"use_buffer", c.use_buffer},
      {"informative_buffer", c.informative_buffer},
      {"use_ris", c.use_ris},
      {"use_ewc", c.use_ewc},
  };
}

TrainConfig train_config_from_json(const json& j, TrainConfig base) {
  TrainConfig cfg = apply_json(j, std::move(base), train_setters());
  cfg.validate();
  return cfg;
}

TrainConfig load_train_config(const std::filesystem::path& file) {
  return train_config_from_json(read_json_file(file));
}

json to_json(const SynthConfig& c) {
  return {
      {"intervals", c.intervals},
      {"initial_nodes", c.initial_nodes},
      {"growth", c.growth},
      {"removals", c.removals},
      {"steps", c.steps},
      {"features", c.features},
      {"period", c.period},
      {"drift_strength", c.drift_strength},
      {"stable_fraction", c.stable_fraction},
      {"attach_degree", c.attach_degree},
  };
}

SynthConfig synth_config_from_json(const json& j, SynthConfig base) {
  return apply_json(j, std::move(base), synth_setters());
}

SynthConfig load_synth_config(const std::filesystem::path& file) {
  return synth_config_from_json(read_json_file(file));
}

void set_config_value(TrainConfig& cfg, const std::string& key, const std::string& text) {
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception&) {
    value = text;  // bare words such as exact or symmetric
  }
  cfg = train_config_from_json(json{{key, value}}, cfg);
}

}  // namespace infgnn
