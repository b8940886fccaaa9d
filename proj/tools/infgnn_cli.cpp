#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "infgnn/checkpoint.hpp"
#include "infgnn/config_io.hpp"
#include "infgnn/continual.hpp"
#include "infgnn/dataset_io.hpp"
#include "infgnn/errors.hpp"
#include "infgnn/eval.hpp"
#include "infgnn/synth.hpp"

#ifndef INFGNN_VERSION
#define INFGNN_VERSION "unknown"
#endif

namespace fs = std::filesystem;
using nlohmann::json;
using namespace infgnn;

namespace {

enum ExitCode { kOk = 0, kIoError = 1, kValidation = 2, kNumerical = 3 };

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_json(const fs::path& file, const json& j) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out << j.dump(2) << '\n';
}

// <stem>.json, then <stem>.1.json, <stem>.2.json, ... on reruns.
fs::path next_manifest_path(const fs::path& out, const std::string& stem) {
  fs::path p = out / (stem + ".json");
  for (int n = 1; fs::exists(p); ++n) p = out / (stem + "." + std::to_string(n) + ".json");
  return p;
}

struct RunManifest {
  std::string command;
  std::vector<std::string> argv;
  json config;
  std::uint64_t seed = 0;
  std::string dataset_hash;
  std::vector<std::string> outputs;
  std::string started = utc_now();
  std::chrono::steady_clock::time_point clock = std::chrono::steady_clock::now();

  void write(const fs::path& out, const std::string& stem = "manifest") const {
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - clock).count();
    json j = {{"command", command},    {"argv", argv},
              {"config", config},      {"seed", seed},
              {"code_version", INFGNN_VERSION},
              {"dataset_hash", dataset_hash},
              {"outputs", outputs},    {"started_utc", started},
              {"wall_clock_seconds", seconds}};
    fs::create_directories(out);
    write_json(next_manifest_path(out, stem), j);
  }
};

std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex << v;
  return os.str();
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Arm {
  std::string name;  // empty for a single default arm
  TrainConfig cfg;
};

json normalizer_json(const Normalizer& n) { return {{"mean", n.mean}, {"scale", n.scale}}; }

Normalizer normalizer_from_json(const json& j) {
  Normalizer n;
  n.mean = j.at("mean").get<std::vector<double>>();
  n.scale = j.at("scale").get<std::vector<double>>();
  return n;
}

void write_buffer_history(const fs::path& file, const DynamicGraphSequence& seq,
                          const std::vector<IntervalLog>& logs, int epochs) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + file.string());
  out.precision(17);
  out << "epoch,timestamp,score\n";
  auto position_of = [&](int interval) {
    for (std::size_t p = 0; p < seq.size(); ++p) {
      if (seq[p].graph.interval_index() == interval) return p;
    }
    throw LookupError("interval " + std::to_string(interval) + " not in sequence");
  };
  for (std::size_t p = 0; p < logs.size(); ++p) {
    for (const BufferHistoryRow& r : logs[p].buffer_history) {
      const std::size_t pos = position_of(static_cast<int>(r.timestamp_id >> 32));
      const std::uint64_t anchor = r.timestamp_id & 0xffffffffULL;
      const std::uint64_t global = pos * seq.steps() + anchor;
      out << p * static_cast<std::size_t>(epochs) + static_cast<std::size_t>(r.epoch) << ','
          << global << ',' << r.score << '\n';
    }
  }
}

// ---------------------------------------------------------------------------

int cmd_generate(const std::string& config_path, std::uint64_t seed, const fs::path& out,
                 bool binary, const std::vector<std::string>& argv) {
  RunManifest manifest{"generate", argv};
  const SynthConfig cfg = config_path.empty() ? SynthConfig{} : load_synth_config(config_path);
  manifest.config = to_json(cfg);
  manifest.seed = seed;
  const SyntheticDataset data = generate_synthetic_drift(cfg, seed);
  fs::create_directories(out);
  write_dataset(data.sequence, out, binary ? FeatureFormat::binary : FeatureFormat::csv);
  write_ground_truth(data, out / "ground_truth.json");
  manifest.dataset_hash = hex(hash_directory(out));
  manifest.outputs = {(out / "manifest.json").string(), (out / "ground_truth.json").string()};
  for (std::size_t p = 0; p < data.sequence.size(); ++p) {
    manifest.outputs.push_back(
        (out / ("t" + std::to_string(data.sequence[p].graph.interval_index()))).string());
  }
  // manifest.json in a dataset directory is the dataset manifest, so the
  // run manifest takes its own name there.
  manifest.write(out, "run_manifest");
  std::cout << "wrote " << data.sequence.size() << " intervals, " << data.stable.size()
            << " stable nodes to " << out.string() << '\n';
  return kOk;
}

int run_arms(const fs::path& dataset, const std::vector<Arm>& arms, const fs::path& out,
             RunManifest& manifest, const std::string& baseline, std::size_t knn_k) {
  const DynamicGraphSequence seq = load_dataset(dataset);
  manifest.dataset_hash = hex(hash_directory(dataset));
  fs::create_directories(out);
  const fs::path metrics = out / "metrics.csv";
  manifest.outputs.push_back(metrics.string());
  std::vector<MetricRecord> all;

  for (const Arm& arm : arms) {
    const fs::path dir = arm.name.empty() ? out : out / arm.name;
    fs::create_directories(dir);
    std::vector<MetricRecord> records;
    if (!baseline.empty()) {
      records = run_baseline(baseline_from_string(baseline), seq, arm.cfg, knn_k);
    } else {
      auto on_interval = [&](std::size_t pos, const IntervalOutcome& o) {
        const fs::path tdir = dir / ("t" + std::to_string(seq[pos].graph.interval_index()));
        fs::create_directories(tdir);
        write_checkpoint(tdir / "checkpoint.bin", o.state,
                         {{"interval", o.log.interval},
                          {"normalizer", normalizer_json(o.normalizer)},
                          {"train_config", to_json(arm.cfg)}});
        manifest.outputs.push_back((tdir / "checkpoint.bin").string());
        if (o.log.ri) {
          write_ri_scores(*o.log.ri, tdir / "ri_scores.csv");
          manifest.outputs.push_back((tdir / "ri_scores.csv").string());
        }
        std::cerr << "[" << (arm.name.empty() ? arm.cfg.model_tag : arm.name) << "] interval "
                  << o.log.interval << ": " << o.log.train_nodes << " training nodes, "
                  << o.log.train_windows << " windows, final loss " << o.log.final_loss << '\n';
      };
      const ContinualResult result = run_continual(seq, arm.cfg, on_interval);
      write_buffer_history(dir / "buffer_history.csv", seq, result.logs, arm.cfg.epochs);
      manifest.outputs.push_back((dir / "buffer_history.csv").string());
      records = result.records;
    }
    append_metrics_csv(records, metrics);
    all.insert(all.end(), records.begin(), records.end());
  }
  const std::string table = summary_table(all);
  std::ofstream(out / "summary.txt") << table;
  manifest.outputs.push_back((out / "summary.txt").string());
  std::cout << table;
  return kOk;
}

int cmd_train(const fs::path& dataset, const std::string& config_path, const fs::path& out,
              std::optional<std::uint64_t> seed, const std::string& ablation,
              const std::string& sweep, const std::string& baseline, std::size_t knn_k,
              const std::vector<std::string>& argv) {
  RunManifest manifest{baseline.empty() ? "train" : "baseline", argv};
  TrainConfig cfg = config_path.empty() ? TrainConfig{} : load_train_config(config_path);
  if (seed) cfg.seed = *seed;
  manifest.seed = cfg.seed;
  if (config_path.empty()) std::cout << "no --config given, using defaults:\n";
  std::cout << to_json(cfg).dump(2) << '\n';

  std::vector<Arm> arms;
  const std::vector<std::string> tags = split(ablation, ',');
  if (tags.empty()) {
    arms.push_back({"", cfg});
  } else {
    for (const std::string& tag : tags) {
      arms.push_back({tags.size() > 1 ? tag : "", apply_ablation(cfg, tag)});
    }
  }
  if (!sweep.empty()) {
    const auto eq = sweep.find('=');
    if (eq == std::string::npos) throw ConfigError("--sweep expects <param>=<v1,v2,...>");
    const std::string param = sweep.substr(0, eq);
    const std::vector<std::string> values = split(sweep.substr(eq + 1), ',');
    if (values.empty()) throw ConfigError("--sweep has no values");
    std::vector<Arm> swept;
    for (const Arm& a : arms) {
      for (const std::string& v : values) {
        Arm s = a;
        set_config_value(s.cfg, param, v);
        s.cfg.model_tag = a.cfg.model_tag + "[" + param + "=" + v + "]";
        s.name = (a.name.empty() ? "" : a.name + "_") + param + "=" + v;
        swept.push_back(std::move(s));
      }
    }
    arms = std::move(swept);
  }
  if (!baseline.empty()) {
    for (Arm& a : arms) a.cfg.model_tag = baseline;
  }
  json arm_configs = json::array();
  for (const Arm& a : arms) arm_configs.push_back({{"arm", a.name}, {"config", to_json(a.cfg)}});
  manifest.config = {{"base", to_json(cfg)},
                     {"ablation", ablation},
                     {"sweep", sweep},
                     {"baseline", baseline},
                     {"arms", arm_configs}};

  const int code = run_arms(dataset, arms, out, manifest, baseline, knn_k);
  manifest.write(out);
  return code;
}

int cmd_evaluate(const fs::path& checkpoint, const fs::path& dataset, int interval,
                 const fs::path& out, const std::vector<std::string>& argv) {
  RunManifest manifest{"evaluate", argv};
  const LoadedCheckpoint ck = read_checkpoint(checkpoint);
  const DynamicGraphSequence seq = load_dataset(dataset);
  manifest.dataset_hash = hex(hash_directory(dataset));

  TrainConfig cfg;
  if (ck.extra.contains("train_config")) cfg = train_config_from_json(ck.extra["train_config"]);
  if (!ck.extra.contains("normalizer")) {
    throw FormatError(checkpoint.string() + ": checkpoint carries no normalizer");
  }
  const Normalizer norm = normalizer_from_json(ck.extra["normalizer"]);
  manifest.config = to_json(cfg);
  manifest.seed = cfg.seed;
  if (ck.state.config.features != seq.features() || norm.mean.size() != seq.features()) {
    throw ValidationError("checkpoint expects " + std::to_string(ck.state.config.features) +
                          " features, dataset has " + std::to_string(seq.features()));
  }
  if (ck.state.config.input_steps != cfg.input_steps || ck.state.config.horizon != cfg.horizon) {
    cfg.input_steps = ck.state.config.input_steps;
    cfg.horizon = ck.state.config.horizon;
  }
  std::size_t pos = seq.size();
  for (std::size_t p = 0; p < seq.size(); ++p) {
    if (seq[p].graph.interval_index() == interval) pos = p;
  }
  if (pos == seq.size()) throw ArgumentError("interval " + std::to_string(interval) + " not in dataset");
  if (pos + 1 >= seq.size()) {
    throw ArgumentError("interval " + std::to_string(interval) + " has no following test interval");
  }
  const auto records = evaluate_interval(ck.state, norm, seq[pos], seq[pos + 1], cfg);
  fs::create_directories(out);
  append_metrics_csv(records, out / "metrics.csv");
  manifest.outputs = {(out / "metrics.csv").string()};
  std::cout << summary_table(records);
  manifest.write(out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  CLI::App app{"INF-GNN continual spatio-temporal forecasting"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("generate", "Write a synthetic drift dataset");
  std::string gen_config;
  std::uint64_t gen_seed = 0;
  std::string gen_out;
  bool gen_binary = false;
  gen->add_option("--config", gen_config, "Generator config (JSON)");
  gen->add_option("--seed", gen_seed, "Random seed");
  gen->add_option("--out", gen_out, "Output dataset directory")->required();
  gen->add_flag("--binary", gen_binary, "Write features.bin instead of features.csv");

  auto* train = app.add_subcommand("train", "Continual training and evaluation");
  std::string tr_dataset, tr_config, tr_out, tr_ablation, tr_sweep, tr_baseline;
  std::optional<std::uint64_t> tr_seed;
  std::size_t knn_k = 3;
  train->add_option("--dataset", tr_dataset, "Dataset directory")->required();
  train->add_option("--config", tr_config, "Training config (JSON)");
  train->add_option("--out", tr_out, "Output directory")->required();
  train->add_option("--seed", tr_seed, "Override the config seed");
  train->add_option("--ablation", tr_ablation,
                    "Ablation tag(s), comma separated: full, wo_sg, wo_ifg, wo_mb, wo_ifs, "
                    "wo_ris, wo_ewc, trafficstream_like");
  train->add_option("--sweep", tr_sweep, "<param>=<v1,v2,...>");
  train->add_option("--baseline", tr_baseline, "retrain, expand or knn_kriging");
  train->add_option("--knn-k", knn_k, "Neighbours for knn_kriging")->check(CLI::PositiveNumber);

  auto* eval = app.add_subcommand("evaluate", "Evaluate a checkpoint on the next interval");
  std::string ev_checkpoint, ev_dataset, ev_out = ".";
  int ev_interval = 0;
  eval->add_option("--checkpoint", ev_checkpoint, "Checkpoint file")->required();
  eval->add_option("--dataset", ev_dataset, "Dataset directory")->required();
  eval->add_option("--interval", ev_interval, "Training interval index t (tests on t+1)")
      ->required();
  eval->add_option("--out", ev_out, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }

  try {
    if (*gen) return cmd_generate(gen_config, gen_seed, gen_out, gen_binary, args);
    if (*train) {
      return cmd_train(tr_dataset, tr_config, tr_out, tr_seed, tr_ablation, tr_sweep,
                       tr_baseline, knn_k, args);
    }
    if (*eval) return cmd_evaluate(ev_checkpoint, ev_dataset, ev_interval, ev_out, args);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << '\n';
    return kValidation;
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::logic_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIoError;
  }
  return kOk;
}
