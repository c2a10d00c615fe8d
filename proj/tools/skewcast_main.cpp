// Command-line front end: run simulations, build cascades, select models,
// and benchmark the system against its all-off baseline.

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "skewcast/backend.hpp"
#include "skewcast/error.hpp"
#include "skewcast/io.hpp"
#include "skewcast/model_bank.hpp"
#include "skewcast/perforation.hpp"
#include "skewcast/presets.hpp"
#include "skewcast/profiler.hpp"
#include "skewcast/scheduler.hpp"
#include "skewcast/stream_sim.hpp"

namespace {

using skewcast::Json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

struct CommonOptions {
  std::string preset;
  std::string stream_path;
  std::string bank_path;
  std::string backend_path;
  std::string out_dir;
  std::string seed_list = "1";
  double energy = -1.0;
  double time_s = -1.0;
  double fps = -1.0;
  double omega = -1.0;
  long long wmin = -1;
  double pir = -1.0;
  long long pih = -1;
  double delta = -1.0;
  double target = -1.0;
};

void add_common_flags(CLI::App* cmd, CommonOptions& opt, bool with_out) {
  cmd->add_option("--preset", opt.preset, "canned scenario: n10p09 or random");
  cmd->add_option("--stream", opt.stream_path, "stream spec JSON path");
  cmd->add_option("--bank", opt.bank_path, "model bank JSON path");
  cmd->add_option("--backend", opt.backend_path, "confusion backend config JSON path");
  if (with_out) cmd->add_option("--out", opt.out_dir, "output directory")->required();
  cmd->add_option("--seed", opt.seed_list, "seed, or comma list of seeds for bench");
  cmd->add_option("--energy", opt.energy, "initial energy budget in joules");
  cmd->add_option("--time", opt.time_s, "deployment span in seconds");
  cmd->add_option("--fps", opt.fps, "frame rate");
  cmd->add_option("--omega", opt.omega, "confidence bypass threshold");
  cmd->add_option("--wmin", opt.wmin, "detection window length in frames");
  cmd->add_option("--pir", opt.pir, "window distance threshold");
  cmd->add_option("--pih", opt.pih, "appearances before a skew runs hot");
  cmd->add_option("--delta", opt.delta, "selection accuracy tolerance");
  cmd->add_option("--target", opt.target, "selection target accuracy");
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    seeds.push_back(std::stoull(item));
  }
  if (seeds.empty()) throw skewcast::Error(skewcast::ErrorCode::ParseError, "no seeds given");
  return seeds;
}

struct ResolvedRun {
  skewcast::SimConfig sim;
  std::vector<skewcast::ModelProfile> bank_profiles;
  skewcast::BackendConfig backend;
  std::string scenario;
};

ResolvedRun resolve(const CommonOptions& opt, std::uint64_t seed) {
  ResolvedRun r;
  if (!opt.preset.empty()) {
    skewcast::Preset preset = skewcast::make_preset(opt.preset, seed);
    r.sim = preset.sim;
    r.bank_profiles = preset.bank_profiles;
    r.backend = preset.backend;
    r.scenario = preset.name;
  } else {
    if (opt.stream_path.empty()) {
      throw skewcast::Error(skewcast::ErrorCode::InvalidArgument,
                            "either --preset or --stream is required");
    }
    r.scenario = opt.stream_path;
    r.sim.stream = skewcast::load_stream(opt.stream_path);
    r.bank_profiles = opt.bank_path.empty() ? skewcast::toy_cascade_profiles()
                                            : skewcast::load_bank(opt.bank_path);
    if (!opt.backend_path.empty()) {
      r.backend = skewcast::backend_from_json(
          skewcast::io_detail::parse(skewcast::io_detail::read_file(opt.backend_path),
                                     opt.backend_path),
          opt.backend_path);
    } else {
      r.backend = skewcast::toy_backend_config(seed);
      for (const auto& p : r.bank_profiles) r.backend.base_accuracy[p.network_ref] = p.accuracy;
    }
    const double frames = static_cast<double>(r.sim.stream.total_frames());
    r.sim.budget.frame_rate = 1.0 / r.sim.stream.frame_interval;
    r.sim.budget.remaining_time = frames / r.sim.budget.frame_rate;
    r.sim.budget.remain_energy = 1.0 * frames;
    r.sim.profiler = skewcast::ProfilerConfig::defaults(r.sim.stream.universe);
    r.sim.rescale.train_priors = skewcast::uniform_distribution(r.sim.stream.universe);
  }
  r.sim.seed = seed;
  r.backend.seed = seed;
  if (opt.energy > 0) r.sim.budget.remain_energy = opt.energy;
  if (opt.time_s > 0) r.sim.budget.remaining_time = opt.time_s;
  if (opt.fps > 0) r.sim.budget.frame_rate = opt.fps;
  if (opt.omega > 0) r.sim.rescale.bypass_threshold = opt.omega;
  if (opt.wmin > 0) r.sim.profiler.w_min = static_cast<std::size_t>(opt.wmin);
  if (opt.pir >= 0) r.sim.profiler.pi_r = opt.pir;
  if (opt.pih > 0) r.sim.profiler.pi_h = static_cast<std::size_t>(opt.pih);
  if (opt.delta >= 0) r.sim.delta = opt.delta;
  if (opt.target > 0) r.sim.target_accuracy = opt.target;
  r.sim.profiler.validate();
  r.sim.rescale.validate();
  return r;
}

Json resolved_config_json(const ResolvedRun& r) {
  Json j;
  j["scenario"] = r.scenario;
  j["seed"] = r.sim.seed;
  j["stream"] = skewcast::stream_to_json(r.sim.stream);
  j["budget"] = Json{{"remain_energy", r.sim.budget.remain_energy},
                     {"remaining_time", r.sim.budget.remaining_time},
                     {"frame_rate", r.sim.budget.frame_rate},
                     {"energy_per_mac", r.sim.budget.energy_per_mac}};
  j["profiler"] = Json{{"w_min", r.sim.profiler.w_min},
                       {"pi_r", r.sim.profiler.pi_r},
                       {"dominance_threshold", r.sim.profiler.dominance_threshold},
                       {"change_fraction", r.sim.profiler.change_fraction},
                       {"pi_h", r.sim.profiler.pi_h},
                       {"smoothing", r.sim.profiler.smoothing}};
  j["rescale"] = Json{{"bypass_threshold", r.sim.rescale.bypass_threshold},
                      {"train_priors", "uniform"}};
  j["selection"] = Json{{"target_accuracy", r.sim.target_accuracy}, {"delta", r.sim.delta}};
  j["backend"] = skewcast::backend_to_json(r.backend);
  Json bank = Json::array();
  for (const auto& p : r.bank_profiles) bank.push_back(skewcast::profile_to_json(p));
  j["bank"] = bank;
  return j;
}

skewcast::RunReport execute(const ResolvedRun& r, const skewcast::EngineToggles& toggles) {
  skewcast::ModelBank bank;
  for (const auto& p : r.bank_profiles) bank.register_model(p);
  skewcast::ConfusionBackend backend(r.backend, r.sim.stream.universe);
  skewcast::SimConfig sim = r.sim;
  sim.toggles = toggles;
  return skewcast::run_end_to_end(sim, bank, backend);
}

int cmd_run(const CommonOptions& opt) {
  const auto seeds = parse_seeds(opt.seed_list);
  const ResolvedRun r = resolve(opt, seeds.front());
  const skewcast::RunReport report = execute(r, skewcast::EngineToggles{});

  std::filesystem::create_directories(opt.out_dir);
  const Json config = resolved_config_json(r);
  skewcast::io_detail::write_file(opt.out_dir + "/report.json",
                                  skewcast::report_to_json(report, config).dump(2) + "\n");
  skewcast::io_detail::write_file(opt.out_dir + "/report.csv", skewcast::report_to_csv(report));

  const auto& agg = report.aggregates;
  long long top_macs = 0, top_params = 0;
  double top_acc = -1.0;
  for (const auto& p : r.bank_profiles) {
    if (p.skew_key == "N/A" && p.accuracy > top_acc) {
      top_acc = p.accuracy;
      top_macs = p.macs;
      top_params = p.params;
    }
  }
  std::cout << "frames               " << agg.total_frames << "\n"
            << "accuracy             " << agg.accuracy << "\n"
            << "mean_macs_per_frame  " << agg.mean_macs_per_frame << "\n"
            << "macs_savings         "
            << (agg.mean_macs_per_frame > 0 ? static_cast<double>(top_macs) / agg.mean_macs_per_frame : 0.0)
            << "x\n"
            << "modal_model          " << agg.modal_model_id << "\n"
            << "params_savings       "
            << (agg.modal_model_params > 0 ? static_cast<double>(top_params) / static_cast<double>(agg.modal_model_params) : 1.0)
            << "x\n"
            << "skew_events          " << agg.skew_event_count << "\n"
            << "compiles             " << agg.compile_count << "\n"
            << "energy_spent         " << report.energy_spent << "\n";
  return kExitOk;
}

int cmd_bench(const CommonOptions& opt) {
  const auto seeds = parse_seeds(opt.seed_list);
  Json per_seed = Json::array();
  std::vector<double> deltas, savings;
  for (const auto seed : seeds) {
    const ResolvedRun r = resolve(opt, seed);
    skewcast::EngineToggles all_on;
    skewcast::EngineToggles all_off{false, false, false, false};
    const auto on = execute(r, all_on);
    const auto off = execute(r, all_off);
    const double delta = on.aggregates.accuracy - off.aggregates.accuracy;
    const double ratio = on.aggregates.mean_macs_per_frame > 0
                             ? off.aggregates.mean_macs_per_frame / on.aggregates.mean_macs_per_frame
                             : 0.0;
    deltas.push_back(delta);
    savings.push_back(ratio);
    per_seed.push_back(Json{{"seed", seed},
                            {"accuracy_on", on.aggregates.accuracy},
                            {"accuracy_off", off.aggregates.accuracy},
                            {"accuracy_delta", delta},
                            {"macs_on", on.aggregates.mean_macs_per_frame},
                            {"macs_off", off.aggregates.mean_macs_per_frame},
                            {"macs_savings", ratio},
                            {"skew_events", on.aggregates.skew_event_count},
                            {"compiles", on.aggregates.compile_count}});
  }
  auto mean = [](const std::vector<double>& v) {
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const auto [dmin, dmax] = std::minmax_element(deltas.begin(), deltas.end());
  const auto [smin, smax] = std::minmax_element(savings.begin(), savings.end());
  Json summary{{"mean_accuracy_delta", mean(deltas)}, {"min_accuracy_delta", *dmin},
               {"max_accuracy_delta", *dmax},         {"mean_macs_savings", mean(savings)},
               {"min_macs_savings", *smin},           {"max_macs_savings", *smax}};
  Json out{{"per_seed", per_seed}, {"summary", summary}};

  if (!opt.out_dir.empty()) {
    std::filesystem::create_directories(opt.out_dir);
    skewcast::io_detail::write_file(opt.out_dir + "/bench.json", out.dump(2) + "\n");
  }
  std::cout << std::left << std::setw(18) << "metric" << std::setw(12) << "mean"
            << std::setw(12) << "min" << std::setw(12) << "max" << "\n"
            << std::setw(18) << "accuracy_delta" << std::setw(12) << mean(deltas)
            << std::setw(12) << *dmin << std::setw(12) << *dmax << "\n"
            << std::setw(18) << "macs_savings" << std::setw(12) << mean(savings)
            << std::setw(12) << *smin << std::setw(12) << *smax << "\n";
  return kExitOk;
}

// Deterministic declared-importance oracle: every removable unit carries a
// small seeded penalty, so pruning order is stable and cascades are smooth.
double hash_oracle_accuracy(const skewcast::Network& net, const skewcast::MaskSet& mask,
                            std::uint64_t seed, double base) {
  double acc = base;
  auto penalty = [&](std::uint64_t tag, std::uint64_t a, std::uint64_t b) {
    const std::uint64_t h = skewcast::splitmix64(seed ^ (tag * 0x9e37ULL + a * 131 + b));
    return 0.002 + 0.02 * (static_cast<double>(h >> 11) * 0x1.0p-53);
  };
  for (std::size_t ci = 0; ci < mask.layer_on.size(); ++ci) {
    if (!mask.layer_on[ci]) acc -= penalty(1, ci, 0);
    for (std::size_t c = 0; c < mask.channel_keep[ci].size(); ++c) {
      if (mask.layer_on[ci] && !mask.channel_keep[ci][c]) acc -= penalty(2, ci, c);
    }
    for (std::size_t b = 1; b < mask.stride_boost[ci]; b *= 2) {
      if (mask.layer_on[ci]) acc -= penalty(3, ci, b);
    }
  }
  (void)net;
  return std::max(0.01, acc);
}

int cmd_compile(const std::string& network_path, const std::string& oracle_path,
                const std::string& bank_path) {
  const skewcast::Network net = skewcast::load_network(network_path);
  const Json oracle = skewcast::io_detail::parse(skewcast::io_detail::read_file(oracle_path),
                                                 oracle_path);
  const std::string type =
      skewcast::io_detail::field_or<std::string>(oracle, "type", oracle_path, "hash");
  skewcast::MaskEvaluator evaluator;
  if (type == "hash") {
    const auto seed = skewcast::io_detail::field_or<std::uint64_t>(oracle, "seed", oracle_path, 0);
    const auto base =
        skewcast::io_detail::field_or<double>(oracle, "base_accuracy", oracle_path, 0.9);
    evaluator = [seed, base](const skewcast::Network& n, const skewcast::MaskSet& m) {
      return hash_oracle_accuracy(n, m, seed, base);
    };
  } else if (type == "agreement") {
    const auto seed = skewcast::io_detail::field_or<std::uint64_t>(oracle, "seed", oracle_path, 0);
    const auto count =
        skewcast::io_detail::field_or<std::size_t>(oracle, "samples", oracle_path, 32);
    auto evalset = std::make_shared<skewcast::EvalSet>();
    const skewcast::MaskSet dense = skewcast::MaskSet::all_on(net);
    skewcast::HashRng rng(seed, 0xE7A1ULL);
    for (std::size_t i = 0; i < count; ++i) {
      skewcast::EvalSample s;
      s.input = skewcast::Tensor(net.input_shape);
      for (auto& v : s.input.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
      s.label = skewcast::argmax(skewcast::forward(net, dense, s.input));
      evalset->push_back(std::move(s));
    }
    evaluator = [evalset](const skewcast::Network& n, const skewcast::MaskSet& m) {
      return skewcast::evaluate(n, m, *evalset);
    };
  } else {
    throw skewcast::Error(skewcast::ErrorCode::ParseError,
                          oracle_path + ": field 'type' must be hash or agreement");
  }

  const auto snapshots = skewcast::greedy_prune(net, evaluator);
  const skewcast::Cascade cascade = skewcast::build_cascade(snapshots);
  skewcast::save_bank(bank_path, cascade.members);

  std::cout << "snapshot  macs  params  accuracy\n";
  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    std::cout << i << "  " << snapshots[i].macs << "  " << snapshots[i].params << "  "
              << snapshots[i].accuracy << "\n";
  }
  std::cout << "cascade_members " << cascade.members.size() << "\n";
  return kExitOk;
}

int cmd_select(const std::string& bank_path, const std::string& skew_text, double target,
               double delta, const std::string& backend_path, std::uint64_t seed) {
  const auto profiles = skewcast::load_bank(bank_path);
  std::vector<skewcast::ModelProfile> general;
  for (const auto& p : profiles) {
    if (p.skew_key == "N/A") general.push_back(p);
  }
  const skewcast::Cascade cascade = skewcast::make_cascade("N/A", general);

  skewcast::SkewEstimate skew;
  std::stringstream ss(skew_text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) skew.dominant.push_back(std::stoull(item));
  }
  std::sort(skew.dominant.begin(), skew.dominant.end());
  if (skew.dominant.empty()) {
    throw skewcast::Error(skewcast::ErrorCode::InvalidArgument, "--skew lists no classes");
  }

  skewcast::BackendConfig backend_cfg;
  if (!backend_path.empty()) {
    backend_cfg = skewcast::backend_from_json(
        skewcast::io_detail::parse(skewcast::io_detail::read_file(backend_path), backend_path),
        backend_path);
  } else {
    backend_cfg = skewcast::toy_backend_config(seed);
    for (const auto& p : profiles) backend_cfg.base_accuracy[p.network_ref] = p.accuracy;
  }
  const std::size_t universe =
      std::max<std::size_t>(skew.dominant.back() + 1, 2 * backend_cfg.ring_radius + 1);
  const skewcast::ConfusionBackend backend(backend_cfg, universe);

  const auto result = skewcast::binary_search_select(
      cascade, target, delta, [&](std::size_t i) {
        return backend.accuracy_of(cascade.members[i], &skew.dominant);
      });
  std::cout << "chosen_model      " << result.profile.id << "\n"
            << "macs              " << result.profile.macs << "\n"
            << "params            " << result.profile.params << "\n"
            << "measured_accuracy " << result.measured_accuracy << "\n"
            << "evaluator_calls   " << result.evaluator_calls << "\n";
  if (!result.target_met) std::cout << "target unmet\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"class-skew-aware stream classification engine"};
  app.require_subcommand(1);

  CommonOptions run_opt;
  auto* run = app.add_subcommand("run", "simulate one stream end to end");
  add_common_flags(run, run_opt, true);

  CommonOptions bench_opt;
  auto* bench = app.add_subcommand("bench", "paired on/off comparison across seeds");
  add_common_flags(bench, bench_opt, false);
  bench->add_option("--out", bench_opt.out_dir, "output directory for bench.json");

  std::string net_path, oracle_path, compile_bank_path;
  auto* compile = app.add_subcommand("compile", "prune a network into a cascade bank");
  compile->add_option("--network", net_path, "network container path")->required();
  compile->add_option("--oracle", oracle_path, "evaluator config JSON path")->required();
  compile->add_option("--bank", compile_bank_path, "output bank JSON path")->required();

  std::string sel_bank, sel_skew, sel_backend, sel_seed = "1";
  double sel_target = 0.7, sel_delta = 0.02;
  auto* select = app.add_subcommand("select", "pick the cheapest member meeting a target");
  select->add_option("--bank", sel_bank, "bank JSON path")->required();
  select->add_option("--skew", sel_skew, "comma list of dominant class ids")->required();
  select->add_option("--target", sel_target, "target accuracy");
  select->add_option("--delta", sel_delta, "accuracy tolerance");
  select->add_option("--backend", sel_backend, "confusion backend config JSON path");
  select->add_option("--seed", sel_seed, "seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_opt);
    if (bench->parsed()) return cmd_bench(bench_opt);
    if (compile->parsed()) return cmd_compile(net_path, oracle_path, compile_bank_path);
    if (select->parsed()) {
      return cmd_select(sel_bank, sel_skew, sel_target, sel_delta, sel_backend,
                        std::stoull(sel_seed));
    }
  } catch (const skewcast::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    const auto code = e.code();
    const bool usage = code == skewcast::ErrorCode::ParseError ||
                       code == skewcast::ErrorCode::IoError ||
                       code == skewcast::ErrorCode::InvalidArgument;
    return usage ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}
