#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "skewcast/backend.hpp"
#include "skewcast/error.hpp"
#include "skewcast/model_bank.hpp"
#include "skewcast/scheduler.hpp"
#include "skewcast/stream_sim.hpp"

namespace skewcast {

/// Five-member general ladder used by the canned scenarios. Costs span a
/// 10.6x range so budget pressure and compilation both have room to act.
inline std::vector<ModelProfile> toy_cascade_profiles() {
  auto make = [](const char* id, long long params, long long macs, double acc) {
    ModelProfile p;
    p.id = id;
    p.kind = ModelKind::General;
    p.skew_key = "N/A";
    p.params = params;
    p.macs = macs;
    p.accuracy = acc;
    p.network_ref = id;
    return p;
  };
  return {
      make("gen-xs", 100'000, 24'900'000, 0.40),
      make("gen-s", 260'000, 63'260'000, 0.50),
      make("gen-m", 360'000, 73'450'000, 0.58),
      make("gen-l", 620'000, 139'490'000, 0.65),
      make("gen-xl", 1'120'000, 264'850'000, 0.70),
  };
}

inline BackendConfig toy_backend_config(std::uint64_t seed) {
  BackendConfig c;
  for (const auto& p : toy_cascade_profiles()) c.base_accuracy[p.network_ref] = p.accuracy;
  c.difficulty_weight = 1.0;
  c.accuracy_cap = 0.93;
  c.seed = seed;
  return c;
}

struct Preset {
  std::string name;
  SimConfig sim;
  std::vector<ModelProfile> bank_profiles;
  BackendConfig backend;
};

/// Recurring ten-class skew at p=0.9: six ten-minute segments sharing one
/// seeded dominant set, so the skew turns hot and gets compiled mid-run.
/// The energy budget (0.8 J/frame at 1e-8 J/MAC) admits the mid model while
/// detecting, which leaves headroom for the compiled pick to save compute.
inline Preset preset_n10p09(std::uint64_t seed) {
  Preset preset;
  preset.name = "n10p09";
  preset.bank_profiles = toy_cascade_profiles();
  preset.backend = toy_backend_config(seed);

  StreamSpec stream;
  stream.universe = 100;
  stream.frame_interval = 1.0 / 3.0;
  SegmentSpec proto;
  proto.n_dominant = 10;
  proto.p = 0.9;
  proto.duration_frames = 1800;
  proto.seed = seed;
  const auto shared_set = segment_dominants(proto, stream.universe, seed);
  for (int s = 0; s < 6; ++s) {
    SegmentSpec seg = proto;
    seg.dominant_classes = shared_set;
    stream.segments.push_back(seg);
  }
  preset.sim.stream = stream;

  const double frames = static_cast<double>(stream.total_frames());
  preset.sim.budget.frame_rate = 1.0 / stream.frame_interval;
  preset.sim.budget.remaining_time = frames / preset.sim.budget.frame_rate;
  preset.sim.budget.energy_per_mac = 1e-8;
  preset.sim.budget.remain_energy = 0.8 * frames;

  preset.sim.profiler = ProfilerConfig::defaults(stream.universe);
  preset.sim.profiler.pi_r = 8.0;  // prediction windows of a 10-class mix need slack
  preset.sim.rescale.train_priors = uniform_distribution(stream.universe);
  preset.sim.target_accuracy = 0.70;
  preset.sim.delta = 0.02;
  preset.sim.seed = seed;
  return preset;
}

/// Uniform stream over the whole universe: nothing to detect, nothing to
/// save. Useful as the inertness control.
inline Preset preset_random(std::uint64_t seed) {
  Preset preset;
  preset.name = "random";
  preset.bank_profiles = toy_cascade_profiles();
  preset.backend = toy_backend_config(seed);

  StreamSpec stream;
  stream.universe = 100;
  stream.frame_interval = 1.0 / 3.0;
  SegmentSpec seg;
  seg.n_dominant = stream.universe;
  seg.p = 1.0;
  seg.duration_frames = 1800;
  seg.seed = seed;
  stream.segments.push_back(seg);
  preset.sim.stream = stream;

  const double frames = static_cast<double>(stream.total_frames());
  preset.sim.budget.frame_rate = 1.0 / stream.frame_interval;
  preset.sim.budget.remaining_time = frames / preset.sim.budget.frame_rate;
  preset.sim.budget.energy_per_mac = 1e-8;
  preset.sim.budget.remain_energy = 3.0 * frames;

  preset.sim.profiler = ProfilerConfig::defaults(stream.universe);
  preset.sim.profiler.pi_r = 8.0;
  preset.sim.rescale.train_priors = uniform_distribution(stream.universe);
  preset.sim.target_accuracy = 0.70;
  preset.sim.delta = 0.02;
  preset.sim.seed = seed;
  return preset;
}

inline Preset make_preset(const std::string& name, std::uint64_t seed) {
  if (name == "n10p09") return preset_n10p09(seed);
  if (name == "random") return preset_random(seed);
  throw Error(ErrorCode::InvalidArgument, "unknown preset '" + name + "' (try n10p09 or random)");
}

}  // namespace skewcast
