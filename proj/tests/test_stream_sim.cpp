#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "skewcast/io.hpp"
#include "skewcast/presets.hpp"
#include "skewcast/stream_sim.hpp"

using namespace skewcast;

namespace {

bool is_skew_model(const std::string& id) { return id.rfind("skew-", 0) == 0; }

bool same_frames(const std::vector<StreamFrame>& a, const std::vector<StreamFrame>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].index != b[i].index || a[i].label != b[i].label || a[i].segment != b[i].segment) {
      return false;
    }
  }
  return true;
}

/// Four repeats of one three-class skew, sized so the skew turns hot and a
/// specialist gets compiled at the third segment boundary.
SimConfig skewed_scenario(std::uint64_t seed) {
  SimConfig config;
  config.stream.universe = 30;
  config.stream.frame_interval = 1.0 / 3.0;
  for (int s = 0; s < 4; ++s) {
    SegmentSpec seg;
    seg.n_dominant = 3;
    seg.p = 0.95;
    seg.duration_frames = 240;
    seg.dominant_classes = {3, 9, 15};
    config.stream.segments.push_back(seg);
  }
  const double frames = static_cast<double>(config.stream.total_frames());
  config.budget.frame_rate = 3.0;
  config.budget.remaining_time = frames / config.budget.frame_rate;
  config.budget.energy_per_mac = 1e-8;
  config.budget.remain_energy = 3.0 * frames;
  config.profiler = ProfilerConfig::defaults(config.stream.universe);
  config.profiler.pi_r = 8.0;
  config.profiler.dominance_threshold = 0.10;
  config.rescale.train_priors = uniform_distribution(config.stream.universe);
  config.seed = seed;
  return config;
}

RunReport run_scenario(const SimConfig& config, std::uint64_t backend_seed,
                       const EngineToggles* toggles = nullptr) {
  SimConfig local = config;
  if (toggles) local.toggles = *toggles;
  ModelBank bank;
  for (const auto& p : toy_cascade_profiles()) bank.register_model(p);
  auto backend_config = toy_backend_config(backend_seed);
  ConfusionBackend backend(backend_config, local.stream.universe);
  return run_end_to_end(local, bank, backend);
}

}  // namespace

TEST_CASE("explicit dominant lists come back sorted, seeded draws are stable") {
  SegmentSpec seg;
  seg.n_dominant = 3;
  seg.dominant_classes = {30, 10, 20};
  REQUIRE(segment_dominants(seg, 100, 7) == std::vector<std::size_t>{10, 20, 30});

  SegmentSpec drawn;
  drawn.n_dominant = 10;
  drawn.seed = 4;
  const auto a = segment_dominants(drawn, 100, 7);
  const auto b = segment_dominants(drawn, 100, 7);
  REQUIRE(a == b);
  REQUIRE(a.size() == 10);
  REQUIRE(std::is_sorted(a.begin(), a.end()));
  REQUIRE(std::set<std::size_t>(a.begin(), a.end()).size() == 10);
  for (std::size_t c : a) REQUIRE(c < 100);

  const auto other_stream = segment_dominants(drawn, 100, 8);
  REQUIRE(a != other_stream);
}

TEST_CASE("stream specs reject malformed segments") {
  StreamSpec spec;
  REQUIRE_THROWS_AS(spec.validate(), Error);  // no segments

  spec.universe = 10;
  SegmentSpec seg;
  seg.n_dominant = 2;
  seg.duration_frames = 5;
  spec.segments.push_back(seg);
  REQUIRE_NOTHROW(spec.validate());

  spec.segments[0].p = 0.0;
  REQUIRE_THROWS_AS(spec.validate(), Error);
  spec.segments[0].p = 0.9;
  spec.segments[0].n_dominant = 11;
  REQUIRE_THROWS_AS(spec.validate(), Error);
  spec.segments[0].n_dominant = 2;
  spec.segments[0].dominant_classes = {1, 2, 3};
  REQUIRE_THROWS_AS(spec.validate(), Error);
  spec.segments[0].dominant_classes = {1, 10};
  REQUIRE_THROWS_AS(spec.validate(), Error);
  spec.segments[0].dominant_classes = {1, 2};
  REQUIRE_NOTHROW(spec.validate());
  spec.frame_interval = 0.0;
  REQUIRE_THROWS_AS(spec.validate(), Error);
}

TEST_CASE("generated streams are deterministic and respect the dominant mass") {
  StreamSpec spec;
  spec.universe = 100;
  SegmentSpec seg;
  seg.n_dominant = 10;
  seg.p = 0.9;
  seg.duration_frames = 10000;
  seg.seed = 3;
  spec.segments.push_back(seg);

  const auto frames = generate_stream(spec, 17);
  REQUIRE(same_frames(frames, generate_stream(spec, 17)));
  REQUIRE(frames.size() == 10000);

  const auto dominants = segment_dominants(seg, spec.universe, 17);
  std::size_t in_set = 0;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    REQUIRE(frames[i].index == i);
    REQUIRE(frames[i].segment == 0);
    REQUIRE(frames[i].label < 100);
    if (std::binary_search(dominants.begin(), dominants.end(), frames[i].label)) ++in_set;
  }
  const double mass = static_cast<double>(in_set) / 10000.0;
  REQUIRE(mass > 0.88);
  REQUIRE(mass < 0.92);

  // different stream seed, different labels
  REQUIRE_FALSE(same_frames(frames, generate_stream(spec, 18)));
}

TEST_CASE("segment indices advance with the segment list") {
  StreamSpec spec;
  spec.universe = 10;
  for (std::size_t s = 0; s < 3; ++s) {
    SegmentSpec seg;
    seg.n_dominant = 1;
    seg.dominant_classes = {s};
    seg.duration_frames = 50;
    spec.segments.push_back(seg);
  }
  const auto frames = generate_stream(spec, 1);
  REQUIRE(frames.size() == 150);
  for (const auto& f : frames) {
    REQUIRE(f.segment == f.index / 50);
    if (spec.segments[f.segment].p == 1.0) REQUIRE(f.label == f.segment);
  }
}

TEST_CASE("metrics recount the per-frame records") {
  RunReport report;
  auto add = [&](std::string id, long long macs, std::size_t truth, std::size_t pred) {
    FrameRecord f;
    f.frame = report.frames.size();
    f.true_label = truth;
    f.predicted = pred;
    f.model_id = std::move(id);
    f.macs = macs;
    report.frames.push_back(f);
  };
  add("b", 100, 1, 1);
  add("b", 100, 2, 2);
  add("a", 300, 3, 3);
  add("a", 300, 4, 0);
  report.skew_events.push_back({0, SkewEventKind::Detected, "1"});
  const auto agg = compute_metrics(report);
  REQUIRE(agg.total_frames == 4);
  REQUIRE(agg.accuracy == 0.75);
  REQUIRE(agg.mean_macs_per_frame == 200.0);
  REQUIRE(agg.modal_model_id == "a");  // tie resolves to the first id in order
  REQUIRE(agg.skew_event_count == 1);
  REQUIRE(agg.compile_count == 0);

  RunReport empty;
  REQUIRE_THROWS_AS(compute_metrics(empty), Error);
}

TEST_CASE("a recurring skew is detected, compiled at a charging window, then scheduled") {
  const auto config = skewed_scenario(11);
  const auto report = run_scenario(config, 11);

  REQUIRE(report.frames.size() == 960);
  REQUIRE_FALSE(report.skew_events.empty());
  REQUIRE(report.skew_events.front().kind == SkewEventKind::Detected);
  REQUIRE(report.skew_events.front().skew_key == "3-9-15");
  REQUIRE(report.skew_events.front().frame < 240);

  // the specialist lands at a segment boundary once the skew has run hot
  REQUIRE(report.compiles.size() == 1);
  REQUIRE(report.compiles[0].skew_key == "3-9-15");
  REQUIRE(report.compiles[0].model_id == "skew-3-9-15-gen-xs");
  REQUIRE(report.compiles[0].frame % 240 == 0);

  // after compilation the cheap specialist carries most of the last segment
  std::size_t specialist_frames = 0;
  for (const auto& f : report.frames) {
    if (f.frame >= 720 && is_skew_model(f.model_id)) ++specialist_frames;
  }
  REQUIRE(specialist_frames > 120);

  REQUIRE(report.aggregates.modal_model_id == "gen-xl");
  REQUIRE(report.aggregates.modal_model_params == 1'120'000);
  REQUIRE(report.aggregates.compile_count == 1);

  // every boundary the estimate was live gets an explicit end marker
  for (std::uint64_t boundary : {240ULL, 480ULL, 720ULL}) {
    const bool ended = std::any_of(
        report.skew_events.begin(), report.skew_events.end(), [&](const SkewEventRecord& e) {
          return e.frame == boundary && e.kind == SkewEventKind::Ended;
        });
    REQUIRE(ended);
  }
}

TEST_CASE("identical configs reproduce byte-identical reports") {
  const auto config = skewed_scenario(23);
  const auto a = run_scenario(config, 23);
  const auto b = run_scenario(config, 23);
  REQUIRE(report_to_csv(a) == report_to_csv(b));
  REQUIRE(report_to_json(a, Json{}).dump() == report_to_json(b, Json{}).dump());
}

TEST_CASE("toggles off pins the top general model and silences the engine") {
  auto config = skewed_scenario(5);
  EngineToggles off{false, false, false, false};
  const auto report = run_scenario(config, 5, &off);

  REQUIRE(report.skew_events.empty());
  REQUIRE(report.compiles.empty());
  for (const auto& f : report.frames) {
    REQUIRE(f.model_id == "gen-xl");
    REQUIRE_FALSE(f.rescaled);
  }
  REQUIRE(report.aggregates.mean_macs_per_frame == 264'850'000.0);
  REQUIRE(report.energy_spent ==
          Catch::Approx(960.0 * 264'850'000.0 * 1e-8).epsilon(1e-12));
}

TEST_CASE("spending never exceeds the budget plus one frame of slack") {
  auto config = skewed_scenario(31);
  config.budget.remain_energy = 1.0 * 960.0;  // tight: the top model costs 2.65 J/frame
  const auto report = run_scenario(config, 31);

  const double slack = 264'850'000.0 * config.budget.energy_per_mac;
  REQUIRE(report.energy_spent <= report.energy_initial + slack);

  std::set<std::string> ids;
  for (const auto& f : report.frames) ids.insert(f.model_id);
  REQUIRE(ids.size() >= 2);  // the scheduler actually moved along the ladder
  REQUIRE(report.aggregates.mean_macs_per_frame < 264'850'000.0);
}

TEST_CASE("a uniform stream is inert: no events, no compiles, no savings") {
  const auto preset = preset_random(3);
  ModelBank bank_on;
  for (const auto& p : preset.bank_profiles) bank_on.register_model(p);
  ConfusionBackend backend(preset.backend, preset.sim.stream.universe);
  const auto on = run_end_to_end(preset.sim, bank_on, backend);

  SimConfig off_config = preset.sim;
  off_config.toggles = EngineToggles{false, false, false, false};
  ModelBank bank_off;
  for (const auto& p : preset.bank_profiles) bank_off.register_model(p);
  const auto off = run_end_to_end(off_config, bank_off, backend);

  REQUIRE(on.aggregates.skew_event_count == 0);
  REQUIRE(on.aggregates.compile_count == 0);
  REQUIRE(on.aggregates.accuracy == off.aggregates.accuracy);
  REQUIRE(on.aggregates.mean_macs_per_frame == off.aggregates.mean_macs_per_frame);
  REQUIRE(on.aggregates.modal_model_id == "gen-xl");
}

TEST_CASE("the recurring-skew preset detects, compiles, and saves compute") {
  const auto preset = make_preset("n10p09", 2);
  REQUIRE_NOTHROW(preset.sim.stream.validate());
  REQUIRE(preset.sim.stream.segments.size() == 6);
  const auto& first = preset.sim.stream.segments.front().dominant_classes;
  REQUIRE(first.size() == 10);
  for (const auto& seg : preset.sim.stream.segments) {
    REQUIRE(seg.dominant_classes == first);
  }

  ModelBank bank;
  for (const auto& p : preset.bank_profiles) bank.register_model(p);
  ConfusionBackend backend(preset.backend, preset.sim.stream.universe);
  const auto report = run_end_to_end(preset.sim, bank, backend);

  REQUIRE(report.aggregates.skew_event_count > 0);
  REQUIRE(report.aggregates.compile_count >= 1);
  REQUIRE(report.aggregates.accuracy > 0.5);
  REQUIRE(report.aggregates.mean_macs_per_frame < 264'850'000.0);

  REQUIRE_THROWS_AS(make_preset("nope", 1), Error);
}
