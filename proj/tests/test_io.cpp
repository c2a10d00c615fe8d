#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <string>
#include <vector>

#include "skewcast/io.hpp"
#include "skewcast/presets.hpp"

using namespace skewcast;
namespace fs = std::filesystem;

namespace {

struct TempFile {
  fs::path path;
  explicit TempFile(const std::string& name) : path(fs::temp_directory_path() / name) {}
  ~TempFile() {
    std::error_code ec;
    fs::remove(path, ec);
  }
  std::string str() const { return path.string(); }
};

bool same_profile(const ModelProfile& a, const ModelProfile& b) {
  return a.id == b.id && a.kind == b.kind && a.skew_key == b.skew_key && a.params == b.params &&
         a.macs == b.macs && a.accuracy == b.accuracy && a.network_ref == b.network_ref;
}

}  // namespace

TEST_CASE("bank files round-trip every profile field") {
  auto profiles = toy_cascade_profiles();
  ModelProfile compiled;
  compiled.id = "skew-1-2-gen-xs";
  compiled.kind = ModelKind::Compiled;
  compiled.skew_key = "1-2";
  compiled.params = 100'000;
  compiled.macs = 24'900'000;
  compiled.accuracy = 0.91;
  compiled.network_ref = "gen-xs";
  profiles.push_back(compiled);

  TempFile file("skc_bank_roundtrip.json");
  save_bank(file.str(), profiles);
  const auto loaded = load_bank(file.str());
  REQUIRE(loaded.size() == profiles.size());
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    REQUIRE(same_profile(loaded[i], profiles[i]));
  }
}

TEST_CASE("bank parse failures name the offending spot") {
  REQUIRE_THROWS_WITH(bank_from_json("{"), Catch::Matchers::ContainsSubstring("not valid JSON"));
  REQUIRE_THROWS_WITH(bank_from_json("{}"), Catch::Matchers::ContainsSubstring("array"));

  const std::string missing_macs = R"([{"id":"m","kind":"general","skew_key":"N/A",
    "params":10,"accuracy":0.5,"network_ref":"m"}])";
  REQUIRE_THROWS_WITH(bank_from_json(missing_macs),
                      Catch::Matchers::ContainsSubstring("macs") &&
                          Catch::Matchers::ContainsSubstring("bank[0]"));

  const std::string bad_type = R"([{"id":"m","kind":"general","skew_key":"N/A",
    "params":10,"macs":"many","accuracy":0.5,"network_ref":"m"}])";
  REQUIRE_THROWS_WITH(bank_from_json(bad_type), Catch::Matchers::ContainsSubstring("wrong type"));

  const std::string bad_kind = R"([{"id":"m","kind":"huge","skew_key":"N/A",
    "params":10,"macs":5,"accuracy":0.5,"network_ref":"m"}])";
  REQUIRE_THROWS_WITH(bank_from_json(bad_kind), Catch::Matchers::ContainsSubstring("kind"));

  // semantic validation still applies after parsing
  const std::string bad_accuracy = R"([{"id":"m","kind":"general","skew_key":"N/A",
    "params":10,"macs":5,"accuracy":1.5,"network_ref":"m"}])";
  REQUIRE_THROWS_AS(bank_from_json(bad_accuracy), Error);

  REQUIRE_THROWS_AS(load_bank("/nonexistent/skc_bank.json"), Error);
}

TEST_CASE("stream specs round-trip through files") {
  StreamSpec spec;
  spec.universe = 40;
  spec.frame_interval = 0.5;
  SegmentSpec explicit_seg;
  explicit_seg.n_dominant = 3;
  explicit_seg.p = 0.9;
  explicit_seg.duration_frames = 120;
  explicit_seg.dominant_classes = {4, 7, 9};
  explicit_seg.seed = 5;
  SegmentSpec drawn_seg;
  drawn_seg.n_dominant = 6;
  drawn_seg.p = 0.8;
  drawn_seg.duration_frames = 240;
  drawn_seg.seed = 9;
  spec.segments = {explicit_seg, drawn_seg};

  TempFile file("skc_stream_roundtrip.json");
  save_stream(file.str(), spec);
  const auto loaded = load_stream(file.str());
  REQUIRE(loaded.universe == 40);
  REQUIRE(loaded.frame_interval == 0.5);
  REQUIRE(loaded.segments.size() == 2);
  REQUIRE(loaded.segments[0].dominant_classes == std::vector<std::size_t>{4, 7, 9});
  REQUIRE(loaded.segments[0].p == 0.9);
  REQUIRE(loaded.segments[1].dominant_classes.empty());
  REQUIRE(loaded.segments[1].n_dominant == 6);
  REQUIRE(loaded.segments[1].seed == 9);

  // labels drawn from the reloaded spec match the original
  const auto a = generate_stream(spec, 3);
  const auto b = generate_stream(loaded, 3);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) REQUIRE(a[i].label == b[i].label);
}

TEST_CASE("stream parsing applies defaults and rejects gaps") {
  const Json minimal = Json::parse(R"({"universe": 5, "segments": [
      {"n_dominant": 1, "p": 1.0, "duration_frames": 10}]})");
  const auto spec = stream_from_json(minimal);
  REQUIRE(spec.frame_interval == Catch::Approx(1.0 / 3.0));
  REQUIRE(spec.segments[0].seed == 0);

  REQUIRE_THROWS_WITH(stream_from_json(Json::parse(R"({"segments": []})")),
                      Catch::Matchers::ContainsSubstring("universe"));
  REQUIRE_THROWS_WITH(stream_from_json(Json::parse(R"({"universe": 5, "segments": 3})")),
                      Catch::Matchers::ContainsSubstring("segments"));
}

TEST_CASE("backend configs round-trip through JSON") {
  auto config = toy_backend_config(77);
  config.correct_peak_lo = 0.65;
  config.error_peak_hi = 0.8;
  config.runner_fraction = 0.4;
  config.ring_radius = 3;
  config.difficulty_weight = 0.5;
  config.accuracy_cap = 0.9;

  const auto loaded = backend_from_json(backend_to_json(config));
  REQUIRE(loaded.base_accuracy == config.base_accuracy);
  REQUIRE(loaded.correct_peak_lo == 0.65);
  REQUIRE(loaded.correct_peak_hi == config.correct_peak_hi);
  REQUIRE(loaded.error_peak_hi == 0.8);
  REQUIRE(loaded.runner_fraction == 0.4);
  REQUIRE(loaded.ring_radius == 3);
  REQUIRE(loaded.difficulty_weight == 0.5);
  REQUIRE(loaded.accuracy_cap == 0.9);
  REQUIRE(loaded.seed == 77);

  REQUIRE_THROWS_WITH(backend_from_json(Json::parse(R"({"base_accuracy": []})")),
                      Catch::Matchers::ContainsSubstring("base_accuracy"));
  REQUIRE_THROWS_WITH(
      backend_from_json(Json::parse(R"({"base_accuracy": {}, "correct_peak": [0.5]})")),
      Catch::Matchers::ContainsSubstring("correct_peak"));
}

TEST_CASE("per-frame CSV uses the documented columns") {
  RunReport report;
  report.frames.push_back({0, 0, 3, "gen-xl", 264'850'000, true, false, 3});
  report.frames.push_back({1, 0, 4, "skew-3-9-gen-xs", 24'900'000, false, true, 9});
  const std::string csv = report_to_csv(report);
  const std::string expected =
      "frame,segment,true_label,model_id,macs,bypassed,rescaled,predicted,correct\n"
      "0,0,3,gen-xl,264850000,1,0,3,1\n"
      "1,0,4,skew-3-9-gen-xs,24900000,0,1,9,0\n";
  REQUIRE(csv == expected);
}

TEST_CASE("report JSON carries config, energy, aggregates, and event logs") {
  RunReport report;
  report.frames.push_back({0, 0, 1, "gen-m", 100, false, false, 1});
  report.energy_initial = 10.0;
  report.energy_spent = 4.0;
  report.skew_events.push_back({5, SkewEventKind::Detected, "1-2"});
  report.compiles.push_back({9, "1-2", "skew-1-2-gen-xs"});
  report.aggregates = compute_metrics(report);

  Json config;
  config["scenario"] = "unit";
  const Json j = report_to_json(report, config);
  REQUIRE(j["config"]["scenario"] == "unit");
  REQUIRE(j["energy"]["initial"] == 10.0);
  REQUIRE(j["energy"]["spent"] == 4.0);
  REQUIRE(j["aggregates"]["total_frames"] == 1);
  REQUIRE(j["aggregates"]["accuracy"] == 1.0);
  REQUIRE(j["skew_events"].size() == 1);
  REQUIRE(j["skew_events"][0]["kind"] == "detected");
  REQUIRE(j["compiles"][0]["model_id"] == "skew-1-2-gen-xs");
}

TEST_CASE("softmax traces round-trip as newline-delimited JSON") {
  std::vector<StreamFrame> frames{{0, 2, 0}, {1, 0, 0}, {7, 1, 1}};
  std::vector<ClassDistribution> softmaxes{
      {0.1, 0.2, 0.7}, {0.8, 0.1, 0.1}, {0.25, 0.5, 0.25}};

  TempFile file("skc_trace_roundtrip.ndjson");
  save_trace(file.str(), frames, softmaxes);
  const auto loaded = load_trace(file.str());
  REQUIRE(loaded.size() == 3);
  REQUIRE(loaded.at(0) == softmaxes[0]);
  REQUIRE(loaded.at(1) == softmaxes[1]);
  REQUIRE(loaded.at(7) == softmaxes[2]);

  // a loaded trace can drive playback directly
  TraceBackend playback(loaded);
  ModelProfile m;
  m.id = "m";
  m.params = 1;
  m.macs = 1;
  m.network_ref = "m";
  REQUIRE(playback.emit(m, 0, nullptr, 7) == softmaxes[2]);

  softmaxes.pop_back();
  REQUIRE_THROWS_AS(save_trace(file.str(), frames, softmaxes), Error);
  REQUIRE_THROWS_AS(load_trace("/nonexistent/skc_trace.ndjson"), Error);
}

TEST_CASE("network containers restore weights bit for bit") {
  const auto net = make_toy_network(3, {8, 8, 3}, {6, 4}, {1, 2}, 5);
  TempFile file("skc_net_roundtrip.bin");
  save_network(file.str(), net);
  const auto loaded = load_network(file.str());

  REQUIRE(loaded.layers.size() == net.layers.size());
  REQUIRE(loaded.input_shape == net.input_shape);
  REQUIRE(loaded.n_classes == net.n_classes);
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    REQUIRE(loaded.layers[i].kind == net.layers[i].kind);
    REQUIRE(loaded.layers[i].kernel == net.layers[i].kernel);
    REQUIRE(loaded.layers[i].stride == net.layers[i].stride);
    REQUIRE(loaded.layers[i].weights == net.layers[i].weights);
    REQUIRE(loaded.layers[i].bias == net.layers[i].bias);
  }

  Tensor input(net.input_shape);
  HashRng rng(5, 0);
  for (auto& v : input.data) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  const auto mask = MaskSet::all_on(net);
  REQUIRE(forward(loaded, mask, input) == forward(net, mask, input));
}

TEST_CASE("network containers reject corruption") {
  const auto net = make_toy_network(4, {6, 6, 2}, {4}, {1}, 3);
  TempFile file("skc_net_corrupt.bin");
  save_network(file.str(), net);
  const std::string bytes = io_detail::read_file(file.str());

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  io_detail::write_file(file.str(), bad_magic);
  REQUIRE_THROWS_WITH(load_network(file.str()), Catch::Matchers::ContainsSubstring("magic"));

  io_detail::write_file(file.str(), bytes.substr(0, 12));
  REQUIRE_THROWS_AS(load_network(file.str()), Error);

  io_detail::write_file(file.str(), bytes.substr(0, bytes.size() - 4));
  REQUIRE_THROWS_WITH(load_network(file.str()), Catch::Matchers::ContainsSubstring("truncated"));

  REQUIRE_THROWS_AS(load_network("/nonexistent/skc_net.bin"), Error);
}

TEST_CASE("doubles format compactly and re-parse exactly") {
  REQUIRE(io_detail::format_double(0.25) == "0.25");
  REQUIRE(io_detail::format_double(1.0) == "1");
  HashRng rng(12, 0);
  for (int i = 0; i < 200; ++i) {
    const double v = rng.uniform(-1e6, 1e6);
    REQUIRE(std::stod(io_detail::format_double(v)) == v);
  }
}
