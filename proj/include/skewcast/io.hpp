#pragma once

#include <charconv>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "skewcast/backend.hpp"
#include "skewcast/error.hpp"
#include "skewcast/model_bank.hpp"
#include "skewcast/network.hpp"
#include "skewcast/profiler.hpp"
#include "skewcast/scheduler.hpp"
#include "skewcast/stream_sim.hpp"

namespace skewcast {

using Json = nlohmann::ordered_json;

namespace io_detail {

inline const Json& require(const Json& j, const std::string& field, const std::string& where) {
  auto it = j.find(field);
  if (it == j.end()) {
    throw Error(ErrorCode::ParseError, where + ": missing field '" + field + "'");
  }
  return *it;
}

template <typename T>
inline T field_as(const Json& j, const std::string& field, const std::string& where) {
  try {
    return require(j, field, where).get<T>();
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw Error(ErrorCode::ParseError, where + ": field '" + field + "' has the wrong type");
  }
}

template <typename T>
inline T field_or(const Json& j, const std::string& field, const std::string& where, T fallback) {
  if (j.find(field) == j.end()) return fallback;
  return field_as<T>(j, field, where);
}

inline Json parse(const std::string& text, const std::string& where) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) {
    throw Error(ErrorCode::ParseError, where + ": not valid JSON");
  }
  return j;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << content;
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

inline std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw Error(ErrorCode::IoError, "number formatting failed");
  return std::string(buf, ptr);
}

}  // namespace io_detail

// ---- model bank ----

inline Json profile_to_json(const ModelProfile& p) {
  Json j;
  j["id"] = p.id;
  j["kind"] = to_string(p.kind);
  j["skew_key"] = p.skew_key;
  j["params"] = p.params;
  j["macs"] = p.macs;
  j["accuracy"] = p.accuracy;
  j["network_ref"] = p.network_ref;
  return j;
}

inline ModelProfile profile_from_json(const Json& j, const std::string& where) {
  namespace d = io_detail;
  ModelProfile p;
  p.id = d::field_as<std::string>(j, "id", where);
  const std::string kind = d::field_as<std::string>(j, "kind", where);
  if (kind == "general") {
    p.kind = ModelKind::General;
  } else if (kind == "compiled") {
    p.kind = ModelKind::Compiled;
  } else {
    throw Error(ErrorCode::ParseError, where + ": field 'kind' must be general or compiled");
  }
  p.skew_key = d::field_as<std::string>(j, "skew_key", where);
  p.params = d::field_as<long long>(j, "params", where);
  p.macs = d::field_as<long long>(j, "macs", where);
  p.accuracy = d::field_as<double>(j, "accuracy", where);
  p.network_ref = d::field_as<std::string>(j, "network_ref", where);
  p.validate();
  return p;
}

/// Bank file format: a top-level array of model profile objects.
inline std::string bank_to_json(const std::vector<ModelProfile>& profiles) {
  Json arr = Json::array();
  for (const auto& p : profiles) arr.push_back(profile_to_json(p));
  return arr.dump(2) + "\n";
}

inline std::vector<ModelProfile> bank_from_json(const std::string& text) {
  const Json j = io_detail::parse(text, "bank");
  if (!j.is_array()) throw Error(ErrorCode::ParseError, "bank: top level must be an array");
  std::vector<ModelProfile> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(profile_from_json(j[i], "bank[" + std::to_string(i) + "]"));
  }
  return out;
}

inline void save_bank(const std::string& path, const std::vector<ModelProfile>& profiles) {
  io_detail::write_file(path, bank_to_json(profiles));
}

inline std::vector<ModelProfile> load_bank(const std::string& path) {
  return bank_from_json(io_detail::read_file(path));
}

// ---- stream spec ----

inline Json stream_to_json(const StreamSpec& spec) {
  Json j;
  j["universe"] = spec.universe;
  j["frame_interval"] = spec.frame_interval;
  Json segs = Json::array();
  for (const auto& s : spec.segments) {
    Json seg;
    seg["n_dominant"] = s.n_dominant;
    seg["p"] = s.p;
    seg["duration_frames"] = s.duration_frames;
    if (!s.dominant_classes.empty()) seg["dominant_classes"] = s.dominant_classes;
    seg["seed"] = s.seed;
    segs.push_back(seg);
  }
  j["segments"] = segs;
  return j;
}

inline StreamSpec stream_from_json(const Json& j, const std::string& where = "stream") {
  namespace d = io_detail;
  StreamSpec spec;
  spec.universe = d::field_as<std::size_t>(j, "universe", where);
  spec.frame_interval = d::field_or<double>(j, "frame_interval", where, 1.0 / 3.0);
  const Json& segs = d::require(j, "segments", where);
  if (!segs.is_array()) throw Error(ErrorCode::ParseError, where + ": field 'segments' must be an array");
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const std::string sw = where + ".segments[" + std::to_string(i) + "]";
    SegmentSpec s;
    s.n_dominant = d::field_as<std::size_t>(segs[i], "n_dominant", sw);
    s.p = d::field_as<double>(segs[i], "p", sw);
    s.duration_frames = d::field_as<std::size_t>(segs[i], "duration_frames", sw);
    s.dominant_classes =
        d::field_or<std::vector<std::size_t>>(segs[i], "dominant_classes", sw, {});
    s.seed = d::field_or<std::uint64_t>(segs[i], "seed", sw, 0);
    spec.segments.push_back(std::move(s));
  }
  spec.validate();
  return spec;
}

inline StreamSpec load_stream(const std::string& path) {
  return stream_from_json(io_detail::parse(io_detail::read_file(path), path), path);
}

inline void save_stream(const std::string& path, const StreamSpec& spec) {
  io_detail::write_file(path, stream_to_json(spec).dump(2) + "\n");
}

// ---- backend config ----

inline Json backend_to_json(const BackendConfig& c) {
  Json j;
  Json table;
  for (const auto& [ref, a] : c.base_accuracy) table[ref] = a;
  j["base_accuracy"] = table;
  j["correct_peak"] = {c.correct_peak_lo, c.correct_peak_hi};
  j["error_peak"] = {c.error_peak_lo, c.error_peak_hi};
  j["runner_fraction"] = c.runner_fraction;
  j["ring_radius"] = c.ring_radius;
  j["difficulty_weight"] = c.difficulty_weight;
  j["accuracy_cap"] = c.accuracy_cap;
  j["seed"] = c.seed;
  return j;
}

inline BackendConfig backend_from_json(const Json& j, const std::string& where = "backend") {
  namespace d = io_detail;
  BackendConfig c;
  const Json& table = d::require(j, "base_accuracy", where);
  if (!table.is_object()) {
    throw Error(ErrorCode::ParseError, where + ": field 'base_accuracy' must be an object");
  }
  for (auto it = table.begin(); it != table.end(); ++it) {
    if (!it.value().is_number()) {
      throw Error(ErrorCode::ParseError, where + ": base_accuracy['" + it.key() + "'] must be a number");
    }
    c.base_accuracy[it.key()] = it.value().get<double>();
  }
  auto pair_field = [&](const char* name, double& lo, double& hi) {
    if (j.find(name) == j.end()) return;
    const Json& v = j.at(name);
    if (!v.is_array() || v.size() != 2) {
      throw Error(ErrorCode::ParseError, where + ": field '" + name + "' must be [lo, hi]");
    }
    lo = v[0].get<double>();
    hi = v[1].get<double>();
  };
  pair_field("correct_peak", c.correct_peak_lo, c.correct_peak_hi);
  pair_field("error_peak", c.error_peak_lo, c.error_peak_hi);
  c.runner_fraction = d::field_or<double>(j, "runner_fraction", where, c.runner_fraction);
  c.ring_radius = d::field_or<std::size_t>(j, "ring_radius", where, c.ring_radius);
  c.difficulty_weight = d::field_or<double>(j, "difficulty_weight", where, c.difficulty_weight);
  c.accuracy_cap = d::field_or<double>(j, "accuracy_cap", where, c.accuracy_cap);
  c.seed = d::field_or<std::uint64_t>(j, "seed", where, c.seed);
  c.validate();
  return c;
}

// ---- run report ----

inline Json report_to_json(const RunReport& report, const Json& resolved_config) {
  Json j;
  j["config"] = resolved_config;
  j["energy"] = Json{{"initial", report.energy_initial}, {"spent", report.energy_spent}};
  Json agg;
  agg["total_frames"] = report.aggregates.total_frames;
  agg["accuracy"] = report.aggregates.accuracy;
  agg["mean_macs_per_frame"] = report.aggregates.mean_macs_per_frame;
  agg["modal_model_id"] = report.aggregates.modal_model_id;
  agg["modal_model_params"] = report.aggregates.modal_model_params;
  agg["skew_event_count"] = report.aggregates.skew_event_count;
  agg["compile_count"] = report.aggregates.compile_count;
  j["aggregates"] = agg;
  Json events = Json::array();
  for (const auto& e : report.skew_events) {
    events.push_back(Json{{"frame", e.frame}, {"kind", to_string(e.kind)}, {"skew_key", e.skew_key}});
  }
  j["skew_events"] = events;
  Json compiles = Json::array();
  for (const auto& c : report.compiles) {
    compiles.push_back(Json{{"frame", c.frame}, {"skew_key", c.skew_key}, {"model_id", c.model_id}});
  }
  j["compiles"] = compiles;
  return j;
}

/// Per-frame CSV. Columns: frame, segment, true_label, model_id, macs,
/// bypassed, rescaled, predicted, correct.
inline std::string report_to_csv(const RunReport& report) {
  std::string out = "frame,segment,true_label,model_id,macs,bypassed,rescaled,predicted,correct\n";
  for (const auto& f : report.frames) {
    out += std::to_string(f.frame);
    out += ',';
    out += std::to_string(f.segment);
    out += ',';
    out += std::to_string(f.true_label);
    out += ',';
    out += f.model_id;
    out += ',';
    out += std::to_string(f.macs);
    out += ',';
    out += f.bypassed ? '1' : '0';
    out += ',';
    out += f.rescaled ? '1' : '0';
    out += ',';
    out += std::to_string(f.predicted);
    out += ',';
    out += f.predicted == f.true_label ? '1' : '0';
    out += '\n';
  }
  return out;
}

// ---- softmax trace (newline-delimited JSON) ----

inline std::map<std::uint64_t, ClassDistribution> load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::map<std::uint64_t, ClassDistribution> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = path + ":" + std::to_string(lineno);
    const Json j = io_detail::parse(line, where);
    const auto frame = io_detail::field_as<std::uint64_t>(j, "frame", where);
    auto softmax = io_detail::field_as<std::vector<double>>(j, "softmax", where);
    out[frame] = std::move(softmax);
  }
  return out;
}

inline void save_trace(const std::string& path,
                       const std::vector<StreamFrame>& frames,
                       const std::vector<ClassDistribution>& softmaxes) {
  if (frames.size() != softmaxes.size()) {
    throw Error(ErrorCode::DimensionMismatch, "frame and softmax counts differ");
  }
  std::string out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    Json j;
    j["frame"] = frames[i].index;
    j["true_label"] = frames[i].label;
    j["softmax"] = softmaxes[i];
    out += j.dump();
    out += '\n';
  }
  io_detail::write_file(path, out);
}

// ---- network container: magic, header length, JSON header, float32 payload ----

inline constexpr char kNetworkMagic[8] = {'S', 'K', 'C', 'N', 'E', 'T', '0', '1'};

inline void save_network(const std::string& path, const Network& net) {
  net.validate();
  Json header;
  header["version"] = 1;
  header["input_shape"] = Json{{"h", net.input_shape.h}, {"w", net.input_shape.w}, {"c", net.input_shape.c}};
  header["n_classes"] = net.n_classes;
  Json layers = Json::array();
  for (const auto& l : net.layers) {
    Json lj;
    lj["kind"] = to_string(l.kind);
    lj["kernel"] = l.kernel;
    lj["in_channels"] = l.in_channels;
    lj["out_channels"] = l.out_channels;
    lj["stride"] = l.stride;
    lj["activation"] = l.activation == Activation::Relu ? "relu" : "none";
    lj["weights_ref"] = l.weights_ref;
    layers.push_back(lj);
  }
  header["layers"] = layers;
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out.write(kNetworkMagic, sizeof(kNetworkMagic));
  const std::uint64_t header_len = header_text.size();
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_text.data(), static_cast<std::streamsize>(header_text.size()));
  for (const auto& l : net.layers) {
    out.write(reinterpret_cast<const char*>(l.weights.data()),
              static_cast<std::streamsize>(l.weights.size() * sizeof(float)));
    out.write(reinterpret_cast<const char*>(l.bias.data()),
              static_cast<std::streamsize>(l.bias.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

inline Network load_network(const std::string& path) {
  namespace d = io_detail;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  char magic[sizeof(kNetworkMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kNetworkMagic, sizeof(magic)) != 0) {
    throw Error(ErrorCode::ParseError, path + ": not a network container (bad magic)");
  }
  std::uint64_t header_len = 0;
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in) throw Error(ErrorCode::ParseError, path + ": truncated header length");
  std::string header_text(header_len, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw Error(ErrorCode::ParseError, path + ": truncated header");
  const Json header = d::parse(header_text, path + " header");

  Network net;
  const Json& shape = d::require(header, "input_shape", path);
  net.input_shape.h = d::field_as<std::size_t>(shape, "h", path + ".input_shape");
  net.input_shape.w = d::field_as<std::size_t>(shape, "w", path + ".input_shape");
  net.input_shape.c = d::field_as<std::size_t>(shape, "c", path + ".input_shape");
  net.n_classes = d::field_as<std::size_t>(header, "n_classes", path);
  const Json& layers = d::require(header, "layers", path);
  if (!layers.is_array()) throw Error(ErrorCode::ParseError, path + ": field 'layers' must be an array");
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const std::string lw = path + ".layers[" + std::to_string(i) + "]";
    LayerSpec l;
    const std::string kind = d::field_as<std::string>(layers[i], "kind", lw);
    if (kind == "conv") {
      l.kind = LayerKind::Conv;
    } else if (kind == "global-average-pool") {
      l.kind = LayerKind::GlobalAveragePool;
    } else if (kind == "fully-connected") {
      l.kind = LayerKind::FullyConnected;
    } else if (kind == "softmax") {
      l.kind = LayerKind::Softmax;
    } else {
      throw Error(ErrorCode::ParseError, lw + ": unknown layer kind '" + kind + "'");
    }
    l.kernel = d::field_or<std::size_t>(layers[i], "kernel", lw, 1);
    l.in_channels = d::field_or<std::size_t>(layers[i], "in_channels", lw, 1);
    l.out_channels = d::field_or<std::size_t>(layers[i], "out_channels", lw, 1);
    l.stride = d::field_or<std::size_t>(layers[i], "stride", lw, 1);
    l.activation = d::field_or<std::string>(layers[i], "activation", lw, "none") == "relu"
                       ? Activation::Relu
                       : Activation::None;
    l.weights_ref = d::field_or<std::string>(layers[i], "weights_ref", lw, "");
    l.weights.resize(l.weight_count());
    const std::size_t want_bias =
        (l.kind == LayerKind::Conv || l.kind == LayerKind::FullyConnected) ? l.out_channels : 0;
    l.bias.resize(want_bias);
    net.layers.push_back(std::move(l));
  }
  for (std::size_t i = 0; i < net.layers.size(); ++i) {
    auto& l = net.layers[i];
    in.read(reinterpret_cast<char*>(l.weights.data()),
            static_cast<std::streamsize>(l.weights.size() * sizeof(float)));
    in.read(reinterpret_cast<char*>(l.bias.data()),
            static_cast<std::streamsize>(l.bias.size() * sizeof(float)));
    if (!in) {
      throw Error(ErrorCode::ParseError,
                  path + ": truncated weights for layer " + std::to_string(i));
    }
  }
  net.validate();
  return net;
}

}  // namespace skewcast
