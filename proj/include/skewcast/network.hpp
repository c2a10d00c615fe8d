#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "skewcast/error.hpp"
#include "skewcast/rng.hpp"

namespace skewcast {

struct TensorShape {
  std::size_t h = 1, w = 1, c = 1;

  bool operator==(const TensorShape&) const = default;

  void validate() const {
    if (h < 1 || w < 1 || c < 1) {
      throw Error(ErrorCode::InvalidArgument, "tensor dimensions must all be at least 1");
    }
  }

  std::size_t volume() const { return h * w * c; }

  std::string str() const {
    return std::to_string(h) + "x" + std::to_string(w) + "x" + std::to_string(c);
  }
};

/// Dense feature map in height-major, then width, then channel order.
struct Tensor {
  TensorShape shape;
  std::vector<float> data;

  Tensor() = default;
  explicit Tensor(TensorShape s) : shape(s), data(s.volume(), 0.0f) {}

  float& at(std::size_t y, std::size_t x, std::size_t ch) {
    return data[(y * shape.w + x) * shape.c + ch];
  }
  float at(std::size_t y, std::size_t x, std::size_t ch) const {
    return data[(y * shape.w + x) * shape.c + ch];
  }
};

enum class LayerKind { Conv, GlobalAveragePool, FullyConnected, Softmax };
enum class Activation { Relu, None };

inline const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::GlobalAveragePool: return "global-average-pool";
    case LayerKind::FullyConnected: return "fully-connected";
    case LayerKind::Softmax: return "softmax";
  }
  return "unknown";
}

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::size_t kernel = 1;        ///< d, conv only
  std::size_t in_channels = 1;   ///< conv: C_{l-1}; fully-connected: flattened input size
  std::size_t out_channels = 1;  ///< conv: C_l; fully-connected: output size
  std::size_t stride = 1;        ///< conv only
  Activation activation = Activation::None;
  std::string weights_ref;       ///< weight block name inside the container

  /// conv: out*d*d*in, out-major then ky, kx, in. fully-connected: out-major.
  std::vector<float> weights;
  std::vector<float> bias;       ///< one per output channel / output feature

  std::size_t weight_count() const {
    if (kind == LayerKind::Conv) return out_channels * kernel * kernel * in_channels;
    if (kind == LayerKind::FullyConnected) return out_channels * in_channels;
    return 0;
  }
};

/// Layered feed-forward classifier description plus inline weights.
struct Network {
  std::vector<LayerSpec> layers;
  TensorShape input_shape;
  std::size_t n_classes = 0;

  std::size_t conv_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.kind == LayerKind::Conv ? 1 : 0;
    return n;
  }

  /// Output shape of layer index given its input shape, ignoring masks.
  static TensorShape layer_output_shape(const LayerSpec& layer, const TensorShape& in,
                                        std::size_t index) {
    auto fail = [&](const std::string& why) -> TensorShape {
      throw Error(ErrorCode::ShapeInconsistent,
                  "layer " + std::to_string(index) + " (" + to_string(layer.kind) + "): " + why);
    };
    switch (layer.kind) {
      case LayerKind::Conv: {
        if (layer.kernel < 1 || layer.stride < 1) return fail("kernel and stride must be >= 1");
        if (layer.in_channels != in.c) {
          return fail("expects " + std::to_string(layer.in_channels) + " input channels, got " +
                      std::to_string(in.c));
        }
        return TensorShape{(in.h + layer.stride - 1) / layer.stride,
                           (in.w + layer.stride - 1) / layer.stride, layer.out_channels};
      }
      case LayerKind::GlobalAveragePool:
        return TensorShape{1, 1, in.c};
      case LayerKind::FullyConnected: {
        if (layer.in_channels != in.volume()) {
          return fail("expects " + std::to_string(layer.in_channels) + " input features, got " +
                      std::to_string(in.volume()));
        }
        return TensorShape{1, 1, layer.out_channels};
      }
      case LayerKind::Softmax: {
        if (in.h != 1 || in.w != 1) return fail("softmax input must be a 1x1 vector");
        return in;
      }
    }
    return fail("unknown layer kind");
  }

  void validate() const {
    input_shape.validate();
    if (layers.empty()) throw Error(ErrorCode::EmptyInput, "network has no layers");
    if (n_classes < 1) throw Error(ErrorCode::InvalidArgument, "n_classes must be at least 1");
    TensorShape shape = input_shape;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.weight_count() != l.weights.size()) {
        throw Error(ErrorCode::ShapeInconsistent,
                    "layer " + std::to_string(i) + ": expected " +
                        std::to_string(l.weight_count()) + " weights, holds " +
                        std::to_string(l.weights.size()));
      }
      const std::size_t want_bias =
          (l.kind == LayerKind::Conv || l.kind == LayerKind::FullyConnected) ? l.out_channels : 0;
      if (l.bias.size() != want_bias) {
        throw Error(ErrorCode::ShapeInconsistent,
                    "layer " + std::to_string(i) + ": expected " + std::to_string(want_bias) +
                        " biases, holds " + std::to_string(l.bias.size()));
      }
      shape = layer_output_shape(l, shape, i);
    }
    if (layers.back().kind != LayerKind::Softmax) {
      throw Error(ErrorCode::InvalidArgument, "last layer must be softmax");
    }
    if (shape.c != n_classes || shape.h != 1 || shape.w != 1) {
      throw Error(ErrorCode::ShapeInconsistent,
                  "network output is " + shape.str() + ", expected 1x1x" +
                      std::to_string(n_classes));
    }
  }
};

/// Perforation plan: per-conv-layer on/off, per-channel keep bits, stride boost.
struct MaskSet {
  std::vector<bool> layer_on;                   ///< one per conv layer
  std::vector<std::vector<bool>> channel_keep;  ///< one bitset per conv layer
  std::vector<std::size_t> stride_boost;        ///< >= 1, one per conv layer

  static MaskSet all_on(const Network& net) {
    MaskSet m;
    for (const auto& l : net.layers) {
      if (l.kind != LayerKind::Conv) continue;
      m.layer_on.push_back(true);
      m.channel_keep.emplace_back(l.out_channels, true);
      m.stride_boost.push_back(1);
    }
    return m;
  }

  void validate(const Network& net) const {
    const std::size_t convs = net.conv_count();
    if (layer_on.size() != convs || channel_keep.size() != convs || stride_boost.size() != convs) {
      throw Error(ErrorCode::DimensionMismatch,
                  "mask set must cover all " + std::to_string(convs) + " conv layers");
    }
    bool any_on = false;
    std::size_t ci = 0;
    for (const auto& l : net.layers) {
      if (l.kind != LayerKind::Conv) continue;
      if (channel_keep[ci].size() != l.out_channels) {
        throw Error(ErrorCode::DimensionMismatch,
                    "channel mask " + std::to_string(ci) + " must have " +
                        std::to_string(l.out_channels) + " bits");
      }
      if (stride_boost[ci] < 1) {
        throw Error(ErrorCode::InvalidArgument,
                    "stride boost " + std::to_string(ci) + " must be at least 1");
      }
      if (layer_on[ci]) {
        any_on = true;
        bool any_channel = false;
        for (bool b : channel_keep[ci]) any_channel = any_channel || b;
        if (!any_channel) {
          throw Error(ErrorCode::InvalidArgument,
                      "active conv layer " + std::to_string(ci) + " keeps no channels");
        }
      }
      ++ci;
    }
    if (!any_on) throw Error(ErrorCode::InvalidArgument, "at least one conv layer must stay on");
  }
};

/// Deterministic small network for tests and demos: a stack of conv layers
/// followed by global average pooling, a classifier head, and softmax.
/// Weights are seeded uniform values in [-0.5, 0.5].
inline Network make_toy_network(std::uint64_t seed, TensorShape input,
                                const std::vector<std::size_t>& conv_channels,
                                const std::vector<std::size_t>& conv_strides,
                                std::size_t n_classes, std::size_t kernel = 3) {
  if (conv_channels.empty() || conv_channels.size() != conv_strides.size()) {
    throw Error(ErrorCode::InvalidArgument, "conv channel and stride lists must match, nonempty");
  }
  HashRng rng(seed, 7);
  Network net;
  net.input_shape = input;
  net.n_classes = n_classes;
  std::size_t in_c = input.c;
  for (std::size_t i = 0; i < conv_channels.size(); ++i) {
    LayerSpec l;
    l.kind = LayerKind::Conv;
    l.kernel = kernel;
    l.in_channels = in_c;
    l.out_channels = conv_channels[i];
    l.stride = conv_strides[i];
    l.activation = Activation::Relu;
    l.weights_ref = "conv" + std::to_string(i);
    l.weights.resize(l.weight_count());
    for (auto& w : l.weights) w = static_cast<float>(rng.uniform(-0.5, 0.5));
    l.bias.resize(l.out_channels);
    for (auto& b : l.bias) b = static_cast<float>(rng.uniform(-0.5, 0.5));
    net.layers.push_back(std::move(l));
    in_c = conv_channels[i];
  }
  net.layers.push_back(LayerSpec{LayerKind::GlobalAveragePool});
  LayerSpec fc;
  fc.kind = LayerKind::FullyConnected;
  fc.in_channels = in_c;
  fc.out_channels = n_classes;
  fc.activation = Activation::None;
  fc.weights_ref = "fc";
  fc.weights.resize(fc.weight_count());
  for (auto& w : fc.weights) w = static_cast<float>(rng.uniform(-0.5, 0.5));
  fc.bias.resize(n_classes);
  for (auto& b : fc.bias) b = static_cast<float>(rng.uniform(-0.5, 0.5));
  net.layers.push_back(std::move(fc));
  net.layers.push_back(LayerSpec{LayerKind::Softmax});
  net.validate();
  return net;
}

}  // namespace skewcast
