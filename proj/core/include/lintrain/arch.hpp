#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lintrain/graph.hpp"
#include "lintrain/params.hpp"
#include "lintrain/tensor.hpp"

namespace lintrain {

enum class LayerKind { Conv, Relu, MaxPool2, Flatten, Affine };

struct LayerDesc {
    LayerKind kind;
    std::int64_t out = 0;    // conv: base output channels; affine: base output units
    std::int64_t kernel = 0; // conv only
    std::int64_t stride = 1; // conv only
    std::int64_t pad = 0;    // conv only
    bool scale_out = true;   // false on the classifier layer (L never scales)

    bool operator==(const LayerDesc&) const = default;
};

/// Ordered layer description with an integer width factor. Hidden channel and
/// unit counts are base size x width_factor exactly; the input channels and
/// the class count never scale.
struct NetworkSpec {
    std::vector<LayerDesc> layers;
    std::int64_t width_factor = 1;
    std::int64_t in_channels = 1;
    std::int64_t in_height = 32;
    std::int64_t in_width = 32;
    std::int64_t num_classes = 10;

    bool operator==(const NetworkSpec&) const = default;
};

/// Classic five-layer convnet adapted to max-pooling and relu:
/// conv(in->6k,5x5) relu pool conv(6k->16k,5x5) relu pool flatten
/// fc(->120k) relu fc(->84k) relu fc(->num_classes). Expects 32x32 inputs.
NetworkSpec build_lenet(std::int64_t width_factor, std::int64_t in_channels,
                        std::int64_t num_classes);

/// Fully connected relu stack over flattened input. dims = (d0, d1, ..., dL);
/// interior dims scale with width_factor, dL is the class count.
NetworkSpec build_mlp(const std::vector<std::int64_t>& dims, std::int64_t width_factor = 1);

/// Generic builder for an arbitrary shape-consistent layer list.
NetworkSpec build_convnet(std::vector<LayerDesc> layers, std::int64_t in_channels,
                          std::int64_t in_height, std::int64_t in_width,
                          std::int64_t num_classes, std::int64_t width_factor);

/// Walks the layer chain, validating shape consistency; returns per-layer
/// output shapes (excluding the batch extent). Throws ConfigError on a broken
/// chain.
std::vector<std::vector<std::int64_t>> shape_chain(const NetworkSpec& spec);

/// Total trainable parameter count p.
std::int64_t param_count(const NetworkSpec& spec);

/// Parameter layout in layer order; entry names are "<n>.w" / "<n>.b" with n
/// the layer index.
ParamLayoutPtr layout_for(const NetworkSpec& spec);

/// Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per element, both weights and
/// biases; fan_in is C*kh*kw for conv and D for affine. Draw order is layout
/// order from a SplitMix64-seeded xoshiro256** stream, so the result is
/// bit-identical for a given seed and float width.
template <typename T>
ParamVectorT<T> init_params(const NetworkSpec& spec, std::uint64_t seed);

/// Records and returns the forward pass: batch must be [N,C,H,W] matching the
/// spec input. The graph is ready for vjp/jvp.
template <typename T>
std::pair<TensorT<T>, GraphT<T>> forward(const NetworkSpec& spec,
                                         const ParamVectorT<T>& params,
                                         const TensorT<T>& batch);

/// Output of the forward pass only (records internally, discards the graph).
template <typename T>
TensorT<T> predict(const NetworkSpec& spec, const ParamVectorT<T>& params,
                   const TensorT<T>& batch);

// Plain-text layer-list format, one layer per line:
//   conv out=6 k=5 [s=1] [p=0]
//   relu
//   pool
//   flatten
//   fc out=120
std::string layers_to_text(const std::vector<LayerDesc>& layers);
std::vector<LayerDesc> layers_from_text(const std::string& text);

} // namespace lintrain
