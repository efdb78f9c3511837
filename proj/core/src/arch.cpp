#include "lintrain/arch.hpp"

#include <cmath>
#include <sstream>

#include "lintrain/ops.hpp"
#include "lintrain/rng.hpp"

namespace lintrain {

namespace {

std::int64_t scaled_out(const LayerDesc& layer, const NetworkSpec& spec) {
    return layer.scale_out ? layer.out * spec.width_factor : layer.out;
}

} // namespace

NetworkSpec build_lenet(std::int64_t width_factor, std::int64_t in_channels,
                        std::int64_t num_classes) {
    if (width_factor < 1) throw ConfigError("build_lenet: width_factor must be >= 1");
    if (in_channels < 1 || num_classes < 1)
        throw ConfigError("build_lenet: channels and classes must be >= 1");
    NetworkSpec spec;
    spec.width_factor = width_factor;
    spec.in_channels = in_channels;
    spec.in_height = 32;
    spec.in_width = 32;
    spec.num_classes = num_classes;
    spec.layers = {
        {LayerKind::Conv, 6, 5},
        {LayerKind::Relu},
        {LayerKind::MaxPool2},
        {LayerKind::Conv, 16, 5},
        {LayerKind::Relu},
        {LayerKind::MaxPool2},
        {LayerKind::Flatten},
        {LayerKind::Affine, 120},
        {LayerKind::Relu},
        {LayerKind::Affine, 84},
        {LayerKind::Relu},
        {LayerKind::Affine, num_classes, 0, 1, 0, /*scale_out=*/false},
    };
    shape_chain(spec);
    return spec;
}

NetworkSpec build_mlp(const std::vector<std::int64_t>& dims, std::int64_t width_factor) {
    if (dims.size() < 2) throw ConfigError("build_mlp: need at least input and output dims");
    if (width_factor < 1) throw ConfigError("build_mlp: width_factor must be >= 1");
    NetworkSpec spec;
    spec.width_factor = width_factor;
    spec.in_channels = dims.front();
    spec.in_height = 1;
    spec.in_width = 1;
    spec.num_classes = dims.back();
    spec.layers.push_back({LayerKind::Flatten});
    for (std::size_t i = 1; i < dims.size(); ++i) {
        const bool last = i + 1 == dims.size();
        spec.layers.push_back({LayerKind::Affine, dims[i], 0, 1, 0, /*scale_out=*/!last});
        if (!last) spec.layers.push_back({LayerKind::Relu});
    }
    shape_chain(spec);
    return spec;
}

NetworkSpec build_convnet(std::vector<LayerDesc> layers, std::int64_t in_channels,
                          std::int64_t in_height, std::int64_t in_width,
                          std::int64_t num_classes, std::int64_t width_factor) {
    if (width_factor < 1) throw ConfigError("build_convnet: width_factor must be >= 1");
    if (layers.empty()) throw ConfigError("build_convnet: empty layer list");
    // the classifier layer never scales and must emit num_classes units
    std::size_t last_affine = layers.size();
    for (std::size_t i = 0; i < layers.size(); ++i)
        if (layers[i].kind == LayerKind::Affine) last_affine = i;
    if (last_affine == layers.size())
        throw ConfigError("build_convnet: network has no affine output layer");
    layers[last_affine].scale_out = false;
    if (layers[last_affine].out != num_classes)
        throw ConfigError("build_convnet: final fc out does not match num_classes");
    NetworkSpec spec;
    spec.layers = std::move(layers);
    spec.width_factor = width_factor;
    spec.in_channels = in_channels;
    spec.in_height = in_height;
    spec.in_width = in_width;
    spec.num_classes = num_classes;
    shape_chain(spec);
    return spec;
}

std::vector<std::vector<std::int64_t>> shape_chain(const NetworkSpec& spec) {
    std::vector<std::vector<std::int64_t>> out;
    out.reserve(spec.layers.size());
    // per-example shape, batch extent omitted
    std::vector<std::int64_t> cur = {spec.in_channels, spec.in_height, spec.in_width};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& l = spec.layers[i];
        const std::string at = "layer " + std::to_string(i);
        switch (l.kind) {
        case LayerKind::Conv: {
            if (cur.size() != 3) throw ConfigError(at + ": conv needs [C,H,W] input");
            if (l.out < 1 || l.kernel < 1 || l.stride < 1 || l.pad < 0)
                throw ConfigError(at + ": bad conv geometry");
            const std::int64_t h = cur[1] + 2 * l.pad, w = cur[2] + 2 * l.pad;
            if (h < l.kernel || w < l.kernel)
                throw ConfigError(at + ": kernel larger than padded input");
            cur = {scaled_out(l, spec), (h - l.kernel) / l.stride + 1,
                   (w - l.kernel) / l.stride + 1};
            break;
        }
        case LayerKind::Relu:
            break;
        case LayerKind::MaxPool2:
            if (cur.size() != 3) throw ConfigError(at + ": pool needs [C,H,W] input");
            if (cur[1] % 2 != 0 || cur[2] % 2 != 0)
                throw ConfigError(at + ": pool needs even H and W");
            cur = {cur[0], cur[1] / 2, cur[2] / 2};
            break;
        case LayerKind::Flatten: {
            std::int64_t n = 1;
            for (auto e : cur) n *= e;
            cur = {n};
            break;
        }
        case LayerKind::Affine:
            if (cur.size() != 1) throw ConfigError(at + ": fc needs flattened input");
            if (l.out < 1) throw ConfigError(at + ": bad fc width");
            cur = {scaled_out(l, spec)};
            break;
        }
        out.push_back(cur);
    }
    if (cur.size() != 1 || cur[0] != spec.num_classes)
        throw ConfigError("network output is not [num_classes]");
    return out;
}

ParamLayoutPtr layout_for(const NetworkSpec& spec) {
    auto layout = std::make_shared<ParamLayout>();
    std::vector<std::int64_t> cur = {spec.in_channels, spec.in_height, spec.in_width};
    const auto chain = shape_chain(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& l = spec.layers[i];
        const std::string tag = std::to_string(i);
        if (l.kind == LayerKind::Conv) {
            const std::int64_t k = scaled_out(l, spec);
            layout->add(tag + ".w", {k, cur[0], l.kernel, l.kernel});
            layout->add(tag + ".b", {k});
        } else if (l.kind == LayerKind::Affine) {
            const std::int64_t m = scaled_out(l, spec);
            layout->add(tag + ".w", {cur[0], m});
            layout->add(tag + ".b", {m});
        }
        cur = chain[i];
    }
    return layout;
}

std::int64_t param_count(const NetworkSpec& spec) {
    return layout_for(spec)->total();
}

template <typename T>
ParamVectorT<T> init_params(const NetworkSpec& spec, std::uint64_t seed) {
    ParamVectorT<T> params(layout_for(spec));
    Xoshiro256 rng(seed);
    const auto& entries = params.layout()->entries();
    double bound = 0.0;
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& shape = entries[i].shape;
        if (shape.size() == 4) { // conv weight: fan_in = C*kh*kw
            bound = 1.0 / std::sqrt(static_cast<double>(shape[1] * shape[2] * shape[3]));
        } else if (shape.size() == 2) { // affine weight: fan_in = D
            bound = 1.0 / std::sqrt(static_cast<double>(shape[0]));
        }
        // biases reuse the preceding weight entry's fan_in
        auto dst = params.slice(i);
        for (auto& v : dst) v = static_cast<T>(rng.next_symmetric(bound));
    }
    return params;
}

template <typename T>
std::pair<TensorT<T>, GraphT<T>> forward(const NetworkSpec& spec,
                                         const ParamVectorT<T>& params,
                                         const TensorT<T>& batch) {
    if (!same_layout(params.layout(), layout_for(spec)))
        throw LayoutError("forward: params layout does not match spec");
    if (batch.rank() != 4 || batch.dim(1) != spec.in_channels ||
        batch.dim(2) != spec.in_height || batch.dim(3) != spec.in_width)
        throw ShapeError("forward: batch shape does not match spec input");

    GraphT<T> g;
    int cur = g.add_input(batch);
    std::size_t entry = 0;
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerDesc& l = spec.layers[i];
        const std::string tag = std::to_string(i);
        switch (l.kind) {
        case LayerKind::Conv: {
            const int w = g.add_param(tag + ".w", params.entry_tensor(entry++));
            const int b = g.add_param(tag + ".b", params.entry_tensor(entry++));
            cur = g.apply_conv2d(cur, w, b, l.stride, l.pad);
            break;
        }
        case LayerKind::Relu:
            cur = g.apply_relu(cur);
            break;
        case LayerKind::MaxPool2:
            cur = g.apply_maxpool2(cur);
            break;
        case LayerKind::Flatten:
            cur = g.apply_flatten(cur);
            break;
        case LayerKind::Affine: {
            const int w = g.add_param(tag + ".w", params.entry_tensor(entry++));
            const int b = g.add_param(tag + ".b", params.entry_tensor(entry++));
            cur = g.apply_affine(cur, w, b);
            break;
        }
        }
    }
    g.mark_output(cur);
    TensorT<T> out = g.output();
    return {std::move(out), std::move(g)};
}

template <typename T>
TensorT<T> predict(const NetworkSpec& spec, const ParamVectorT<T>& params,
                   const TensorT<T>& batch) {
    return forward(spec, params, batch).first;
}

std::string layers_to_text(const std::vector<LayerDesc>& layers) {
    std::ostringstream os;
    for (const LayerDesc& l : layers) {
        switch (l.kind) {
        case LayerKind::Conv:
            os << "conv out=" << l.out << " k=" << l.kernel;
            if (l.stride != 1) os << " s=" << l.stride;
            if (l.pad != 0) os << " p=" << l.pad;
            break;
        case LayerKind::Relu:
            os << "relu";
            break;
        case LayerKind::MaxPool2:
            os << "pool";
            break;
        case LayerKind::Flatten:
            os << "flatten";
            break;
        case LayerKind::Affine:
            os << "fc out=" << l.out;
            break;
        }
        os << '\n';
    }
    return os.str();
}

namespace {

std::int64_t parse_kv(const std::string& token, const std::string& key,
                      const std::string& line) {
    if (token.rfind(key + "=", 0) != 0)
        throw ConfigError("bad layer token '" + token + "' in line: " + line);
    try {
        return std::stoll(token.substr(key.size() + 1));
    } catch (const std::exception&) {
        throw ConfigError("bad integer in layer line: " + line);
    }
}

} // namespace

std::vector<LayerDesc> layers_from_text(const std::string& text) {
    std::vector<LayerDesc> layers;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        std::istringstream ls(line);
        std::vector<std::string> tok;
        std::string t;
        while (ls >> t) tok.push_back(t);
        if (tok.empty()) continue;
        LayerDesc l{};
        if (tok[0] == "relu") {
            l.kind = LayerKind::Relu;
        } else if (tok[0] == "pool") {
            l.kind = LayerKind::MaxPool2;
        } else if (tok[0] == "flatten") {
            l.kind = LayerKind::Flatten;
        } else if (tok[0] == "fc") {
            l.kind = LayerKind::Affine;
            if (tok.size() != 2) throw ConfigError("fc line needs out=: " + line);
            l.out = parse_kv(tok[1], "out", line);
        } else if (tok[0] == "conv") {
            l.kind = LayerKind::Conv;
            if (tok.size() < 3) throw ConfigError("conv line needs out= and k=: " + line);
            l.out = parse_kv(tok[1], "out", line);
            l.kernel = parse_kv(tok[2], "k", line);
            for (std::size_t i = 3; i < tok.size(); ++i) {
                if (tok[i].rfind("s=", 0) == 0)
                    l.stride = parse_kv(tok[i], "s", line);
                else if (tok[i].rfind("p=", 0) == 0)
                    l.pad = parse_kv(tok[i], "p", line);
                else
                    throw ConfigError("bad conv token '" + tok[i] + "' in line: " + line);
            }
        } else {
            throw ConfigError("unknown layer kind: " + line);
        }
        layers.push_back(l);
    }
    if (layers.empty()) throw ConfigError("layer list is empty");
    return layers;
}

template ParamVectorT<float> init_params<float>(const NetworkSpec&, std::uint64_t);
template ParamVectorT<double> init_params<double>(const NetworkSpec&, std::uint64_t);
template std::pair<TensorT<float>, GraphT<float>>
forward<float>(const NetworkSpec&, const ParamVectorT<float>&, const TensorT<float>&);
template std::pair<TensorT<double>, GraphT<double>>
forward<double>(const NetworkSpec&, const ParamVectorT<double>&, const TensorT<double>&);
template TensorT<float> predict<float>(const NetworkSpec&, const ParamVectorT<float>&,
                                       const TensorT<float>&);
template TensorT<double> predict<double>(const NetworkSpec&, const ParamVectorT<double>&,
                                         const TensorT<double>&);

} // namespace lintrain
