#include "lintrain/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "lintrain/csv.hpp"
#include "lintrain/errors.hpp"

namespace lintrain {

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::int64_t to_int(const std::string& v, const std::string& key) {
    std::int64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad integer for '" + key + "': " + v);
    return out;
}

std::uint64_t to_uint(const std::string& v, const std::string& key) {
    std::uint64_t out = 0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad unsigned integer for '" + key + "': " + v);
    return out;
}

double to_float(const std::string& v, const std::string& key) {
    double out = 0.0;
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError("config: bad float for '" + key + "': " + v);
    return out;
}

bool to_bool(const std::string& v, const std::string& key) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    throw ConfigError("config: bad boolean for '" + key + "': " + v);
}

std::vector<std::int64_t> to_int_list(const std::string& v, const std::string& key) {
    std::vector<std::int64_t> out;
    std::size_t start = 0;
    while (start <= v.size()) {
        const std::size_t comma = v.find(',', start);
        const std::string item =
            trim(comma == std::string::npos ? v.substr(start) : v.substr(start, comma - start));
        if (item.empty()) throw ConfigError("config: empty item in list for '" + key + "'");
        out.push_back(to_int(item, key));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw ConfigError("config: empty list for '" + key + "'");
    return out;
}

std::string int_list_text(const std::vector<std::int64_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ',';
        out += std::to_string(v[i]);
    }
    return out;
}

} // namespace

void apply_config_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
    if (key == "arch") c.arch = value;
    else if (key == "arch_file") c.arch_file = value;
    else if (key == "mlp_dims") c.mlp_dims = to_int_list(value, key);
    else if (key == "width_factor") c.width_factor = to_int(value, key);
    else if (key == "model") c.model = value;
    else if (key == "dataset") c.dataset = value;
    else if (key == "data_dir") c.data_dir = value;
    else if (key == "subset_per_class") c.subset_per_class = to_int(value, key);
    else if (key == "test_subset_per_class") c.test_subset_per_class = to_int(value, key);
    else if (key == "normalize") c.normalize = to_bool(value, key);
    else if (key == "synth_train") c.synth_train = to_int(value, key);
    else if (key == "synth_test") c.synth_test = to_int(value, key);
    else if (key == "synth_dim") c.synth_dim = to_int(value, key);
    else if (key == "synth_classes") c.synth_classes = to_int(value, key);
    else if (key == "synth_shift") c.synth_shift = to_float(value, key);
    else if (key == "synth_scale") c.synth_scale = to_float(value, key);
    else if (key == "seed") c.seed = to_uint(value, key);
    else if (key == "epochs") c.epochs = to_int(value, key);
    else if (key == "batch_size") c.batch_size = to_int(value, key);
    else if (key == "lr") c.lr = to_float(value, key);
    else if (key == "momentum") c.momentum = to_float(value, key);
    else if (key == "weight_decay") c.weight_decay = to_float(value, key);
    else if (key == "decay_biases") c.decay_biases = to_bool(value, key);
    else if (key == "schedule") c.schedule = to_bool(value, key);
    else if (key == "schedule_decay") c.schedule_decay = to_float(value, key);
    else if (key == "schedule_period") c.schedule_period = to_int(value, key);
    else if (key == "lin_lr") c.lin_lr = to_float(value, key);
    else if (key == "lin_weight_decay") c.lin_weight_decay = to_float(value, key);
    else if (key == "probe_count") c.probe_count = to_int(value, key);
    else if (key == "log_cadence") c.log_cadence = to_int(value, key);
    else if (key == "divergence_threshold") c.divergence_threshold = to_float(value, key);
    else if (key == "float_width") c.float_width = value;
    else if (key == "out_dir") c.out_dir = value;
    else if (key == "widths") c.widths = to_int_list(value, key);
    else if (key == "effrank_m") c.effrank_m = to_int(value, key);
    else if (key == "embed_block_elems") c.embed_block_elems = to_int(value, key);
    else throw ConfigError("config: unknown key '" + key + "'");
}

ExperimentConfig parse_config_text(const std::string& text) {
    ExperimentConfig config;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(line_no) +
                              " is not 'key = value': " + line);
        apply_config_key(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return config;
}

ExperimentConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("config: cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return parse_config_text(buffer.str());
}

void validate_config(const ExperimentConfig& c) {
    auto require = [](bool ok, const std::string& what) {
        if (!ok) throw ConfigError("config: " + what);
    };
    require(c.arch == "lenet" || c.arch == "mlp" || c.arch == "file",
            "arch must be lenet, mlp or file");
    require(c.arch != "file" || !c.arch_file.empty(), "arch = file needs arch_file");
    require(c.mlp_dims.size() >= 2, "mlp_dims needs at least two entries");
    require(c.width_factor >= 1, "width_factor must be >= 1");
    require(c.model == "standard" || c.model == "linearized" || c.model == "paired",
            "model must be standard, linearized or paired");
    require(c.dataset == "mnist" || c.dataset == "cifar10" || c.dataset == "synth",
            "dataset must be mnist, cifar10 or synth");
    require(c.subset_per_class >= 0, "subset_per_class must be >= 0");
    require(c.test_subset_per_class >= 0, "test_subset_per_class must be >= 0");
    require(c.synth_train >= 1 && c.synth_test >= 1, "synth split sizes must be >= 1");
    require(c.synth_dim >= 1 && c.synth_classes >= 2, "synth needs dim >= 1, classes >= 2");
    require(c.synth_scale > 0.0, "synth_scale must be positive");
    require(c.epochs >= 0, "epochs must be >= 0");
    require(c.batch_size >= 1, "batch_size must be >= 1");
    require(c.lr > 0.0, "lr must be positive");
    require(c.momentum >= 0.0 && c.momentum < 1.0, "momentum must be in [0, 1)");
    require(c.weight_decay >= 0.0, "weight_decay must be >= 0");
    require(c.schedule_decay > 1.0, "schedule_decay must exceed 1");
    require(c.schedule_period >= 1, "schedule_period must be >= 1");
    require(c.probe_count >= 1, "probe_count must be >= 1");
    require(c.log_cadence >= 1, "log_cadence must be >= 1");
    require(c.divergence_threshold > 0.0, "divergence_threshold must be positive");
    require(c.float_width == "f32" || c.float_width == "f64",
            "float_width must be f32 or f64");
    require(!c.out_dir.empty(), "out_dir must not be empty");
    require(!c.widths.empty(), "widths must not be empty");
    for (const auto w : c.widths)
        require(w >= 1, "width entries must be >= 1");
    require(c.effrank_m >= 1, "effrank_m must be >= 1");
    require(c.embed_block_elems >= 1024, "embed_block_elems must be >= 1024");
}

std::string config_echo(const ExperimentConfig& c) {
    std::ostringstream os;
    os << "arch = " << c.arch << '\n';
    if (!c.arch_file.empty()) os << "arch_file = " << c.arch_file << '\n';
    os << "mlp_dims = " << int_list_text(c.mlp_dims) << '\n'
       << "width_factor = " << c.width_factor << '\n'
       << "model = " << c.model << '\n'
       << "dataset = " << c.dataset << '\n'
       << "data_dir = " << c.data_dir << '\n'
       << "subset_per_class = " << c.subset_per_class << '\n'
       << "test_subset_per_class = " << c.test_subset_per_class << '\n'
       << "normalize = " << (c.normalize ? "on" : "off") << '\n'
       << "synth_train = " << c.synth_train << '\n'
       << "synth_test = " << c.synth_test << '\n'
       << "synth_dim = " << c.synth_dim << '\n'
       << "synth_classes = " << c.synth_classes << '\n'
       << "synth_shift = " << csv::format_float(c.synth_shift) << '\n'
       << "synth_scale = " << csv::format_float(c.synth_scale) << '\n'
       << "seed = " << c.seed << '\n'
       << "epochs = " << c.epochs << '\n'
       << "batch_size = " << c.batch_size << '\n'
       << "lr = " << csv::format_float(c.lr) << '\n'
       << "momentum = " << csv::format_float(c.momentum) << '\n'
       << "weight_decay = " << csv::format_float(c.weight_decay) << '\n'
       << "decay_biases = " << (c.decay_biases ? "on" : "off") << '\n'
       << "schedule = " << (c.schedule ? "on" : "off") << '\n'
       << "schedule_decay = " << csv::format_float(c.schedule_decay) << '\n'
       << "schedule_period = " << c.schedule_period << '\n'
       << "lin_lr = " << csv::format_float(c.lin_lr) << '\n'
       << "lin_weight_decay = " << csv::format_float(c.lin_weight_decay) << '\n'
       << "probe_count = " << c.probe_count << '\n'
       << "log_cadence = " << c.log_cadence << '\n'
       << "divergence_threshold = " << csv::format_float(c.divergence_threshold) << '\n'
       << "float_width = " << c.float_width << '\n'
       << "out_dir = " << c.out_dir << '\n'
       << "widths = " << int_list_text(c.widths) << '\n'
       << "effrank_m = " << c.effrank_m << '\n'
       << "embed_block_elems = " << c.embed_block_elems << '\n';
    return os.str();
}

} // namespace lintrain
