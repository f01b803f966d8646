#include "stn/config_file.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include "stn/errors.hpp"

namespace stn {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

int parse_int(const std::string& value, const std::string& key) {
    try {
        std::size_t used = 0;
        const int v = std::stoi(value, &used);
        if (used != value.size()) throw std::invalid_argument(value);
        return v;
    } catch (const std::exception&) {
        throw FormatError("config key '" + key + "': '" + value + "' is not an integer");
    }
}

std::vector<int> parse_int_list(const std::string& value, const std::string& key) {
    std::vector<int> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        out.push_back(parse_int(trim(item), key));
    }
    if (out.empty()) throw FormatError("config key '" + key + "': empty list");
    return out;
}

} // namespace

ModelConfig parse_model_config(const std::string& text) {
    std::map<std::string, std::string> entries;
    std::stringstream lines(text);
    std::string line;
    int line_no = 0;
    while (std::getline(lines, line)) {
        ++line_no;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw FormatError("config line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty()) {
            throw FormatError("config line " + std::to_string(line_no) + ": empty key or value");
        }
        if (!entries.emplace(key, value).second) {
            throw FormatError("config: duplicate key '" + key + "'");
        }
    }

    const auto require = [&](const std::string& key) -> const std::string& {
        const auto it = entries.find(key);
        if (it == entries.end()) throw FormatError("config: missing key '" + key + "'");
        return it->second;
    };

    for (const auto& [key, value] : entries) {
        static const char* known[] = {"input_h", "input_w", "input_c", "T", "l",
                                      "n",       "r",       "b",       "d", "k"};
        if (std::find_if(std::begin(known), std::end(known),
                         [&](const char* k) { return key == k; }) == std::end(known)) {
            throw FormatError("config: unknown key '" + key + "'");
        }
    }

    ModelConfig cfg;
    cfg.input_height = parse_int(require("input_h"), "input_h");
    cfg.input_width = parse_int(require("input_w"), "input_w");
    cfg.input_channels = parse_int(require("input_c"), "input_c");
    cfg.window = parse_int(require("T"), "T");
    cfg.conv_filters = parse_int_list(require("n"), "n");
    cfg.conv_kernels = parse_int_list(require("r"), "r");
    cfg.dense_units = parse_int_list(require("d"), "d");
    cfg.classes = parse_int(require("k"), "k");

    const int l = parse_int(require("l"), "l");
    if (l != cfg.conv_blocks()) {
        throw FormatError("config: l = " + std::to_string(l) + " but n lists " +
                          std::to_string(cfg.conv_blocks()) + " blocks");
    }
    // A single kernel size may stand for all blocks.
    if (cfg.conv_kernels.size() == 1 && cfg.conv_blocks() > 1) {
        cfg.conv_kernels.assign(cfg.conv_filters.size(), cfg.conv_kernels[0]);
    }
    if (cfg.conv_kernels.size() != cfg.conv_filters.size()) {
        throw FormatError("config: r lists " + std::to_string(cfg.conv_kernels.size()) +
                          " kernels for " + std::to_string(cfg.conv_blocks()) + " blocks");
    }
    const int b = parse_int(require("b"), "b");
    if (b != cfg.hidden_dense_layers()) {
        throw FormatError("config: b = " + std::to_string(b) + " but d lists " +
                          std::to_string(cfg.hidden_dense_layers()) + " layers");
    }
    cfg.validate();
    return cfg;
}

ModelConfig load_model_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open config '" + path + "'");
    std::stringstream buffer;
    buffer << in.rdbuf();
    try {
        return parse_model_config(buffer.str());
    } catch (const FormatError& e) {
        throw FormatError("'" + path + "': " + e.what());
    }
}

std::string format_model_config(const ModelConfig& config) {
    const auto join = [](const std::vector<int>& values) {
        std::string out;
        for (std::size_t i = 0; i < values.size(); ++i) {
            if (i) out += ',';
            out += std::to_string(values[i]);
        }
        return out;
    };
    std::ostringstream out;
    out << "input_h = " << config.input_height << '\n';
    out << "input_w = " << config.input_width << '\n';
    out << "input_c = " << config.input_channels << '\n';
    out << "T = " << config.window << '\n';
    out << "l = " << config.conv_blocks() << '\n';
    out << "n = " << join(config.conv_filters) << '\n';
    out << "r = " << join(config.conv_kernels) << '\n';
    out << "b = " << config.hidden_dense_layers() << '\n';
    out << "d = " << join(config.dense_units) << '\n';
    out << "k = " << config.classes << '\n';
    return out.str();
}

void save_model_config(const ModelConfig& config, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw FormatError("cannot open '" + path + "' for writing");
    out << format_model_config(config);
}

} // namespace stn
