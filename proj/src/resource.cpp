#include "stn/resource.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>

namespace stn {

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::input: return "input";
        case LayerKind::conv: return "conv";
        case LayerKind::pool: return "pool";
        case LayerKind::window_buffer: return "buffer";
        case LayerKind::temporal: return "temporal";
        case LayerKind::flatten: return "flatten";
        case LayerKind::dense: return "dense";
        case LayerKind::softmax: return "softmax";
    }
    return "?";
}

std::vector<LayerCost> layer_costs(const ModelConfig& config) {
    config.validate();
    std::vector<LayerCost> rows;

    std::uint64_t h = static_cast<std::uint64_t>(config.input_height);
    std::uint64_t w = static_cast<std::uint64_t>(config.input_width);
    std::uint64_t ch = static_cast<std::uint64_t>(config.input_channels);

    rows.push_back({"INPUT", LayerKind::input, 0, h * w * ch, 0});

    for (int i = 0; i < config.conv_blocks(); ++i) {
        const std::uint64_t r = static_cast<std::uint64_t>(config.conv_kernels[i]);
        const std::uint64_t n = static_cast<std::uint64_t>(config.conv_filters[i]);
        rows.push_back({"CONV-" + std::to_string(i + 1), LayerKind::conv, r * r * ch * n,
                        h * w * n, r * r * ch * n * h * w});
        rows.push_back({"POOL-" + std::to_string(i + 1), LayerKind::pool, 0,
                        (h / 2) * (w / 2) * n, 2 * 2 * h * w * n});
        h /= 2;
        w /= 2;
        ch = n;
    }

    const std::uint64_t t = static_cast<std::uint64_t>(config.window);
    rows.push_back({"WINDOW", LayerKind::window_buffer, 0, h * w * ch * t, 0});
    rows.push_back({"CONV1x1", LayerKind::temporal, ch * t, h * w * ch, ch * t * h * w});
    rows.push_back({"FLATTEN", LayerKind::flatten, 0, 0, 0});

    std::uint64_t in_f = h * w * ch;
    for (int j = 0; j < config.hidden_dense_layers(); ++j) {
        const std::uint64_t d = static_cast<std::uint64_t>(config.dense_units[j]);
        rows.push_back({"DENSE-" + std::to_string(j + 1), LayerKind::dense, in_f * d, d, in_f * d});
        in_f = d;
    }
    const std::uint64_t k = static_cast<std::uint64_t>(config.classes);
    rows.push_back({"SOFTMAX", LayerKind::softmax, in_f * k, k, in_f * k});

    return rows;
}

ResourceReport totals(const ModelConfig& config, int bytes_per_value, HeadActivationMode mode) {
    if (bytes_per_value < 1) throw ConfigError("bytes per value must be >= 1");
    ResourceReport report;
    report.layers = layer_costs(config);
    report.bytes_per_value = bytes_per_value;

    for (const LayerCost& row : report.layers) {
        report.weight_values += row.weight_values;
        report.ops += row.ops;
    }

    // Activation memory of the extractor: the largest pair of consecutive
    // live buffers, input included.
    std::vector<std::uint64_t> g_sizes;
    std::vector<std::uint64_t> h_sizes;
    std::uint64_t window_buffer = 0;
    for (const LayerCost& row : report.layers) {
        switch (row.kind) {
            case LayerKind::input:
            case LayerKind::conv:
            case LayerKind::pool:
                g_sizes.push_back(row.activation_values);
                break;
            case LayerKind::window_buffer:
                window_buffer = row.activation_values;
                h_sizes.push_back(row.activation_values);
                break;
            case LayerKind::temporal:
            case LayerKind::dense:
            case LayerKind::softmax:
                h_sizes.push_back(row.activation_values);
                break;
            case LayerKind::flatten:
                break;  // not a stored activation
        }
    }
    for (std::size_t i = 0; i + 1 < g_sizes.size(); ++i) {
        report.extractor_activations =
            std::max(report.extractor_activations, g_sizes[i] + g_sizes[i + 1]);
    }

    if (mode == HeadActivationMode::window_buffer) {
        report.head_activations = window_buffer;
    } else {
        for (std::size_t i = 0; i + 1 < h_sizes.size(); ++i) {
            report.head_activations =
                std::max(report.head_activations, h_sizes[i] + h_sizes[i + 1]);
        }
    }
    return report;
}

BudgetVerdict check_budget(const ResourceReport& report, const DeviceBudget& budget) {
    BudgetVerdict verdict;
    std::ostringstream detail;
    if (budget.max_memory_bytes) {
        const std::uint64_t used = report.memory_bytes();
        const std::uint64_t cap = *budget.max_memory_bytes;
        if (used < cap) {
            detail << "memory " << used << " B < " << cap << " B (margin " << cap - used
                   << " B)";
        } else {
            verdict.pass = false;
            detail << "memory " << used << " B >= " << cap << " B (over by " << used - cap
                   << " B)";
        }
    }
    if (budget.max_ops) {
        if (budget.max_memory_bytes) detail << "; ";
        const std::uint64_t cap = *budget.max_ops;
        if (report.ops < cap) {
            detail << "ops " << report.ops << " < " << cap << " (margin " << cap - report.ops
                   << ")";
        } else {
            verdict.pass = false;
            detail << "ops " << report.ops << " >= " << cap << " (over by "
                   << report.ops - cap << ")";
        }
    }
    verdict.detail = detail.str();
    return verdict;
}

std::uint64_t count_ops_instrumented(const Model& model, std::span<const Tensor3> frames) {
    if (frames.size() != static_cast<std::size_t>(model.config.window)) {
        throw InputError("count_ops_instrumented: frame count does not match window");
    }
    // Warm the window without counting: in the streaming regime only the
    // newest frame's extraction is paid per prediction.
    FeatureWindow window;
    window.reserve(frames.size());
    for (std::size_t t = 0; t + 1 < frames.size(); ++t) {
        window.push_back(extract_features(model, frames[t]));
    }

    OpCountScope scope;
    window.push_back(extract_features(model, frames.back()));
    Tensor3 combined = temporal_combine(model.params.temporal, window);
    std::vector<float> logits = head_logits_t(model.params, combined);
    softmax(std::span<const float>(logits));
    return scope.count();
}

std::string render_report_csv(const ResourceReport& report) {
    std::ostringstream out;
    out << "layer,kind,m_w,m_a,c\n";
    for (const LayerCost& row : report.layers) {
        out << row.name << ',' << layer_kind_name(row.kind) << ',' << row.weight_values << ','
            << row.activation_values << ',' << row.ops << '\n';
    }
    out << "TOTAL,total," << report.weight_values << ',' << report.activation_values() << ','
        << report.ops << '\n';
    return out.str();
}

std::string render_report_table(const ResourceReport& report) {
    std::ostringstream out;
    out << std::left << std::setw(10) << "layer" << std::right << std::setw(12) << "m_w"
        << std::setw(14) << "m_a" << std::setw(16) << "c" << '\n';
    for (const LayerCost& row : report.layers) {
        out << std::left << std::setw(10) << row.name << std::right << std::setw(12)
            << row.weight_values << std::setw(14) << row.activation_values << std::setw(16)
            << row.ops << '\n';
    }
    out << '\n';
    out << "m_w   = " << report.weight_values << '\n';
    out << "m_a   = " << report.activation_values() << "  (extractor " << report.extractor_activations
        << " + head " << report.head_activations << ")\n";
    out << "m     = " << report.memory_values() << " values, " << report.memory_bytes()
        << " B at " << report.bytes_per_value << " B/value\n";
    out << "c     = " << report.ops << " ops/prediction\n";
    return out.str();
}

} // namespace stn
