#ifndef STN_RESOURCE_HPP
#define STN_RESOURCE_HPP

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "stn/model.hpp"

namespace stn {

enum class LayerKind { input, conv, pool, window_buffer, temporal, flatten, dense, softmax };

const char* layer_kind_name(LayerKind kind);

// Per-layer cost row: weight values (m_w), activation values (m_a) and
// operations per prediction (c). Counts are values, not bytes; biases are
// excluded from m_w.
struct LayerCost {
    std::string name;
    LayerKind kind = LayerKind::input;
    std::uint64_t weight_values = 0;
    std::uint64_t activation_values = 0;
    std::uint64_t ops = 0;
};

// How the temporal-head activation memory is accounted:
//  - window_buffer: the T-deep feature window buffer alone.
//  - consecutive_pairs: the largest sum of two consecutive head activations
//    (a more conservative planner bound).
enum class HeadActivationMode { window_buffer, consecutive_pairs };

struct ResourceReport {
    std::vector<LayerCost> layers;
    std::uint64_t weight_values = 0;        // m_w
    std::uint64_t extractor_activations = 0; // m_a of the spatial stage
    std::uint64_t head_activations = 0;      // m_a of the temporal head
    std::uint64_t ops = 0;                   // c
    int bytes_per_value = 4;

    std::uint64_t activation_values() const { return extractor_activations + head_activations; }
    std::uint64_t memory_values() const { return weight_values + activation_values(); }
    std::uint64_t memory_bytes() const {
        return memory_values() * static_cast<std::uint64_t>(bytes_per_value);
    }
};

struct DeviceBudget {
    std::optional<std::uint64_t> max_memory_bytes;
    std::optional<std::uint64_t> max_ops;
};

struct BudgetVerdict {
    bool pass = true;
    std::string detail;
};

std::vector<LayerCost> layer_costs(const ModelConfig& config);

ResourceReport totals(const ModelConfig& config, int bytes_per_value = 4,
                      HeadActivationMode mode = HeadActivationMode::window_buffer);

// Strict comparison on both axes: memory_bytes < budget and ops < budget.
BudgetVerdict check_budget(const ResourceReport& report, const DeviceBudget& budget);

// Ground truth for the formulas: runs the kernels with the operation counter
// enabled and returns the per-prediction cost in the streaming regime (the
// spatial extractor runs once per new frame, the head once per prediction).
std::uint64_t count_ops_instrumented(const Model& model, std::span<const Tensor3> frames);

// `layer,kind,m_w,m_a,c` per row plus a TOTAL row; field order is stable.
std::string render_report_csv(const ResourceReport& report);
std::string render_report_table(const ResourceReport& report);

} // namespace stn

#endif
