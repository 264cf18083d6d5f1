#pragma once

#include "dan/dan_score.hpp"
#include "dan/eval_metrics.hpp"

#include <span>
#include <string>

namespace dan {

/// Shortest decimal text that parses back to the same double.
std::string format_real(double value);

std::string render_table(const EvalReport& report);

/// One `metric=value` line per metric; per-layer entries as auroc_layer<i>.
std::string render_key_values(const EvalReport& report);

std::string render_json(const EvalReport& report);

/// Per-layer AUROC as percentages with two decimals; the best layer is marked `*`.
std::string render_layer_table(std::span<const double> per_layer_auroc);
std::string render_layer_json(std::span<const double> per_layer_auroc);

/// Per-layer μ, σ, ε of a fitted model.
std::string render_model_summary(const DetectorModel& model);

}  // namespace dan
