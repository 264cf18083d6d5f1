#include "dan/report.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <sstream>

namespace dan {

namespace {

std::string percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", 100.0 * fraction);
    return buf;
}

std::size_t best_layer(std::span<const double> values) {
    return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

}  // namespace

std::string format_real(double value) {
    char buf[64];
    auto [end, ec] = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, end);
}

std::string render_table(const EvalReport& r) {
    std::ostringstream out;
    out << "metric              value\n";
    out << "------------------  ----------\n";
    auto row = [&](const char* name, const std::string& v) {
        out << name << std::string(20 - std::string(name).size(), ' ') << v << '\n';
    };
    row("target_label", std::to_string(r.target_label));
    row("threshold", format_real(r.threshold));
    row("n_clean_eval", std::to_string(r.n_clean_eval));
    row("n_poisoned_eval", std::to_string(r.n_poisoned_eval));
    row("FRR (%)", percent(r.frr));
    row("FAR (%)", percent(r.far));
    row("AUROC (%)", percent(r.auroc));
    if (!r.per_layer_auroc.empty()) out << '\n' << render_layer_table(r.per_layer_auroc);
    return out.str();
}

std::string render_key_values(const EvalReport& r) {
    std::ostringstream out;
    out << "frr=" << format_real(r.frr) << '\n';
    out << "far=" << format_real(r.far) << '\n';
    out << "auroc=" << format_real(r.auroc) << '\n';
    out << "threshold=" << format_real(r.threshold) << '\n';
    out << "target_label=" << r.target_label << '\n';
    out << "n_clean_eval=" << r.n_clean_eval << '\n';
    out << "n_poisoned_eval=" << r.n_poisoned_eval << '\n';
    for (std::size_t i = 0; i < r.per_layer_auroc.size(); ++i)
        out << "auroc_layer" << i + 1 << '=' << format_real(r.per_layer_auroc[i]) << '\n';
    return out.str();
}

std::string render_json(const EvalReport& r) {
    nlohmann::ordered_json doc;
    doc["frr"] = r.frr;
    doc["far"] = r.far;
    doc["auroc"] = r.auroc;
    doc["per_layer_auroc"] = r.per_layer_auroc;
    doc["threshold"] = r.threshold;
    doc["target_label"] = r.target_label;
    doc["n_clean_eval"] = r.n_clean_eval;
    doc["n_poisoned_eval"] = r.n_poisoned_eval;
    return doc.dump(2) + "\n";
}

std::string render_layer_table(std::span<const double> per_layer_auroc) {
    std::ostringstream out;
    out << "layer  AUROC (%)\n";
    out << "-----  ---------\n";
    if (per_layer_auroc.empty()) return out.str();
    const auto best = best_layer(per_layer_auroc);
    for (std::size_t i = 0; i < per_layer_auroc.size(); ++i) {
        char line[64];
        std::snprintf(line, sizeof line, "%5zu  %9s%s\n", i + 1, percent(per_layer_auroc[i]).c_str(),
                      i == best ? " *" : "");
        out << line;
    }
    return out.str();
}

std::string render_layer_json(std::span<const double> per_layer_auroc) {
    nlohmann::ordered_json doc;
    doc["per_layer_auroc"] = std::vector<double>(per_layer_auroc.begin(), per_layer_auroc.end());
    if (!per_layer_auroc.empty()) doc["best_layer"] = best_layer(per_layer_auroc) + 1;
    return doc.dump(2) + "\n";
}

std::string render_model_summary(const DetectorModel& model) {
    std::ostringstream out;
    out << "layers=" << model.n_layers() << " dim=" << model.dim() << " classes=" << model.n_classes()
        << " aggregation=" << to_string(model.aggregation)
        << " normalization=" << (model.normalization_enabled ? "on" : "off") << '\n';
    out << "layer  norm_mean             norm_std              ridge\n";
    for (const auto& layer : model.layers) {
        char line[128];
        std::snprintf(line, sizeof line, "%5zu  %-20.12g  %-20.12g  %.6g\n", layer.layer_index, layer.norm_mean,
                      layer.norm_std, layer.ridge);
        out << line;
    }
    if (model.threshold) out << "threshold=" << format_real(*model.threshold) << '\n';
    return out.str();
}

}  // namespace dan
