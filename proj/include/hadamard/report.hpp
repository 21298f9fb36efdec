#pragma once

#include <cmath>
#include <string>
#include <vector>

namespace hadamard {

/// One verification row: `value relation threshold` decides `pass`.
struct CheckRow {
    std::string check;
    std::string anchor;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation = "<=";
    bool pass = false;
};

[[nodiscard]] inline bool compare(double value, const std::string& relation, double threshold) {
    if (std::isnan(value)) return false;
    if (relation == "<=") return value <= threshold;
    if (relation == "<") return value < threshold;
    if (relation == ">=") return value >= threshold;
    if (relation == ">") return value > threshold;
    return false;
}

[[nodiscard]] inline CheckRow make_row(std::string check, std::string anchor, double value, std::string relation,
                                       double threshold) {
    CheckRow r{std::move(check), std::move(anchor), value, threshold, std::move(relation), false};
    r.pass = compare(r.value, r.relation, r.threshold);
    return r;
}

[[nodiscard]] inline bool all_pass(const std::vector<CheckRow>& rows) {
    for (const auto& r : rows)
        if (!r.pass) return false;
    return true;
}

}  // namespace hadamard
