#pragma once

#include <span>
#include <string>

#include "msnt/metrics.hpp"

namespace msnt {

// Per-class P/R/F1 at two decimals, one row per model, classes in the
// published column order (neutral, negative, positive), followed by macro and
// weighted F1.
std::string render_table(const std::string& dataset, std::span<const EvalReport> reports);

// Two-decimal rendering used by the tables.
std::string format2(double value);

}  // namespace msnt
