#include "msnt/report.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <sstream>

namespace msnt {

std::string format2(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", value);
  return buf;
}

namespace {

constexpr std::array<Sentiment, 3> kColumnOrder = {Sentiment::neutral, Sentiment::negative,
                                                    Sentiment::positive};

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.append(width - s.size(), ' ');
  return s;
}

std::string title(Sentiment s) {
  std::string t(to_string(s));
  t[0] = static_cast<char>(t[0] - 'a' + 'A');
  return t;
}

}  // namespace

std::string render_table(const std::string& dataset, std::span<const EvalReport> reports) {
  std::size_t name_width = 5;
  for (const EvalReport& r : reports) name_width = std::max(name_width, r.model.size());
  name_width += 2;
  constexpr std::size_t kCell = 6;
  constexpr std::size_t kGroup = 3 * kCell + 2;

  std::ostringstream out;
  out << "Dataset: " << dataset << '\n';
  out << pad("Model", name_width);
  for (Sentiment s : kColumnOrder) out << pad(title(s), kGroup);
  out << pad("Macro", kCell + 2) << "Weighted\n";
  out << pad("", name_width);
  for (std::size_t g = 0; g < kColumnOrder.size(); ++g) {
    out << pad("P", kCell) << pad("R", kCell) << pad("F1", kCell + 2);
  }
  out << pad("F1", kCell + 2) << "F1\n";
  for (const EvalReport& r : reports) {
    out << pad(r.model, name_width);
    for (Sentiment s : kColumnOrder) {
      const ClassMetrics& m = r.of(s);
      out << pad(format2(m.precision), kCell) << pad(format2(m.recall), kCell)
          << pad(format2(m.f1), kCell + 2);
    }
    out << pad(format2(r.macro.f1), kCell + 2) << format2(r.weighted.f1) << '\n';
  }
  return out.str();
}

}  // namespace msnt
