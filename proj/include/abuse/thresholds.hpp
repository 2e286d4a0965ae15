#pragma once

// Per-language decision thresholds tuned for positive-class F1.

#include <cmath>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "abuse/corpus.hpp"
#include "abuse/error.hpp"
#include "abuse/format.hpp"
#include "abuse/metrics.hpp"

namespace abuse {

struct ThresholdMap {
  std::map<LanguageTag, double> per_language;
  double global_threshold = 0.5;

  double threshold_for(const LanguageTag& language) const {
    const auto it = per_language.find(language);
    return it == per_language.end() ? global_threshold : it->second;
  }

  friend bool operator==(const ThresholdMap&, const ThresholdMap&) = default;
};

/// Grid {0, 1/m, ..., 1} with m = 1/grid_step. m must be a positive even
/// integer (up to 1e-9) so that 0.5 is an exact grid point.
inline std::vector<double> threshold_grid(double grid_step) {
  if (!(grid_step > 0.0 && grid_step <= 0.5)) fail(ErrorKind::BadParams, "grid_step must be in (0, 0.5]");
  const double inverse = 1.0 / grid_step;
  const auto m = static_cast<long long>(std::llround(inverse));
  if (std::abs(inverse - static_cast<double>(m)) > 1e-9 || m % 2 != 0) {
    fail(ErrorKind::BadParams, "1/grid_step must be an even integer");
  }
  std::vector<double> grid;
  for (long long i = 0; i <= m; ++i) grid.push_back(static_cast<double>(i) / static_cast<double>(m));
  return grid;
}

/// Best grid threshold by positive-class F1 over the given rows; ties go to
/// the highest threshold.
inline double best_threshold(std::span<const double> probs, std::span<const int> y, std::span<const std::size_t> rows,
                             const std::vector<double>& grid) {
  double best_t = grid.front();
  double best_f1 = -1.0;
  for (double t : grid) {
    Confusion c;
    for (auto i : rows) {
      if (probs[i] >= t) {
        ++(y[i] == 1 ? c.tp : c.fp);
      } else {
        ++(y[i] == 1 ? c.fn : c.tn);
      }
    }
    const double f1 = f1_from(c, Averaging::Positive);
    if (f1 >= best_f1) {
      best_f1 = f1;
      best_t = t;
    }
  }
  return best_t;
}

inline ThresholdMap tune_thresholds(std::span<const double> probs, std::span<const int> y,
                                    std::span<const LanguageTag> languages, double grid_step = 0.01,
                                    std::size_t min_count = 1) {
  if (probs.empty()) fail(ErrorKind::EmptyInput, "no probabilities to tune on");
  if (probs.size() != y.size() || probs.size() != languages.size()) {
    fail(ErrorKind::LengthMismatch, "probabilities, labels and languages differ in length");
  }
  const auto grid = threshold_grid(grid_step);
  std::vector<std::size_t> all(probs.size());
  std::map<LanguageTag, std::vector<std::size_t>> by_language;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    all[i] = i;
    by_language[languages[i]].push_back(i);
  }
  ThresholdMap map;
  map.global_threshold = best_threshold(probs, y, all, grid);
  for (const auto& [language, rows] : by_language) {
    if (rows.size() >= min_count) map.per_language[language] = best_threshold(probs, y, rows, grid);
  }
  return map;
}

inline std::vector<int> apply_thresholds(std::span<const double> probs, std::span<const LanguageTag> languages,
                                         const ThresholdMap& map) {
  if (probs.size() != languages.size()) fail(ErrorKind::LengthMismatch, "probabilities and languages differ in length");
  std::vector<int> out(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= map.threshold_for(languages[i]) ? 1 : 0;
  return out;
}

/// `global=<t>` then `<language>=<t>` lines in language order.
inline void write_thresholds(std::ostream& out, const ThresholdMap& map) {
  out << "global=" << format_double(map.global_threshold) << '\n';
  for (const auto& [language, t] : map.per_language) out << language.code() << '=' << format_double(t) << '\n';
}

inline ThresholdMap parse_thresholds(std::string_view text) {
  ThresholdMap map;
  bool global_seen = false;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) fail(ErrorKind::ParseError, "threshold line without '='");
    const double t = parse_double(line.substr(eq + 1));
    if (!(t >= 0.0 && t <= 1.0)) fail(ErrorKind::ParseError, "threshold outside [0,1]");
    if (line.substr(0, eq) == "global") {
      map.global_threshold = t;
      global_seen = true;
    } else {
      map.per_language[LanguageTag(std::string(line.substr(0, eq)))] = t;
    }
  }
  if (!global_seen) fail(ErrorKind::ParseError, "threshold file has no global entry");
  return map;
}

}  // namespace abuse
