#pragma once

#include <nlohmann/json.hpp>

#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace efbm {

enum class BoundStatus { pass, fail, inconclusive, partial };
std::string to_string(BoundStatus status);

/// One evaluation point of an inequality lhs <= rhs (or lhs >= rhs).
struct BoundPoint {
  double x = 0.0;
  double lhs = 0.0;
  double rhs = 0.0;
  double margin = 0.0;  // signed excess over the bound; > 0 is on the wrong side
  double se = 0.0;
  double tolerance = 0.0;
};

/// Pass/fail record of one inequality. A point violates the bound when its
/// margin exceeds relative_tolerance * |rhs| + se_multiplier * SE.
struct BoundReport {
  std::string bound_id;
  std::string statement;
  double relative_tolerance = 1e-9;
  double se_multiplier = 3.0;
  std::size_t points_checked = 0;
  std::size_t violations = 0;
  std::size_t inconclusive_points = 0;
  double max_margin = -std::numeric_limits<double>::infinity();
  double max_excess = -std::numeric_limits<double>::infinity();  // max of margin - tolerance
  double coverage = 1.0;
  std::optional<double> implied_constant;
  std::vector<BoundPoint> points;  // kept only up to `detail_limit`
  std::size_t detail_limit = 256;
  std::vector<std::string> notes;
  nlohmann::json extra = nlohmann::json::object();

  BoundReport() = default;
  BoundReport(std::string id, std::string statement_text);

  /// Records lhs <= rhs; returns false on violation.
  bool check_upper(double x, double lhs, double rhs, double se = 0.0);
  /// Records lhs >= rhs; returns false on violation.
  bool check_lower(double x, double lhs, double rhs, double se = 0.0);
  void mark_inconclusive(std::size_t count = 1) { inconclusive_points += count; }

  /// Combines another report on the same inequality (detail points are appended up to the limit).
  void merge(const BoundReport& other);

  BoundStatus status() const;
  bool passed() const { return status() == BoundStatus::pass || status() == BoundStatus::inconclusive; }
};

nlohmann::json to_json(const BoundReport& report);

}  // namespace efbm
