#include "efbm/bound_report.hpp"

#include <algorithm>
#include <cmath>

namespace efbm {

std::string to_string(BoundStatus status) {
  switch (status) {
    case BoundStatus::pass:
      return "pass";
    case BoundStatus::fail:
      return "fail";
    case BoundStatus::inconclusive:
      return "inconclusive";
    case BoundStatus::partial:
      return "partial";
  }
  return "unknown";
}

BoundReport::BoundReport(std::string id, std::string statement_text)
    : bound_id(std::move(id)), statement(std::move(statement_text)) {}

namespace {

bool record(BoundReport& r, double x, double lhs, double rhs, double margin, double se) {
  const double bound_scale = std::isfinite(rhs) ? std::abs(rhs) : 0.0;
  const double tol = r.relative_tolerance * bound_scale + r.se_multiplier * se;
  ++r.points_checked;
  r.max_margin = std::max(r.max_margin, margin);
  r.max_excess = std::max(r.max_excess, margin - tol);
  const bool ok = !(margin > tol) && !std::isnan(margin);
  if (!ok) ++r.violations;
  if (r.points.size() < r.detail_limit) r.points.push_back({x, lhs, rhs, margin, se, tol});
  return ok;
}

}  // namespace

bool BoundReport::check_upper(double x, double lhs, double rhs, double se) {
  const double margin = std::isinf(rhs) && rhs > 0 ? -std::numeric_limits<double>::infinity() : lhs - rhs;
  return record(*this, x, lhs, rhs, margin, se);
}

bool BoundReport::check_lower(double x, double lhs, double rhs, double se) {
  const double margin = std::isinf(rhs) && rhs < 0 ? -std::numeric_limits<double>::infinity() : rhs - lhs;
  return record(*this, x, lhs, rhs, margin, se);
}

void BoundReport::merge(const BoundReport& other) {
  points_checked += other.points_checked;
  violations += other.violations;
  inconclusive_points += other.inconclusive_points;
  max_margin = std::max(max_margin, other.max_margin);
  max_excess = std::max(max_excess, other.max_excess);
  for (const auto& p : other.points) {
    if (points.size() >= detail_limit) break;
    points.push_back(p);
  }
}

BoundStatus BoundReport::status() const {
  if (violations > 0) return BoundStatus::fail;
  if (coverage < 1.0) return BoundStatus::partial;
  if (points_checked == 0 && inconclusive_points > 0) return BoundStatus::inconclusive;
  return BoundStatus::pass;
}

namespace {

nlohmann::json finite_or_null(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace

nlohmann::json to_json(const BoundReport& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : r.points) {
    pts.push_back({{"x", finite_or_null(p.x)},
                   {"lhs", finite_or_null(p.lhs)},
                   {"rhs", finite_or_null(p.rhs)},
                   {"margin", finite_or_null(p.margin)},
                   {"se", p.se},
                   {"tolerance", finite_or_null(p.tolerance)}});
  }
  nlohmann::json j{
      {"bound_id", r.bound_id},
      {"statement", r.statement},
      {"status", to_string(r.status())},
      {"points_checked", r.points_checked},
      {"violations", r.violations},
      {"inconclusive_points", r.inconclusive_points},
      {"max_margin", finite_or_null(r.max_margin)},
      {"max_excess", finite_or_null(r.max_excess)},
      {"tolerance", {{"relative", r.relative_tolerance}, {"se_multiplier", r.se_multiplier}}},
      {"coverage", r.coverage},
      {"implied_constant", r.implied_constant ? finite_or_null(*r.implied_constant) : nlohmann::json(nullptr)},
      {"points", std::move(pts)},
      {"notes", r.notes},
  };
  if (!r.extra.empty()) j["extra"] = r.extra;
  return j;
}

}  // namespace efbm
