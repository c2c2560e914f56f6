#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "slapseg/evalkit/matching.hpp"

namespace slapseg::eval {

/// A trial is accepted when its score is >= threshold.
struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocReport {
  /// Thresholds in decreasing order: one above every score, the midpoints
  /// between consecutive distinct scores, and one below every score. FPR and
  /// TPR therefore run from (0, 0) up to (1, 1).
  std::vector<RocPoint> points;
  std::size_t genuine = 0;
  std::size_t impostor = 0;
  /// Requested FPR -> TPR at its operating point.
  std::map<double, double> tpr_at;
};

inline constexpr double kReportFprs[] = {0.001, 0.01, 0.1};

/// Throws ValidationError unless both genuine and impostor trials exist.
/// Fills tpr_at for `fprs`.
RocReport roc(std::span<const MatchTrial> trials, std::span<const double> fprs = kReportFprs);

/// The most permissive operating point whose FPR does not exceed `fpr`,
/// i.e. the highest TPR attainable under that FPR bound.
RocPoint operating_point(const RocReport& r, double fpr);
double tpr_at_fpr(const RocReport& r, double fpr = 0.001);

/// threshold,fpr,tpr
std::string roc_csv(const RocReport& r);

}  // namespace slapseg::eval
