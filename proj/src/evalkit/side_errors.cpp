#include "slapseg/evalkit/side_errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "slapseg/common/error.hpp"

namespace slapseg::eval {

std::string_view to_string(Side s) {
  switch (s) {
    case Side::kLeft: return "left";
    case Side::kTop: return "top";
    case Side::kRight: return "right";
    case Side::kBottom: return "bottom";
  }
  return "left";
}

double SideError::operator[](Side s) const {
  switch (s) {
    case Side::kLeft: return left;
    case Side::kTop: return top;
    case Side::kRight: return right;
    case Side::kBottom: return bottom;
  }
  return left;
}

SideError side_errors(const img::Box& detected, const img::Box& truth) {
  return {truth.left - detected.left, truth.top - detected.top, detected.right - truth.right,
          detected.bottom - truth.bottom};
}

MaeReport mae(std::span<const SideError> errors) {
  if (errors.empty()) throw ValidationError("mae needs at least one error");
  MaeReport r;
  r.count = errors.size();
  const double n = static_cast<double>(errors.size());
  for (Side s : kSides) {
    double sum = 0.0;
    for (const SideError& e : errors) sum += std::abs(e[s]);
    const double mean = sum / n;
    double var = 0.0;
    for (const SideError& e : errors) var += (std::abs(e[s]) - mean) * (std::abs(e[s]) - mean);
    r.sides[static_cast<int>(s)] = {mean, std::sqrt(var / n)};
  }
  return r;
}

bool ToleranceFlags::operator[](Side s) const {
  switch (s) {
    case Side::kLeft: return left;
    case Side::kTop: return top;
    case Side::kRight: return right;
    case Side::kBottom: return bottom;
  }
  return false;
}

ToleranceFlags tolerance_flags(const SideError& e) {
  return {e.left < -kSideTolerance, e.top < -kVerticalTolerance, e.right < -kSideTolerance,
          e.bottom < -kVerticalTolerance};
}

ToleranceSummary summarize_tolerance(std::span<const SideError> errors) {
  ToleranceSummary s;
  s.count = errors.size();
  for (const SideError& e : errors) {
    const ToleranceFlags f = tolerance_flags(e);
    for (Side side : kSides) s.flagged[static_cast<int>(side)] += f[side] ? 1 : 0;
    s.any += f.any() ? 1 : 0;
  }
  return s;
}

std::size_t Histogram::total() const {
  std::size_t t = 0;
  for (std::size_t c : counts) t += c;
  return t;
}

Histogram error_histogram(std::span<const SideError> errors, Side side, double bin_width) {
  if (!(bin_width > 0) || !std::isfinite(bin_width)) throw ValidationError("histogram bin width must be positive");
  Histogram h;
  h.side = side;
  h.bin_width = bin_width;
  if (errors.empty()) return h;
  double lo = errors[0][side];
  double hi = lo;
  for (const SideError& e : errors) {
    lo = std::min(lo, e[side]);
    hi = std::max(hi, e[side]);
  }
  const long long first = static_cast<long long>(std::floor(lo / bin_width));
  const long long last = static_cast<long long>(std::floor(hi / bin_width));
  h.origin = static_cast<double>(first) * bin_width;
  h.counts.assign(static_cast<std::size_t>(last - first + 1), 0);
  for (const SideError& e : errors) {
    h.counts[static_cast<std::size_t>(static_cast<long long>(std::floor(e[side] / bin_width)) - first)] += 1;
  }
  return h;
}

double tail_fraction_below(std::span<const SideError> errors, Side side, double limit) {
  if (errors.empty()) return 0.0;
  std::size_t n = 0;
  for (const SideError& e : errors) n += e[side] < limit ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(errors.size());
}

double tail_fraction_above(std::span<const SideError> errors, Side side, double limit) {
  if (errors.empty()) return 0.0;
  std::size_t n = 0;
  for (const SideError& e : errors) n += e[side] > limit ? 1 : 0;
  return static_cast<double>(n) / static_cast<double>(errors.size());
}

std::string histogram_csv(const Histogram& h) {
  std::string out = "bin_start,bin_end,count\n";
  char line[96];
  for (std::size_t k = 0; k < h.counts.size(); ++k) {
    const double a = h.origin + static_cast<double>(k) * h.bin_width;
    std::snprintf(line, sizeof line, "%.3f,%.3f,%zu\n", a, a + h.bin_width, h.counts[k]);
    out += line;
  }
  return out;
}

std::string mae_csv(const MaeReport& r) {
  std::string out = "side,mean_abs,std_abs,count\n";
  char line[96];
  for (Side s : kSides) {
    std::snprintf(line, sizeof line, "%s,%.4f,%.4f,%zu\n", std::string(to_string(s)).c_str(), r[s].mean, r[s].std,
                  r.count);
    out += line;
  }
  return out;
}

}  // namespace slapseg::eval
