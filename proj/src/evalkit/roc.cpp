#include "slapseg/evalkit/roc.hpp"

#include <algorithm>
#include <cstdio>

#include "slapseg/common/error.hpp"

namespace slapseg::eval {

RocReport roc(std::span<const MatchTrial> trials, std::span<const double> fprs) {
  std::vector<double> gen;
  std::vector<double> imp;
  for (const MatchTrial& t : trials) (t.kind == TrialKind::kGenuine ? gen : imp).push_back(t.score);
  if (gen.empty() || imp.empty()) throw ValidationError("roc needs both genuine and impostor trials");
  std::sort(gen.begin(), gen.end(), std::greater<>());
  std::sort(imp.begin(), imp.end(), std::greater<>());
  std::vector<double> all(gen);
  all.insert(all.end(), imp.begin(), imp.end());
  std::sort(all.begin(), all.end(), std::greater<>());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  std::vector<double> thresholds{all.front() + 1.0};
  for (std::size_t i = 0; i + 1 < all.size(); ++i) thresholds.push_back(0.5 * (all[i] + all[i + 1]));
  thresholds.push_back(all.back() - 1.0);

  RocReport r;
  r.genuine = gen.size();
  r.impostor = imp.size();
  std::size_t g = 0;
  std::size_t f = 0;
  for (double t : thresholds) {
    while (g < gen.size() && gen[g] >= t) ++g;
    while (f < imp.size() && imp[f] >= t) ++f;
    r.points.push_back({t, static_cast<double>(f) / static_cast<double>(imp.size()),
                        static_cast<double>(g) / static_cast<double>(gen.size())});
  }
  for (double q : fprs) r.tpr_at[q] = tpr_at_fpr(r, q);
  return r;
}

RocPoint operating_point(const RocReport& r, double fpr) {
  if (r.points.empty()) throw ValidationError("empty ROC");
  RocPoint best = r.points.front();
  for (const RocPoint& p : r.points) {
    if (p.fpr <= fpr) best = p;  // points run toward lower thresholds
  }
  return best;
}

double tpr_at_fpr(const RocReport& r, double fpr) { return operating_point(r, fpr).tpr; }

std::string roc_csv(const RocReport& r) {
  std::string out = "threshold,fpr,tpr\n";
  char line[96];
  for (const RocPoint& p : r.points) {
    std::snprintf(line, sizeof line, "%.6f,%.6f,%.6f\n", p.threshold, p.fpr, p.tpr);
    out += line;
  }
  return out;
}

}  // namespace slapseg::eval
