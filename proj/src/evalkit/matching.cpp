#include "slapseg/evalkit/matching.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "slapseg/common/error.hpp"
#include "slapseg/common/rng.hpp"

namespace slapseg::eval {

BoxMatch greedy_match(std::span<const img::Box> detected, std::span<const img::Box> truth, double min_iou) {
  struct Cand {
    double iou;
    std::size_t d;
    std::size_t t;
  };
  std::vector<Cand> cands;
  for (std::size_t d = 0; d < detected.size(); ++d) {
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const double v = img::iou(detected[d], truth[t]);
      if (v > min_iou) cands.push_back({v, d, t});
    }
  }
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.iou > b.iou; });
  std::vector<bool> used_d(detected.size(), false);
  std::vector<bool> used_t(truth.size(), false);
  BoxMatch m;
  for (const Cand& c : cands) {
    if (used_d[c.d] || used_t[c.t]) continue;
    used_d[c.d] = true;
    used_t[c.t] = true;
    m.pairs.push_back({c.d, c.t, c.iou});
  }
  std::sort(m.pairs.begin(), m.pairs.end(), [](const auto& a, const auto& b) { return a.truth < b.truth; });
  for (std::size_t d = 0; d < detected.size(); ++d) {
    if (!used_d[d]) m.unmatched_detected.push_back(d);
  }
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (!used_t[t]) m.unmatched_truth.push_back(t);
  }
  return m;
}

img::GrayImage crop_print(const img::GrayImage& image, const img::RigidTransform& frame_to_image,
                          const img::Box& box, int size) {
  if (!box.valid()) throw ValidationError("crop_print needs a valid box");
  img::GrayImage out(size, size, 255);
  const double sx = box.width() / size;
  const double sy = box.height() / size;
  for (int y = 0; y < size; ++y) {
    for (int x = 0; x < size; ++x) {
      const img::Point p = frame_to_image.apply({box.left + (x + 0.5) * sx, box.top + (y + 0.5) * sy});
      out.at(x, y) = static_cast<std::uint8_t>(std::lround(img::sample_bilinear(image, p.x, p.y)));
    }
  }
  return out;
}

NccResult ncc_score(const img::GrayImage& a, const img::GrayImage& b) {
  if (a.width() != b.width() || a.height() != b.height()) throw ValidationError("ncc_score needs equal-size crops");
  const auto pa = a.pixels();
  const auto pb = b.pixels();
  const double n = static_cast<double>(pa.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    ma += pa[i];
    mb += pb[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    const double da = pa[i] - ma;
    const double db = pb[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return {0.0, true};
  return {std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0), false};
}

double ncc_scorer(const img::GrayImage& a, const img::GrayImage& b) { return ncc_score(a, b).score; }

std::vector<MatchTrial> match_protocol(std::span<const PrintSample> prints, const Scorer& scorer,
                                       int impostors_per_print, std::uint64_t seed) {
  if (impostors_per_print < 0) throw ValidationError("impostors_per_print must be non-negative");
  std::map<std::string, std::vector<std::size_t>> by_key;
  for (std::size_t i = 0; i < prints.size(); ++i) by_key[prints[i].finger_key].push_back(i);
  bool mated = false;
  for (const auto& [key, idx] : by_key) mated = mated || idx.size() >= 2;
  if (!mated) throw ValidationError("match_protocol: no finger has two captures");
  if (by_key.size() < 2) throw ValidationError("match_protocol: need at least two distinct fingers");

  std::vector<MatchTrial> trials;
  for (const auto& [key, idx] : by_key) {
    for (std::size_t a = 0; a < idx.size(); ++a) {
      for (std::size_t b = a + 1; b < idx.size(); ++b) {
        const PrintSample& p = prints[idx[a]];
        const PrintSample& g = prints[idx[b]];
        trials.push_back({p.id, g.id, scorer(p.crop, g.crop), TrialKind::kGenuine});
      }
    }
  }
  Rng rng(derive_seed(seed, "impostors"));
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < prints.size(); ++i) {
    pool.clear();
    for (std::size_t j = 0; j < prints.size(); ++j) {
      if (prints[j].finger_key != prints[i].finger_key) pool.push_back(j);
    }
    const std::size_t k = static_cast<std::size_t>(impostors_per_print);
    std::vector<std::size_t> chosen;
    if (pool.size() >= k) {
      // Partial Fisher-Yates: the first k entries become the sample.
      for (std::size_t s = 0; s < k; ++s) {
        std::swap(pool[s], pool[s + rng.below(pool.size() - s)]);
        chosen.push_back(pool[s]);
      }
    } else {
      for (std::size_t s = 0; s < k; ++s) chosen.push_back(pool[rng.below(pool.size())]);
    }
    for (std::size_t j : chosen) {
      trials.push_back({prints[i].id, prints[j].id, scorer(prints[i].crop, prints[j].crop), TrialKind::kImpostor});
    }
  }
  return trials;
}

}  // namespace slapseg::eval
