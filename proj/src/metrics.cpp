#include "sp3d/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>

namespace sp3d {

namespace {

double pair_mpjpe(const Pose3DSet& pred, int i, const Pose3DSet& gt, int k) {
  const int64_t j = pred.joint_count();
  double acc = 0.0;
  for (int64_t jj = 0; jj < j; ++jj)
    acc += (pred.joint(i, jj) - gt.joint(k, jj)).norm();
  return acc / static_cast<double>(j);
}

}  // namespace

MatchResult match_and_mpjpe(const Pose3DSet& pred, const Pose3DSet& gt) {
  MatchResult out;
  const int p = static_cast<int>(pred.person_count());
  const int g = static_cast<int>(gt.person_count());
  if (p == 0 || g == 0) return out;
  struct Cand {
    double e;
    int i, k;
  };
  std::vector<Cand> cands;
  cands.reserve(static_cast<size_t>(p) * g);
  for (int i = 0; i < p; ++i)
    for (int k = 0; k < g; ++k) cands.push_back({pair_mpjpe(pred, i, gt, k), i, k});
  std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.e != b.e) return a.e < b.e;
    if (a.i != b.i) return a.i < b.i;
    return a.k < b.k;
  });
  std::vector<bool> used_p(static_cast<size_t>(p), false), used_g(static_cast<size_t>(g), false);
  for (const Cand& c : cands) {
    if (used_p[static_cast<size_t>(c.i)] || used_g[static_cast<size_t>(c.k)]) continue;
    used_p[static_cast<size_t>(c.i)] = true;
    used_g[static_cast<size_t>(c.k)] = true;
    out.pairs.emplace_back(c.i, c.k);
    out.mpjpe.push_back(c.e);
  }
  return out;
}

double average_precision(const std::vector<FramePredictions>& preds,
                         const std::vector<Pose3DSet>& gts, double threshold_mm) {
  if (preds.size() != gts.size()) throw ShapeMismatch("preds/gts frame count differ");
  int64_t n_gt = 0;
  for (const auto& g : gts) n_gt += g.person_count();
  struct Det {
    double score;
    int frame, person;
  };
  std::vector<Det> dets;
  for (size_t f = 0; f < preds.size(); ++f)
    for (int64_t i = 0; i < preds[f].poses.person_count(); ++i)
      dets.push_back({preds[f].scores[static_cast<size_t>(i)], static_cast<int>(f),
                      static_cast<int>(i)});
  std::sort(dets.begin(), dets.end(), [](const Det& a, const Det& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.person < b.person;
  });
  if (dets.empty() || n_gt == 0) return 0.0;

  std::vector<std::vector<bool>> claimed(gts.size());
  for (size_t f = 0; f < gts.size(); ++f)
    claimed[f].assign(static_cast<size_t>(gts[f].person_count()), false);

  std::vector<double> precision, recall;
  int64_t tp = 0, fp = 0;
  for (const Det& d : dets) {
    const auto& gt = gts[static_cast<size_t>(d.frame)];
    int best = -1;
    double best_e = std::numeric_limits<double>::infinity();
    for (int k = 0; k < gt.person_count(); ++k) {
      if (claimed[static_cast<size_t>(d.frame)][static_cast<size_t>(k)]) continue;
      const double e = pair_mpjpe(preds[static_cast<size_t>(d.frame)].poses, d.person, gt, k);
      if (e < best_e) {
        best_e = e;
        best = k;
      }
    }
    if (best >= 0 && best_e <= threshold_mm) {
      claimed[static_cast<size_t>(d.frame)][static_cast<size_t>(best)] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(n_gt));
  }
  // All-points interpolation: precision envelope from the right.
  for (int64_t i = static_cast<int64_t>(precision.size()) - 2; i >= 0; --i)
    precision[static_cast<size_t>(i)] =
        std::max(precision[static_cast<size_t>(i)], precision[static_cast<size_t>(i + 1)]);
  double ap = 0.0;
  double prev_r = 0.0;
  for (size_t i = 0; i < recall.size(); ++i) {
    ap += (recall[i] - prev_r) * precision[i];
    prev_r = recall[i];
  }
  return ap;
}

double recall_at(const std::vector<FramePredictions>& preds,
                 const std::vector<Pose3DSet>& gts, double threshold_mm) {
  if (preds.size() != gts.size()) throw ShapeMismatch("preds/gts frame count differ");
  int64_t n_gt = 0, hit = 0;
  for (size_t f = 0; f < gts.size(); ++f) {
    n_gt += gts[f].person_count();
    const MatchResult m = match_and_mpjpe(preds[f].poses, gts[f]);
    for (double e : m.mpjpe)
      if (e <= threshold_mm) ++hit;
  }
  return n_gt > 0 ? static_cast<double>(hit) / static_cast<double>(n_gt) : 0.0;
}

PcpResult pcp(const std::vector<FramePredictions>& preds,
              const std::vector<Pose3DSet>& gts,
              const std::vector<std::pair<int, int>>& limb_pairs) {
  if (preds.size() != gts.size()) throw ShapeMismatch("preds/gts frame count differ");
  std::map<int, std::pair<int64_t, int64_t>> per_actor;  // id -> (correct, total)
  bool warned_zero = false;
  for (size_t f = 0; f < gts.size(); ++f) {
    const auto& gt = gts[f];
    const MatchResult m = match_and_mpjpe(preds[f].poses, gt);
    std::vector<int> match_of_gt(static_cast<size_t>(gt.person_count()), -1);
    for (const auto& [i, k] : m.pairs) match_of_gt[static_cast<size_t>(k)] = i;
    for (int k = 0; k < gt.person_count(); ++k) {
      const int actor = k < static_cast<int>(gt.person_ids.size())
                            ? gt.person_ids[static_cast<size_t>(k)]
                            : k;
      auto& [correct, total] = per_actor[actor];
      const int i = match_of_gt[static_cast<size_t>(k)];
      for (const auto& [a, b] : limb_pairs) {
        const double len = (gt.joint(k, a) - gt.joint(k, b)).norm();
        if (len <= 0.0) {
          if (!warned_zero) {
            std::cerr << "warning: zero-length gt limb skipped in PCP\n";
            warned_zero = true;
          }
          continue;
        }
        ++total;
        if (i < 0) continue;  // missed person: limb incorrect
        const auto& pp = preds[f].poses;
        if ((pp.joint(i, a) - gt.joint(k, a)).norm() <= 0.5 * len &&
            (pp.joint(i, b) - gt.joint(k, b)).norm() <= 0.5 * len)
          ++correct;
      }
    }
  }
  PcpResult out;
  double acc = 0.0;
  for (const auto& [actor, ct] : per_actor) {
    const double v = ct.second > 0 ? static_cast<double>(ct.first) / ct.second : 0.0;
    out.per_actor[actor] = v;
    acc += v;
  }
  out.average = per_actor.empty() ? 0.0 : acc / static_cast<double>(per_actor.size());
  return out;
}

EvalReport evaluate_poses(const std::vector<FramePredictions>& preds,
                          const std::vector<Pose3DSet>& gts,
                          const std::vector<std::pair<int, int>>& limb_pairs,
                          const std::vector<int>& ap_thresholds) {
  EvalReport r;
  for (int t : ap_thresholds) r.ap[t] = average_precision(preds, gts, t);
  r.recall_500 = recall_at(preds, gts, 500.0);
  double acc = 0.0;
  int64_t n = 0;
  for (size_t f = 0; f < gts.size(); ++f) {
    const MatchResult m = match_and_mpjpe(preds[f].poses, gts[f]);
    for (double e : m.mpjpe) {
      acc += e;
      ++n;
    }
    r.matched += static_cast<int64_t>(m.pairs.size());
    r.missed += gts[f].person_count() - static_cast<int64_t>(m.pairs.size());
    r.false_positives +=
        preds[f].poses.person_count() - static_cast<int64_t>(m.pairs.size());
  }
  r.mpjpe_mm = n > 0 ? acc / static_cast<double>(n) : 0.0;
  r.pcp = pcp(preds, gts, limb_pairs);
  return r;
}

}  // namespace sp3d
