#include "persuade/metrics.hpp"

#include <fmt/format.h>

#include "persuade/errors.hpp"

namespace persuade {
namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

// 2PR/(P+R) written over counts; for single-label binary data this is
// exactly tp/n in floating point.
double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) { return ratio(2 * tp, 2 * tp + fp + fn); }

}  // namespace

ConfusionCounts confusion(std::span<const Label> predictions, std::span<const Label> gold) {
  if (predictions.size() != gold.size()) {
    throw ValidationError(fmt::format("{} predictions for {} gold labels", predictions.size(), gold.size()));
  }
  ConfusionCounts counts;
  counts.n = gold.size();
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const int p = label_index(predictions[i]);
    const int g = label_index(gold[i]);
    if ((p != 0 && p != 1) || (g != 0 && g != 1)) throw ValidationError("invalid label value");
    if (p == g) {
      ++counts.per_class[static_cast<std::size_t>(g)].tp;
    } else {
      ++counts.per_class[static_cast<std::size_t>(p)].fp;
      ++counts.per_class[static_cast<std::size_t>(g)].fn;
    }
  }
  return counts;
}

double micro_f1(const ConfusionCounts& counts) {
  if (counts.n == 0) throw ValidationError("micro-F1 of an empty evaluation set");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (const ClassTally& c : counts.per_class) {
    tp += c.tp;
    fp += c.fp;
    fn += c.fn;
  }
  return f1_from_counts(tp, fp, fn);
}

PerClassReport per_class_f1(const ConfusionCounts& counts) {
  if (counts.n == 0) throw ValidationError("per-class F1 of an empty evaluation set");
  PerClassReport report;
  for (std::size_t c = 0; c < report.per_class.size(); ++c) {
    const ClassTally& t = counts.per_class[c];
    ClassScores& s = report.per_class[c];
    s.precision = ratio(t.tp, t.tp + t.fp);
    s.recall = ratio(t.tp, t.tp + t.fn);
    s.f1 = f1_from_counts(t.tp, t.fp, t.fn);
  }
  report.macro_f1 = 0.5 * (report.per_class[0].f1 + report.per_class[1].f1);
  return report;
}

}  // namespace persuade
