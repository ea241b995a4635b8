#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "persuade/labels.hpp"

namespace persuade {

struct ClassTally {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  friend bool operator==(const ClassTally&, const ClassTally&) = default;
};

struct ConfusionCounts {
  std::array<ClassTally, 2> per_class{};  // indexed by label_index
  std::size_t n = 0;

  const ClassTally& of(Label label) const { return per_class[label_index(label)]; }
  std::size_t correct() const { return per_class[0].tp + per_class[1].tp; }

  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct PerClassReport {
  std::array<ClassScores, 2> per_class{};
  double macro_f1 = 0.0;

  const ClassScores& of(Label label) const { return per_class[label_index(label)]; }
};

/// Throws ValidationError on a length mismatch.
ConfusionCounts confusion(std::span<const Label> predictions, std::span<const Label> gold);

/// Micro-averaged F1 over both classes (equal to accuracy for single-label
/// binary data). Throws ValidationError when n == 0.
double micro_f1(const ConfusionCounts& counts);

/// Per-class precision/recall/F1 with 0/0 taken as 0, plus their macro mean.
PerClassReport per_class_f1(const ConfusionCounts& counts);

}  // namespace persuade
