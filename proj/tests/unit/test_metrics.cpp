#include <doctest.h>

#include <vector>

#include "persuade/errors.hpp"
#include "persuade/metrics.hpp"
#include "persuade/rng.hpp"

using namespace persuade;

namespace {

constexpr Label T = Label::True;
constexpr Label F = Label::False;

std::vector<Label> random_labels(Rng& rng, std::size_t n) {
  std::vector<Label> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(rng.below(2) ? T : F);
  return out;
}

// Independent reference: walk the pairs and count per class directly.
double brute_force_micro_f1(const std::vector<Label>& pred, const std::vector<Label>& gold) {
  long tp = 0, fp = 0, fn = 0;
  for (const Label c : {F, T}) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] == c && gold[i] == c) ++tp;
      if (pred[i] == c && gold[i] != c) ++fp;
      if (pred[i] != c && gold[i] == c) ++fn;
    }
  }
  if (tp == 0) return 0.0;
  return static_cast<double>(2 * tp) / static_cast<double>(2 * tp + fp + fn);
}

std::vector<Label> swapped(std::vector<Label> v) {
  for (auto& l : v) l = other(l);
  return v;
}

}  // namespace

TEST_CASE("confusion on the three-row fixture") {
  const std::vector<Label> pred{T, T, F};
  const std::vector<Label> gold{T, F, F};
  const auto c = confusion(pred, gold);
  CHECK(c.n == 3);
  CHECK(c.of(T) == ClassTally{1, 1, 0});
  CHECK(c.of(F) == ClassTally{1, 0, 1});
  CHECK(micro_f1(c) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));

  const auto report = per_class_f1(c);
  CHECK(report.of(T).precision == doctest::Approx(0.5));
  CHECK(report.of(T).recall == doctest::Approx(1.0));
  CHECK(report.of(T).f1 == doctest::Approx(2.0 / 3.0));
  CHECK(report.of(F).precision == doctest::Approx(1.0));
  CHECK(report.of(F).recall == doctest::Approx(0.5));
  CHECK(report.of(F).f1 == doctest::Approx(2.0 / 3.0));
  CHECK(report.macro_f1 == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("degenerate and extreme cases") {
  const auto empty = confusion(std::vector<Label>{}, std::vector<Label>{});
  CHECK(empty.n == 0);
  CHECK(empty.correct() == 0);
  CHECK_THROWS_AS(micro_f1(empty), ValidationError);
  CHECK_THROWS_AS(per_class_f1(empty), ValidationError);
  CHECK_THROWS_AS(confusion(std::vector<Label>{T}, std::vector<Label>{T, F}), ValidationError);

  const std::vector<Label> gold{T, F, F, T, T};
  const auto perfect = confusion(gold, gold);
  for (const Label l : kAllLabels) {
    CHECK(perfect.of(l).fp == 0);
    CHECK(perfect.of(l).fn == 0);
  }
  CHECK(micro_f1(perfect) == 1.0);
  CHECK(micro_f1(confusion(swapped(gold), gold)) == 0.0);

  const auto single = per_class_f1(confusion(std::vector<Label>{T}, std::vector<Label>{T}));
  CHECK(single.of(T).f1 == 1.0);
  CHECK(single.of(F).f1 == 0.0);
  CHECK(single.of(F).precision == 0.0);
}

TEST_CASE("micro_f1 matches the counting oracle and accuracy on random instances") {
  Rng rng(1234);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.below(20);
    const auto gold = random_labels(rng, n);
    const auto pred = random_labels(rng, n);
    const auto c = confusion(pred, gold);

    std::size_t hits = 0;
    for (std::size_t i = 0; i < n; ++i) hits += pred[i] == gold[i];
    CHECK(micro_f1(c) == brute_force_micro_f1(pred, gold));
    CHECK(micro_f1(c) == static_cast<double>(hits) / static_cast<double>(n));

    // Table invariants.
    const std::size_t tp = c.per_class[0].tp + c.per_class[1].tp;
    const std::size_t fp = c.per_class[0].fp + c.per_class[1].fp;
    const std::size_t fn = c.per_class[0].fn + c.per_class[1].fn;
    CHECK(tp <= n);
    CHECK(fp == n - tp);
    CHECK(fn == n - tp);
    CHECK(c.of(T).tp + c.of(T).fn + c.of(F).tp + c.of(F).fn == n);

    CHECK(micro_f1(confusion(swapped(pred), swapped(gold))) == micro_f1(c));
  }
}

TEST_CASE("fixing a wrong prediction never lowers micro_f1") {
  Rng rng(77);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng.below(30);
    const auto gold = random_labels(rng, n);
    auto pred = random_labels(rng, n);
    std::vector<std::size_t> wrong;
    for (std::size_t i = 0; i < n; ++i)
      if (pred[i] != gold[i]) wrong.push_back(i);
    if (wrong.empty()) continue;
    const double before = micro_f1(confusion(pred, gold));
    const std::size_t k = wrong[rng.below(wrong.size())];
    pred[k] = gold[k];
    CHECK(micro_f1(confusion(pred, gold)) >= before);
  }
}

TEST_CASE("uniform random predictions score about one half") {
  Rng rng(2024);
  const auto gold = random_labels(rng, 10000);
  const auto pred = random_labels(rng, 10000);
  CHECK(std::abs(micro_f1(confusion(pred, gold)) - 0.5) <= 0.02);
}
