#include <doctest.h>

#include <algorithm>
#include <random>

#include "metasre/error.hpp"
#include "metasre/eval.hpp"
#include "metasre/selftrain.hpp"

using namespace metasre;

namespace {

using Labels = std::vector<int>;

Metrics prf(const Labels& p, const Labels& g, std::optional<int> nr = 0) {
  return micro_prf(p, g, nr);
}

LabelDistribution random_distribution(std::mt19937_64& rng, std::size_t k) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  LabelDistribution d{std::vector<double>(k)};
  double total = 0.0;
  for (auto& v : d.probs) total += (v = u(rng));
  for (auto& v : d.probs) v /= total;
  return d;
}

}  // namespace

TEST_CASE("hand-counted micro scores") {
  const Metrics m = prf({1, 0, 2, 1}, {1, 0, 1, 1});
  CHECK(m.correct == 2);
  CHECK(m.predicted == 3);
  CHECK(m.gold == 3);
  CHECK(m.precision == 2.0 / 3.0);
  CHECK(m.recall == 2.0 / 3.0);
  CHECK(m.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  REQUIRE(m.per_class.size() == 3);
  CHECK(m.per_class[1].true_positive == 2);
  CHECK(m.per_class[1].false_negative == 1);
  CHECK(m.per_class[2].false_positive == 1);
  CHECK_FALSE(m.empty);
}

TEST_CASE("no_relation edge cases") {
  const Metrics silent = prf({0, 0, 0}, {1, 2, 0});
  CHECK(silent.precision == 0.0);
  CHECK(silent.recall == 0.0);
  CHECK(silent.f1 == 0.0);

  // Correct no_relation predictions earn nothing.
  const Metrics negatives = prf({0, 0}, {0, 0});
  CHECK(negatives.correct == 0);
  CHECK(negatives.f1 == 0.0);

  const Metrics perfect = prf({1, 2, 3}, {1, 2, 3});
  CHECK(perfect.precision == 1.0);
  CHECK(perfect.recall == 1.0);
  CHECK(perfect.f1 == 1.0);

  // Without a no_relation class every label is a relation.
  const Metrics plain = prf({0, 1}, {0, 0}, std::nullopt);
  CHECK(plain.precision == 0.5);
  CHECK(plain.recall == 0.5);

  // Predicting a relation for a no_relation gold costs precision only.
  const Metrics spurious = prf({1, 2}, {1, 0});
  CHECK(spurious.precision == 0.5);
  CHECK(spurious.recall == 1.0);

  const Metrics none = prf({}, {});
  CHECK(none.empty);
  CHECK(none.f1 == 0.0);
}

TEST_CASE("micro scores reject mismatched inputs") {
  try {
    prf({1, 2}, {1});
    FAIL("expected ShapeError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeError);
  }
  CHECK_THROWS_AS(prf({-1}, {0}), Error);
}

TEST_CASE("micro score properties on random label sequences") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 300; ++trial) {
    const int k = 2 + trial % 6;
    std::uniform_int_distribution<int> label(0, k - 1);
    std::uniform_int_distribution<std::size_t> len(0, 40);
    Labels p(len(rng)), g(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      g[i] = label(rng);
      p[i] = rng() % 3 == 0 ? g[i] : label(rng);
    }
    const std::optional<int> nr = trial % 2 ? std::optional<int>(0) : std::nullopt;
    const Metrics m = micro_prf(p, g, nr);
    for (double v : {m.precision, m.recall, m.f1}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    CHECK(m.f1 <= std::max(m.precision, m.recall) + 1e-15);
    if (m.precision + m.recall > 0.0) {
      CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall / (m.precision + m.recall)));
    }

    std::vector<std::size_t> order(p.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    Labels ps, gs;
    for (std::size_t i : order) {
      ps.push_back(p[i]);
      gs.push_back(g[i]);
    }
    const Metrics s = micro_prf(ps, gs, nr);
    CHECK(s.precision == m.precision);
    CHECK(s.recall == m.recall);
    CHECK(s.f1 == m.f1);
  }
}

TEST_CASE("label distributions") {
  const auto d = label_distribution(Labels{0, 2, 2, 3}, 4);
  CHECK(d.probs == std::vector<double>{0.25, 0.0, 0.5, 0.25});
  CHECK(label_distribution(Labels{}, 3).probs == std::vector<double>{0.0, 0.0, 0.0});
  CHECK_THROWS_AS(label_distribution(Labels{4}, 4), Error);
}

TEST_CASE("distribution distance examples") {
  const LabelDistribution uniform{{0.25, 0.25, 0.25, 0.25}};
  const LabelDistribution first{{1.0, 0.0, 0.0, 0.0}};
  const LabelDistribution last{{0.0, 0.0, 0.0, 1.0}};
  CHECK(distribution_l1(uniform, uniform) == 0.0);
  CHECK(distribution_l1(first, last) == 2.0);
  CHECK(distribution_l1(uniform, first) == 1.5);
  try {
    distribution_l1(uniform, LabelDistribution{{0.5, 0.5}});
    FAIL("expected ShapeError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ShapeError);
  }
}

TEST_CASE("distribution distance is a metric") {
  std::mt19937_64 rng(32);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t k = 2 + static_cast<std::size_t>(trial % 9);
    const auto a = random_distribution(rng, k);
    const auto b = random_distribution(rng, k);
    const auto c = random_distribution(rng, k);
    const double ab = distribution_l1(a, b);
    CHECK(ab == distribution_l1(b, a));
    CHECK(ab > 0.0);
    CHECK(ab <= 2.0 + 1e-12);
    CHECK(distribution_l1(a, a) == 0.0);
    CHECK(ab <= distribution_l1(a, c) + distribution_l1(c, b) + 1e-12);
  }
}

TEST_CASE("pseudo label scores read the shadow golds") {
  const ShadowLabels shadow({1, 0, 2, 1});
  const std::vector<PseudoLabel> exact = {{0, 1, 0.9}, {2, 2, 0.8}, {3, 1, 0.7}};
  CHECK(pseudo_label_f1(exact, shadow, 0).f1 == 1.0);

  const Metrics none = pseudo_label_f1({}, shadow, 0);
  CHECK(none.empty);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);

  const std::vector<PseudoLabel> half = {{0, 1, 0.9}, {3, 2, 0.5}};
  CHECK(pseudo_label_f1(half, shadow, 0).f1 == 0.5);

  const std::vector<PseudoLabel> dangling = {{4, 1, 0.9}};
  try {
    pseudo_label_f1(dangling, shadow, 0);
    FAIL("expected DiagnosticsError");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DiagnosticsError);
  }
}
