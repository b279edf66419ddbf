#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <set>

#include "metasre/checkpoint.hpp"
#include "metasre/error.hpp"
#include "metasre/networks.hpp"
#include "metasre/optim.hpp"
#include "metasre/training.hpp"
#include "support.hpp"

using namespace metasre;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::IoError;
}

ClassifierParams perturbed(std::uint64_t seed, const NetworkDims& dims, double scale) {
  ClassifierParams p = init_params(seed, dims, Role::Classifier);
  std::mt19937_64 rng(seed + 100);
  auto tensors = p.flatten();
  for (auto& t : tensors) {
    for (auto& v : t.values()) v *= scale;
  }
  p.assign(std::move(tensors));
  return p;
}

}  // namespace

TEST_CASE("initialization is seeded, distinct per seed, and rejects K < 2") {
  const NetworkDims dims = testing::tiny_dims(4, 3, 19);
  const ClassifierParams a = init_params(1, dims, Role::Classifier);
  CHECK(a == init_params(1, dims, Role::Classifier));
  CHECK_FALSE(a.flatten() == init_params(2, dims, Role::Classifier).flatten());
  CHECK(a.weights.dense2_w.cols() == 19);
  CHECK(a.weights.dense1_w.rows() == 2 * dims.encoder.hidden);
  CHECK(a.weights.dense1_w.cols() == dims.encoder.hidden);
  for (const auto& t : a.flatten()) {
    for (double v : t.values()) CHECK((v >= -0.1 && v <= 0.1));
  }
  CHECK(kind_of([] { init_params(1, testing::tiny_dims(4, 3, 1), Role::Classifier); }) ==
        ErrorKind::ConfigError);
}

TEST_CASE("zero parameters give the uniform distribution") {
  const NetworkDims dims = testing::tiny_dims(4, 3, 5);
  std::mt19937_64 rng(41);
  const auto batch = testing::marked(testing::tiny_mentions(rng, 4, 5), testing::tiny_vocab());
  const Tensor p = classify(batch, as_nodes(zero_params(dims, Role::Classifier), false)).value();
  for (double v : p.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("outputs are distributions for random mentions and parameters") {
  std::mt19937_64 rng(42);
  const NetworkDims dims = testing::tiny_dims(6, 4, 4);
  const auto mentions = testing::tiny_mentions(rng, 100, 4);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ClassifierParams p = perturbed(seed, dims, 10.0);
    for (std::size_t i = seed * 10; i < seed * 10 + 10; ++i) {
      const auto probs = classify(mentions[i], testing::tiny_vocab(), p);
      double total = 0.0;
      for (double v : probs) {
        CHECK(v >= 0.0);
        total += v;
      }
      CHECK(std::abs(total - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("argmax is unchanged by a uniform shift of the output bias") {
  std::mt19937_64 rng(43);
  const NetworkDims dims = testing::tiny_dims(6, 4, 4);
  const auto batch = testing::marked(testing::tiny_mentions(rng, 20, 4), testing::tiny_vocab());
  ClassifierParams p = perturbed(7, dims, 10.0);
  const auto before = predict_labels(batch, p);
  for (auto& v : p.weights.dense2_b.values()) v += 3.75;
  CHECK(predict_labels(batch, p) == before);
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  const std::vector<double> row = {0.1, 0.4, 0.4, 0.1};
  CHECK(argmax(row) == 1);
}

TEST_CASE("loss examples") {
  const NetworkDims dims = testing::tiny_dims(4, 3, 2);
  std::mt19937_64 rng(44);
  const auto ms = testing::tiny_mentions(rng, 4, 2);
  const auto golden = testing::labeled_examples({ms[0], ms[1]}, testing::tiny_vocab());
  const auto seqs = testing::marked({ms[2], ms[3]}, testing::tiny_vocab());
  const std::vector<WeightedExample> pseudo = {{seqs[0], 1, 0.5}, {seqs[1], 0, 0.0}};
  const ClassifierNodes zero = as_nodes(zero_params(dims, Role::Classifier), false);

  // Uniform predictions: every cross-entropy is ln 2.
  const double ln2 = std::log(2.0);
  CHECK(classification_loss(golden, {}, zero).value().item() == doctest::Approx(2 * ln2));
  CHECK(classification_loss(golden, pseudo, zero).value().item() ==
        doctest::Approx(2 * ln2 + 0.5 * ln2));

  // One perfectly predicted golden row and one pseudo row at p = 0.5.
  const Tensor probs(2, 2, {1.0, 0.0, 0.5, 0.5});
  const std::vector<int> labels = {0, 1};
  const ad::Node rows = ad::cross_entropy_rows(ad::constant(probs), ad::one_hot(labels, 2));
  const ad::Node total = ad::weighted_sum(rows, ad::constant(Tensor(2, 1, {1.0, 0.5})));
  CHECK(total.value().item() == doctest::Approx(0.5 * ln2).epsilon(1e-15));

  // Zero weights drop the pseudo term whatever it contains.
  const ClassifierNodes random = as_nodes(perturbed(3, dims, 10.0), false);
  const std::vector<WeightedExample> muted = {{seqs[0], 1, 0.0}, {seqs[1], 0, 0.0}};
  CHECK(classification_loss(golden, muted, random).value().item() ==
        doctest::Approx(classification_loss(golden, {}, random).value().item()).epsilon(1e-14));

  CHECK(kind_of([&] { classification_loss({}, pseudo, zero); }) == ErrorKind::EmptyBatch);
  const std::vector<WeightedExample> heavy = {{seqs[0], 1, 1.5}};
  CHECK(kind_of([&] { classification_loss(golden, heavy, zero); }) == ErrorKind::InvalidValue);
}

TEST_CASE("loss is monotone in each pseudo weight") {
  std::mt19937_64 rng(45);
  const NetworkDims dims = testing::tiny_dims(4, 3, 3);
  const auto ms = testing::tiny_mentions(rng, 6, 3);
  const auto golden = testing::labeled_examples({ms[0], ms[1]}, testing::tiny_vocab());
  const auto seqs = testing::marked({ms[2], ms[3], ms[4]}, testing::tiny_vocab());
  const ClassifierNodes w = as_nodes(perturbed(5, dims, 5.0), false);
  for (int trial = 0; trial < 20; ++trial) {
    std::uniform_real_distribution<double> u(0.0, 0.9);
    std::vector<WeightedExample> pseudo;
    for (std::size_t i = 0; i < seqs.size(); ++i) pseudo.push_back({seqs[i], int(i % 3), u(rng)});
    const double base = classification_loss(golden, pseudo, w).value().item();
    for (auto& p : pseudo) {
      p.weight += 0.1;
      CHECK(classification_loss(golden, pseudo, w).value().item() >= base);
      p.weight -= 0.1;
    }
  }
}

TEST_CASE("full network loss gradient matches finite differences") {
  std::mt19937_64 rng(46);
  const NetworkDims dims = testing::tiny_dims(4, 3, 3);
  const auto ms = testing::tiny_mentions(rng, 4, 3);
  const auto golden = testing::labeled_examples({ms[0], ms[1]}, testing::tiny_vocab());
  const auto seqs = testing::marked({ms[2], ms[3]}, testing::tiny_vocab());
  const std::vector<WeightedExample> pseudo = {{seqs[0], 2, 0.7}, {seqs[1], 0, 0.3}};
  const auto f = [&](const std::vector<ad::Node>& x) {
    return classification_loss(golden, pseudo, unflatten(x));
  };
  CHECK(testing::gradient_check(f, perturbed(9, dims, 8.0).flatten()) < 1e-6);
}

TEST_CASE("adam step agrees with a scalar reference implementation") {
  const NetworkDims dims = testing::tiny_dims(4, 3, 2);
  ClassifierParams p = init_params(3, dims, Role::Classifier);
  std::mt19937_64 rng(47);
  OptimState state = make_optim_state(p, OptimizerKind::Adam, 0.01);
  std::vector<Tensor> ref = p.flatten();
  std::vector<Tensor> m, v;
  for (const auto& t : ref) {
    m.emplace_back(t.rows(), t.cols());
    v.emplace_back(t.rows(), t.cols());
  }
  for (int step = 1; step <= 3; ++step) {
    std::vector<Tensor> grads;
    for (const auto& t : ref) grads.push_back(testing::random_tensor(rng, t.rows(), t.cols()));
    p = sgd_adam_step(p, grads, state);
    for (std::size_t k = 0; k < ref.size(); ++k) {
      for (std::size_t i = 0; i < ref[k].size(); ++i) {
        const double g = grads[k][i];
        m[k][i] = 0.9 * m[k][i] + 0.1 * g;
        v[k][i] = 0.999 * v[k][i] + 0.001 * g * g;
        const double mh = m[k][i] / (1.0 - std::pow(0.9, step));
        const double vh = v[k][i] / (1.0 - std::pow(0.999, step));
        ref[k][i] -= 0.01 * mh / (std::sqrt(vh) + 1e-8);
      }
    }
    CHECK(testing::max_rel_error(p.flatten(), ref, 1e-12) < 1e-12);
  }
  CHECK(state.step == 3);
}

TEST_CASE("optimizer fixed point, plain descent, determinism and errors") {
  const NetworkDims dims = testing::tiny_dims(4, 3, 2);
  const ClassifierParams p = init_params(3, dims, Role::Classifier);
  std::vector<Tensor> zeros;
  for (const auto& t : p.flatten()) zeros.emplace_back(t.rows(), t.cols());
  OptimState adam = make_optim_state(p, OptimizerKind::Adam, 0.1);
  CHECK(sgd_adam_step(p, zeros, adam) == p);
  CHECK(adam.step == 1);

  std::vector<Tensor> ones;
  for (const auto& t : p.flatten()) ones.emplace_back(t.rows(), t.cols(), 1.0);
  OptimState sgd = make_optim_state(p, OptimizerKind::Sgd, 0.5);
  const auto moved = sgd_adam_step(p, ones, sgd).flatten();
  const auto orig = p.flatten();
  for (std::size_t k = 0; k < orig.size(); ++k) {
    for (std::size_t i = 0; i < orig[k].size(); ++i) CHECK(moved[k][i] == orig[k][i] - 0.5);
  }

  OptimState s1 = make_optim_state(p, OptimizerKind::Adam, 0.1);
  OptimState s2 = make_optim_state(p, OptimizerKind::Adam, 0.1);
  CHECK(sgd_adam_step(sgd_adam_step(p, ones, s1), ones, s1) ==
        sgd_adam_step(sgd_adam_step(p, ones, s2), ones, s2));

  std::vector<Tensor> wrong = ones;
  wrong[0] = Tensor(1, 1);
  CHECK(kind_of([&] { sgd_adam_step(p, wrong, s1); }) == ErrorKind::ShapeError);
  std::vector<Tensor> nan = ones;
  nan[3][0] = std::nan("");
  CHECK(kind_of([&] { sgd_adam_step(p, nan, s1); }) == ErrorKind::NonFiniteGradient);
}

TEST_CASE("epoch plan covers every example once with golden examples in each batch") {
  std::mt19937_64 rng(48);
  for (auto [g, q, per] : std::vector<std::array<std::size_t, 3>>{
           {100, 0, 16}, {100, 450, 16}, {5, 3, 16}, {33, 7, 4}}) {
    const EpochPlan plan = plan_epoch(g, q, per, rng);
    std::multiset<std::size_t> gs, ps;
    for (std::size_t b = 0; b < plan.golden.size(); ++b) {
      CHECK_FALSE(plan.golden[b].empty());
      CHECK(plan.golden[b].size() <= per);
      gs.insert(plan.golden[b].begin(), plan.golden[b].end());
      ps.insert(plan.pseudo[b].begin(), plan.pseudo[b].end());
    }
    CHECK(gs.size() == g);
    CHECK(ps.size() == q);
    CHECK(std::set<std::size_t>(gs.begin(), gs.end()).size() == g);
    CHECK(std::set<std::size_t>(ps.begin(), ps.end()).size() == q);
  }
}

TEST_CASE("training on a separable toy problem reduces the loss") {
  std::mt19937_64 rng(49);
  const Vocabulary v = testing::tiny_vocab();
  std::vector<LabeledExample> golden;
  for (int i = 0; i < 12; ++i) {
    const int label = i % 2;
    RelationMention m{{label ? "a" : "b", "c", label ? "d" : "e"}, {0, 1}, {2, 3}, label};
    golden.push_back({insert_entity_markers(m, v), label});
  }
  ClassifierParams p = init_params(5, testing::tiny_dims(6, 4, 2), Role::Classifier);
  OptimState state = make_optim_state(p, OptimizerKind::Adam, 0.05);
  const double first = train_epoch(p, golden, {}, 4, state, rng).loss;
  double last = first;
  for (int e = 0; e < 30; ++e) {
    auto r = train_epoch(p, golden, {}, 4, state, rng);
    p = r.params;
    last = r.loss;
  }
  CHECK(last < 0.1 * first);
}

TEST_CASE("checkpoints round-trip exactly") {
  const NetworkDims dims = testing::tiny_dims(4, 3, 3);
  const Checkpoint c{perturbed(11, dims, 3.3), testing::tiny_vocab(), {"x", "y", "z"}};
  const Checkpoint back = checkpoint_from_json(checkpoint_to_json(c));
  CHECK(back.params == c.params);
  CHECK(back.params.dims.encoder.hidden == 4);
  CHECK(back.vocabulary == c.vocabulary);
  CHECK(back.label_names == c.label_names);
  CHECK(checkpoint_to_json(back) == checkpoint_to_json(c));

  const auto path = std::filesystem::temp_directory_path() / "metasre_ckpt_test.json";
  save_checkpoint(c, path.string());
  CHECK(load_checkpoint(path.string()).params == c.params);
  std::filesystem::remove(path);
  CHECK(kind_of([] { checkpoint_from_json("{\"format\":\"other\"}"); }) == ErrorKind::ParseError);
}
