#include "semcom/random_instance.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace semcom {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

nlohmann::json small_world() {
  return nlohmann::json::parse(R"({
    "concepts": [{"name": "a", "prior": 0.25}, {"name": "b", "prior": 0.75}],
    "samples": ["z0", "z1", "z2"],
    "data_law": [[0.2, 0.3, 0.5], [0.5, 0.25, 0.25]],
    "hypotheses": ["h0", "h1"],
    "loss": [[[0, 1, 0.5], [1, 0, 0.25]], [[0.5, 0.5, 0], [0, 1, 1]]],
    "m": 2,
    "l_max": 1
  })");
}

TEST(Distribution, ValidatesAndRenormalizes) {
  EXPECT_THROW(Distribution(vec({0.5, 0.6})), ValidationError);
  EXPECT_THROW(Distribution(vec({1.5, -0.5})), ValidationError);
  EXPECT_THROW(Distribution{Vector{}}, ValidationError);
  const Distribution d(vec({0.5, 0.5 + 1e-10}));
  EXPECT_NEAR(d.probs().sum(), 1.0, 1e-15);
  const Distribution clamped(vec({1.0, -1e-16}));
  EXPECT_EQ(clamped[1], 0.0);
}

TEST(Distribution, TotalVariationExamples) {
  const Distribution a(vec({1.0, 0.0})), b(vec({0.0, 1.0})), u = Distribution::uniform(2);
  EXPECT_EQ(total_variation(u, u), 0.0);
  EXPECT_EQ(total_variation(a, b), 1.0);
  EXPECT_DOUBLE_EQ(total_variation(u, a), 0.5);
  EXPECT_THROW(total_variation(u, Distribution::uniform(3)), ValidationError);
}

TEST(Distribution, KlExamples) {
  const Distribution u = Distribution::uniform(2);
  EXPECT_EQ(kl_divergence(u, u), 0.0);
  EXPECT_DOUBLE_EQ(kl_divergence(Distribution::point_mass(2, 0), u), 1.0);
  const double expected = 0.75 * std::log2(1.5) + 0.25 * std::log2(0.5);
  EXPECT_NEAR(kl_divergence(Distribution(vec({0.75, 0.25})), u), expected, 1e-15);
  EXPECT_NEAR(expected, 0.18872, 1e-5);
  EXPECT_THROW(kl_divergence(u, Distribution::point_mass(2, 0)), SupportError);
}

TEST(Distribution, MutualInformationExamples) {
  Matrix product = vec({0.3, 0.7}) * vec({0.4, 0.6}).transpose();
  EXPECT_NEAR(mutual_information(product), 0.0, 1e-15);
  Matrix bijection(2, 2);
  bijection << 0.5, 0.0, 0.0, 0.5;
  EXPECT_DOUBLE_EQ(mutual_information(bijection), 1.0);

  Matrix joint(2, 2);
  joint << 0.45, 0.05, 0.10, 0.40;
  const Distribution marg(vec({0.55, 0.45}));
  const double by_kl = 0.5 * kl_divergence(Distribution(vec({0.9, 0.1})), marg) +
                       0.5 * kl_divergence(Distribution(vec({0.2, 0.8})), marg);
  EXPECT_NEAR(mutual_information(joint), by_kl, 1e-10);
}

TEST(Distribution, RandomPrimitiveProperties) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const Index n = rng.integer(2, 6);
    const Distribution p = random_distribution(rng, n), q = random_distribution(rng, n),
                       r = random_distribution(rng, n);
    EXPECT_NEAR(total_variation(p, q), total_variation(q, p), 1e-15);
    EXPECT_LE(total_variation(p, r), total_variation(p, q) + total_variation(q, r) + 1e-15);
    EXPECT_LE(total_variation(p, q), std::sqrt(std::numbers::ln2 * kl_divergence(p, q) / 2.0) + 1e-12);
    EXPECT_GE(kl_divergence(p, q), 0.0);

    const Index ns = rng.integer(2, 5);
    Matrix joint(ns, n);
    for (Index s = 0; s < ns; ++s) joint.row(s) = random_distribution(rng, n, 0.3).probs().transpose();
    const Distribution src = random_distribution(rng, ns);
    joint = src.probs().asDiagonal() * joint;
    const Distribution marg(joint.colwise().sum().transpose());
    double by_kl = 0.0;
    for (Index s = 0; s < ns; ++s) by_kl += src[s] * kl_divergence(Distribution(joint.row(s).transpose() / src[s]), marg);
    EXPECT_NEAR(mutual_information(joint), by_kl, 1e-10);
  }
}

TEST(DatasetSpace, EnumerationExamples) {
  Matrix law(1, 2);
  law << 0.3, 0.7;
  ConceptSpace one({"c"}, {"z0", "z1"}, Distribution::point_mass(1, 0), law);
  const DatasetSpace m1 = enumerate_datasets(one, 1);
  EXPECT_EQ(m1.size(), 2);
  EXPECT_EQ(m1.conditional(0, 0), 0.3);
  EXPECT_EQ(m1.conditional(0, 1), 0.7);

  law << 0.5, 0.5;
  ConceptSpace fair({"c"}, {"z0", "z1"}, Distribution::point_mass(1, 0), law);
  const DatasetSpace m3 = enumerate_datasets(fair, 3);
  ASSERT_EQ(m3.size(), 8);
  for (Index s = 0; s < 8; ++s) EXPECT_EQ(m3.conditional(0, s), 0.125);

  Matrix law3(1, 3);
  law3 << 0.2, 0.3, 0.5;
  ConceptSpace three({"c"}, {"z0", "z1", "z2"}, Distribution::point_mass(1, 0), law3);
  const DatasetSpace m2 = enumerate_datasets(three, 2);
  const std::array<int, 2> t{0, 2};
  EXPECT_EQ(m2.index_of(t), 2);
  EXPECT_NEAR(m2.conditional(0, m2.index_of(t)), 0.10, 1e-15);

  EXPECT_THROW(enumerate_datasets(three, 20), EnumerationTooLarge);
}

TEST(DatasetSpace, ProductAndBayesConsistencyOnRandomInstances) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const ProblemInstance inst = random_instance(rng);
    const auto& ds = inst.datasets();
    const auto& cs = inst.concepts();
    EXPECT_NEAR(ds.marginal.probs().sum(), 1.0, 1e-12);
    for (Index c = 0; c < inst.num_concepts(); ++c) {
      for (Index s = 0; s < ds.size(); ++s) {
        double product = 1.0;
        for (int z : ds.tuple(s)) product *= cs.data_law(c, z);
        EXPECT_EQ(ds.conditional(c, s), product);
        EXPECT_NEAR(cs.prior[c] * ds.conditional(c, s), ds.marginal[s] * ds.posterior(s, c), 1e-12);
      }
    }
  }
}

TEST(ProblemInstance, JsonRoundTrip) {
  const ProblemInstance inst = instance_from_json(small_world());
  EXPECT_EQ(inst.num_concepts(), 2);
  EXPECT_EQ(inst.num_samples(), 3);
  EXPECT_EQ(inst.num_datasets(), 9);
  EXPECT_EQ(inst.m(), 2);
  const ProblemInstance again = instance_from_json(instance_to_json(inst));
  EXPECT_EQ(instance_to_json(again), instance_to_json(inst));
}

TEST(ProblemInstance, JsonErrorsCarryPointers) {
  auto expect_pointer = [](nlohmann::json doc, const std::string& pointer) {
    try {
      instance_from_json(doc);
      ADD_FAILURE() << "expected a validation error at " << pointer;
    } catch (const ValidationError& e) {
      EXPECT_EQ(e.pointer(), pointer) << e.what();
    }
  };
  auto doc = small_world();
  doc["loss"][0][1][2] = 3.0;
  expect_pointer(doc, "/loss/0/1/2");
  doc = small_world();
  doc["data_law"][0] = {0.5, 0.5, 0.5};
  expect_pointer(doc, "/data_law/0");
  doc = small_world();
  doc["m"] = 0;
  expect_pointer(doc, "/m");
  doc = small_world();
  doc["m"] = 40;
  expect_pointer(doc, "/m");
  doc = small_world();
  doc.erase("samples");
  expect_pointer(doc, "/samples");
}

}  // namespace
}  // namespace semcom
