/* Copyright 2026 The racdet Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/
#include <cmath>
#include <limits>
#include <vector>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "racdet/types.hpp"

namespace racdet {
namespace {

TEST(CosineSimilarity, IdentityOrthogonalAndDiagonal) {
  const std::vector<float> x{1, 0}, y{0, 1}, d{1, 1};
  EXPECT_DOUBLE_EQ(cosine_similarity(x, x), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, y), 0.0);
  EXPECT_NEAR(cosine_similarity(d, x), 0.7071067, 1e-6);
}

TEST(CosineSimilarity, RejectsDimensionMismatchAndZeroNorm) {
  const std::vector<float> a{1, 0}, b{1, 0, 0}, z{0, 0};
  EXPECT_THROW(cosine_similarity(a, b), Error);
  EXPECT_THROW(cosine_similarity(a, z), Error);
  EXPECT_THROW(cosine_similarity(z, a), Error);
}

TEST(CosineSimilarity, ClampedToClosedRange) {
  // Parallel vectors with awkward magnitudes can round past 1.
  const std::vector<float> a{0.1f, 0.2f, 0.3f}, b{0.3f, 0.6f, 0.9f};
  const double s = cosine_similarity(a, b);
  EXPECT_LE(s, 1.0);
  EXPECT_NEAR(s, 1.0, 1e-12);
  const std::vector<float> c{-0.3f, -0.6f, -0.9f};
  EXPECT_GE(cosine_similarity(a, c), -1.0);
}

TEST(CosineSimilarity, PropertiesOverRandomVectors) {
  Rng rng(11);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t dim = 1 + rng.index(64);
    const auto a = oracle::random_embedding(rng, dim);
    const auto b = oracle::random_embedding(rng, dim);
    // Symmetry is exact.
    EXPECT_EQ(cosine_similarity(a, b), cosine_similarity(b, a));
    EXPECT_NEAR(cosine_similarity(a, a), 1.0, 1e-6);
    const float c = static_cast<float>(rng.uniform(0.01, 100.0));
    std::vector<float> scaled(a.values().begin(), a.values().end());
    for (auto& v : scaled) v *= c;
    EXPECT_NEAR(cosine_similarity(scaled, b.values()), cosine_similarity(a, b), 1e-6);
    const double s = cosine_similarity(a, b);
    EXPECT_GE(s, -1.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(EmbeddingVector, ValidatesOnConstruction) {
  EXPECT_THROW(EmbeddingVector(std::vector<float>{}), Error);
  EXPECT_THROW(EmbeddingVector(std::vector<float>{0.0f, 0.0f}), Error);
  EXPECT_THROW(EmbeddingVector(std::vector<float>{1.0f, std::numeric_limits<float>::quiet_NaN()}), Error);
  EXPECT_THROW(EmbeddingVector(std::vector<float>{std::numeric_limits<float>::infinity()}), Error);
  const EmbeddingVector v(std::vector<float>{3.0f, 4.0f});
  EXPECT_EQ(v.dim(), 2u);
  EXPECT_DOUBLE_EQ(v.norm(), 5.0);
}

TEST(BBox, ValidatesOnConstruction) {
  EXPECT_NO_THROW(BBox(0, 0, 1, 1));
  EXPECT_THROW(BBox(1, 0, 1, 2), Error);
  EXPECT_THROW(BBox(0, 2, 1, 1), Error);
  EXPECT_THROW(BBox(-1, 0, 1, 1), Error);
  EXPECT_THROW(BBox(0, 0, std::numeric_limits<float>::infinity(), 1), Error);
  EXPECT_DOUBLE_EQ(BBox(0, 0, 10, 5).area(), 50.0);
}

TEST(ClassTable, DenseIdsAndUniqueNames) {
  const ClassTable t({"PL", "SP", "ST"});
  EXPECT_EQ(t.label("SP"), (ClassLabel{1, "SP"}));
  EXPECT_EQ(t.label(2).name, "ST");
  EXPECT_TRUE(t.contains(ClassLabel{0, "PL"}));
  EXPECT_FALSE(t.contains(ClassLabel{0, "SP"}));
  EXPECT_FALSE(t.contains(ClassLabel{3, "XX"}));
  EXPECT_THROW(t.label("XX"), Error);
  EXPECT_THROW(t.label(3), Error);
  EXPECT_THROW(ClassTable({"PL", "PL"}), Error);
}

}  // namespace
}  // namespace racdet
