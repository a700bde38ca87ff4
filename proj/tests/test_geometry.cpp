#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "protogeom/geometry.hpp"

using namespace protogeom;

namespace {

Matrix pattern_gram(int k, double off) {
  Matrix g = Matrix::Constant(k, k, off);
  g.diagonal().setOnes();
  return g;
}

}  // namespace

TEST_CASE("make_etf produces the simplex angles") {
  const PrototypeSet p = make_etf(10, 10);
  const Matrix g = gram(p).entries;
  for (int i = 0; i < 10; ++i) {
    REQUIRE(std::abs(g(i, i) - 1.0) < 1e-10);
    for (int j = 0; j < 10; ++j)
      if (i != j) REQUIRE(std::abs(g(i, j) - (-1.0 / 9.0)) < 1e-10);
  }
}

TEST_CASE("make_etf with two classes in one dimension is the antipodal pair") {
  const PrototypeSet p = make_etf(2, 1);
  REQUIRE(std::abs(p.vectors(0, 0) + p.vectors(0, 1)) < 1e-12);
  const Matrix g = gram(p).entries;
  REQUIRE(std::abs(g(0, 1) + 1.0) < 1e-12);
}

TEST_CASE("make_etf Gram spectrum is k/(k-1) with multiplicity k-1 plus a zero") {
  const Matrix g = gram(make_etf(4, 8)).entries;
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  const Vector ev = es.eigenvalues();
  REQUIRE(std::abs(ev(0)) < 1e-10);
  for (int i = 1; i < 4; ++i) REQUIRE(std::abs(ev(i) - 4.0 / 3.0) < 1e-10);
}

TEST_CASE("make_etf rejects impossible dimensions") {
  REQUIRE_THROWS_AS(make_etf(10, 8), dimension_error);
  REQUIRE_THROWS_AS(make_etf(1, 4), dimension_error);
}

TEST_CASE("ETF Gram has trace k and zero row sums") {
  for (auto [k, d] : std::vector<std::pair<int, int>>{{2, 1}, {3, 5}, {6, 8}, {10, 16}}) {
    const Matrix g = gram(make_etf(k, d)).entries;
    REQUIRE(std::abs(g.trace() - k) < 1e-10);
    for (int i = 0; i < k; ++i) REQUIRE(std::abs(g.row(i).sum()) < 1e-10);
  }
}

TEST_CASE("generated prototype sets have unit columns at 1e-12") {
  REQUIRE_NOTHROW(make_etf(7, 9).validate());
  REQUIRE_NOTHROW(make_majority_collapse(6, {0, 1, 2}, 8).validate());
  REQUIRE_NOTHROW(make_minority_angle(4, {2, 3}, -0.9, -0.1, 8).validate());
}

TEST_CASE("make_from_gram realizes the identity as an orthonormal set") {
  const PrototypeSet p = make_from_gram(GramMatrix(Matrix::Identity(3, 3)), 3);
  const Matrix g = gram(p).entries;
  REQUIRE((g - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("make_from_gram round-trips the ETF Gram") {
  const GramMatrix target = gram(make_etf(4, 8));
  const PrototypeSet p = make_from_gram(target, 8);
  REQUIRE((gram(p).entries - target.entries).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("make_from_gram accepts the 0.9 pattern matrix") {
  // Eigenvalues of the constant-0.9 pattern: 1 + 2*0.9 and 1 - 0.9 twice.
  const Matrix g = pattern_gram(3, 0.9);
  Eigen::SelfAdjointEigenSolver<Matrix> es(g);
  REQUIRE(std::abs(es.eigenvalues()(2) - 2.8) < 1e-12);
  REQUIRE(std::abs(es.eigenvalues()(0) - 0.1) < 1e-12);
  REQUIRE(std::abs(es.eigenvalues()(1) - 0.1) < 1e-12);
  const PrototypeSet p = make_from_gram(GramMatrix(g), 3);
  REQUIRE((gram(p).entries - g).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("make_from_gram rejects bad targets") {
  SECTION("not PSD") {
    REQUIRE_THROWS_AS(make_from_gram(GramMatrix(pattern_gram(3, -0.9)), 3),
                      not_psd_error);
  }
  SECTION("rank above the dimension") {
    REQUIRE_THROWS_AS(make_from_gram(gram(make_etf(4, 8)), 2), rank_error);
  }
  SECTION("diagonal not one") {
    Matrix g = Matrix::Identity(3, 3);
    g(1, 1) = 1.5;
    REQUIRE_THROWS_AS(make_from_gram(GramMatrix(g), 3), diagonal_error);
  }
}

TEST_CASE("make_from_gram after gram is the identity on realizable geometries") {
  rng_engine engine(11);
  for (int trial = 0; trial < 20; ++trial) {
    const int k = 2 + static_cast<int>(engine() % 5);
    const int d = k + static_cast<int>(engine() % 4);
    const Matrix w = random_unit_columns(d, k, engine);
    const GramMatrix g = gram(w);
    const PrototypeSet p = make_from_gram(g, d);
    REQUIRE((gram(p).entries - g.entries).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("minority-angle geometry with an empty minority set is the ETF") {
  const PrototypeSet p = make_minority_angle(4, {}, -0.99, -1.0 / 3.0, 8);
  const Matrix expect = gram(make_etf(4, 8)).entries;
  REQUIRE((gram(p).entries - expect).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("minority-angle geometry realizes a feasible two-level pattern") {
  const PrototypeSet p = make_minority_angle(4, {2, 3}, -0.9, -0.1, 8);
  const Matrix g = gram(p).entries;
  REQUIRE(std::abs(g(2, 3) - (-0.9)) < 1e-8);
  REQUIRE(std::abs(g(0, 1) - (-0.1)) < 1e-8);
  REQUIRE(std::abs(g(0, 2) - (-0.1)) < 1e-8);
}

TEST_CASE("minority-angle geometry rejects unrealizable patterns") {
  // A pair forced to cosine -0.9 leaves |w2 + w3| = sqrt(0.2); both vectors
  // cannot also sit at cosine -1/3 from the rest. The eigen-oracle agrees:
  SECTION("k=4 pair at -0.9 with rest at -1/3") {
    Matrix g = pattern_gram(4, -1.0 / 3.0);
    g(2, 3) = g(3, 2) = -0.9;
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    REQUIRE(es.eigenvalues()(0) < -1e-8);  // measured: about -0.341
    REQUIRE_THROWS_AS(make_minority_angle(4, {2, 3}, -0.9, -1.0 / 3.0, 8),
                      not_psd_error);
  }
  SECTION("k=3 pair at -0.99 with rest at 0.5") {
    Matrix g = pattern_gram(3, 0.5);
    g(1, 2) = g(2, 1) = -0.99;
    Eigen::SelfAdjointEigenSolver<Matrix> es(g);
    REQUIRE(es.eigenvalues()(0) < -1e-8);  // measured: about -0.358
    REQUIRE_THROWS_AS(make_minority_angle(3, {1, 2}, -0.99, 0.5, 4), not_psd_error);
  }
}

TEST_CASE("minority-angle geometry validates its parameters") {
  REQUIRE_THROWS_AS(make_minority_angle(4, {2, 3}, -0.1, -0.5, 8), domain_error);
  REQUIRE_THROWS_AS(make_minority_angle(4, {2, 7}, -0.9, -0.1, 8), domain_error);
  REQUIRE_THROWS_AS(make_minority_angle(4, {2, 2}, -0.9, -0.1, 8), domain_error);
  REQUIRE_THROWS_AS(make_minority_angle(4, {2, 3}, -1.5, -0.1, 8), domain_error);
}

TEST_CASE("majority collapse shares one direction and spreads the rest") {
  const PrototypeSet p = make_majority_collapse(10, {0, 1, 2, 3, 4}, 10);
  const Matrix g = gram(p).entries;
  REQUIRE(std::abs(g(0, 1) - 1.0) < 1e-10);          // collapsed pair
  REQUIRE(std::abs(g(0, 5) - (-1.0 / 5.0)) < 1e-10); // k_eff = 6
  REQUIRE(std::abs(g(5, 6) - (-1.0 / 5.0)) < 1e-10);
}

TEST_CASE("majority collapse of every class is a single direction") {
  const PrototypeSet p = make_majority_collapse(2, {0, 1}, 1);
  const Matrix g = gram(p).entries;
  REQUIRE((g - Matrix::Ones(2, 2)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("majority collapse fits exactly when d equals k_eff - 1") {
  REQUIRE_NOTHROW(make_majority_collapse(4, {0, 1}, 2));       // k_eff = 3
  REQUIRE_THROWS_AS(make_majority_collapse(10, {0, 1, 2, 3, 4}, 4),
                    dimension_error);                          // k_eff = 6
  REQUIRE_THROWS_AS(make_majority_collapse(4, {0}, 8), domain_error);
}

TEST_CASE("gram of explicit column sets") {
  Matrix two(3, 2);
  two.col(0) = Vector::Unit(3, 0);
  two.col(1) = Vector::Unit(3, 0);
  REQUIRE((gram(two).entries - Matrix::Ones(2, 2)).cwiseAbs().maxCoeff() < 1e-12);

  const Matrix etf3 = gram(make_etf(3, 4)).entries;
  REQUIRE(std::abs(etf3(0, 1) + 0.5) < 1e-10);

  Matrix ortho(3, 3);
  ortho.setIdentity();
  REQUIRE((gram(ortho).entries - Matrix::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("convergence_delta matches hand computation") {
  const GramMatrix id2(Matrix::Identity(2, 2));
  Matrix anti(2, 2);
  anti << 1, -1, -1, 1;
  const GramMatrix etf2(anti);
  REQUIRE(std::abs(convergence_delta(id2, etf2) - 0.7653668647) < 1e-5);
  REQUIRE(convergence_delta(id2, id2) == 0.0);
  const GramMatrix scaled(Matrix(2.0 * anti));
  REQUIRE(std::abs(convergence_delta(scaled, etf2)) < 1e-15);
}

TEST_CASE("convergence_delta is a metric on rays") {
  rng_engine engine(5);
  auto random_gram = [&engine](int k) {
    const Matrix w = random_unit_columns(k + 2, k, engine);
    return gram(w);
  };
  for (int trial = 0; trial < 10; ++trial) {
    const GramMatrix a = random_gram(4), b = random_gram(4), c = random_gram(4);
    const double ab = convergence_delta(a, b);
    REQUIRE(std::abs(ab - convergence_delta(b, a)) < 1e-14);
    std::uniform_real_distribution<double> scale(0.1, 10.0);
    const GramMatrix sa(Matrix(scale(engine) * a.entries));
    REQUIRE(std::abs(convergence_delta(sa, b) - ab) < 1e-12);
    REQUIRE(ab <= convergence_delta(a, c) + convergence_delta(c, b) + 1e-14);
    REQUIRE(ab >= 0.0);
    REQUIRE(ab <= 2.0);
  }
}

TEST_CASE("convergence_delta rejects degenerate and mismatched inputs") {
  const GramMatrix ok(Matrix::Identity(2, 2));
  REQUIRE_THROWS_AS(convergence_delta(ok, GramMatrix(Matrix::Zero(2, 2))),
                    degenerate_error);
  REQUIRE_THROWS_AS(convergence_delta(ok, GramMatrix(Matrix::Identity(3, 3))),
                    dimension_error);
}

TEST_CASE("GramMatrix rejects asymmetric input") {
  Matrix bad(2, 2);
  bad << 1, 0.5, 0.2, 1;
  REQUIRE_THROWS_AS(GramMatrix(bad), gram_error);
}

TEST_CASE("grams of unit vector sets are PSD with unit diagonal") {
  rng_engine engine(29);
  for (int trial = 0; trial < 10; ++trial) {
    const int k = 2 + static_cast<int>(engine() % 6);
    const int d = 1 + static_cast<int>(engine() % 8);
    const GramMatrix g = gram(random_unit_columns(d, k, engine));
    Eigen::SelfAdjointEigenSolver<Matrix> es(g.entries);
    REQUIRE(es.eigenvalues()(0) > -1e-10);
    for (int c = 0; c < k; ++c) REQUIRE(std::abs(g.entries(c, c) - 1.0) < 1e-12);
  }
}

TEST_CASE("rotate_frame keeps the Gram and is deterministic") {
  const PrototypeSet p = make_etf(5, 8);
  const PrototypeSet r1 = rotate_frame(p, 42);
  const PrototypeSet r2 = rotate_frame(p, 42);
  REQUIRE((r1.vectors - r2.vectors).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((gram(r1).entries - gram(p).entries).cwiseAbs().maxCoeff() < 1e-12);
  REQUIRE((rotate_frame(p, 43).vectors - r1.vectors).cwiseAbs().maxCoeff() > 1e-3);
}
