#include "gsnn/kmeans.hpp"

#include <doctest.h>

#include <algorithm>
#include <limits>
#include <set>

using namespace gsnn;

namespace {

Matrix four_points() {
  Matrix p(4, 2);
  p << 0, 0, 0, 1, 10, 10, 10, 11;
  return p;
}

// Smallest within-cluster sum of squares over every 2-partition.
double best_two_partition(const Matrix& p) {
  const int n = static_cast<int>(p.rows());
  double best = std::numeric_limits<double>::infinity();
  for (int mask = 1; mask < (1 << n) - 1; ++mask) {
    double total = 0;
    for (int side = 0; side < 2; ++side) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(p.cols());
      int count = 0;
      for (int i = 0; i < n; ++i) {
        if (((mask >> i) & 1) == side) {
          mean += p.row(i);
          ++count;
        }
      }
      mean /= count;
      for (int i = 0; i < n; ++i) {
        if (((mask >> i) & 1) == side) total += (p.row(i) - mean).squaredNorm();
      }
    }
    best = std::min(best, total);
  }
  return best;
}

std::set<std::pair<double, double>> row_set(const Matrix& m) {
  std::set<std::pair<double, double>> s;
  for (Eigen::Index r = 0; r < m.rows(); ++r) s.insert({m(r, 0), m(r, 1)});
  return s;
}

}  // namespace

TEST_CASE("seed_plusplus") {
  const Matrix p = four_points();
  Rng rng(1);
  CHECK(row_set(seed_plusplus(p, 4, rng)) == row_set(p));

  const Matrix one = seed_plusplus(p, 1, rng);
  bool member = false;
  for (Eigen::Index r = 0; r < p.rows(); ++r) member = member || p.row(r) == one.row(0);
  CHECK(member);

  Rng a(9), b(9);
  CHECK(seed_plusplus(p, 2, a) == seed_plusplus(p, 2, b));

  Matrix dup(3, 2);
  dup << 1, 1, 1, 1, 2, 2;
  CHECK_THROWS_AS(seed_plusplus(dup, 3, rng), std::invalid_argument);
  CHECK_THROWS_AS(seed_plusplus(p, 0, rng), std::invalid_argument);
}

TEST_CASE("lloyd on the four-point example") {
  const Matrix p = four_points();
  CHECK(best_two_partition(p) == doctest::Approx(1.0));
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Rng rng(seed);
    const auto c = kmeans(p, 2, rng);
    CHECK(c.inertia == doctest::Approx(best_two_partition(p)));
    CHECK(row_set(c.centroids) == std::set<std::pair<double, double>>{{0, 0.5}, {10, 10.5}});
  }
}

TEST_CASE("lloyd degenerate and converged inputs") {
  const Matrix same = Matrix::Constant(5, 3, 2.5);
  Matrix init(1, 3);
  init << 0, 0, 0;
  const auto c = lloyd(same, init);
  CHECK(c.centroids.row(0) == same.row(0));
  CHECK(c.inertia == 0.0);

  Matrix optimal(2, 2);
  optimal << 0, 0.5, 10, 10.5;
  const auto d = lloyd(four_points(), optimal);
  CHECK(d.iterations == 1);
  CHECK(d.inertia == doctest::Approx(1.0));

  CHECK_THROWS_AS(lloyd(four_points(), Matrix(Matrix::Zero(2, 3))), std::invalid_argument);
}

TEST_CASE("lloyd inertia never increases and assignments are valid") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const Matrix p = uniform_matrix<double>(60, 3, -1, 1, rng);
    const int k = 2 + trial % 6;
    const auto c = kmeans(p, k, rng);
    for (std::size_t i = 1; i < c.inertia_trace.size(); ++i) CHECK(c.inertia_trace[i] <= c.inertia_trace[i - 1] + 1e-12);
    CHECK(c.inertia >= 0.0);
    CHECK(c.inertia <= c.inertia_trace.back() + 1e-12);
    CHECK(c.assignments.size() == 60u);
    for (int a : c.assignments) {
      CHECK(a >= 0);
      CHECK(a < k);
    }
  }
}

TEST_CASE("kmeans ties go to the lowest centroid index") {
  Matrix p(1, 1);
  p << 0.0;
  Matrix init(2, 1);
  init << -1.0, 1.0;
  const auto c = lloyd(p, init, 1);
  CHECK(c.assignments[0] == 0);
}

TEST_CASE("kmeans_best_of never does worse than a single run") {
  Rng a(3), b(3);
  const Matrix p = uniform_matrix<double>(80, 2, 0, 1, a);
  Rng r1(4), r2(4);
  const auto single = kmeans(p, 5, r1);
  const auto best = kmeans_best_of(p, 5, r2, 5);
  CHECK(best.inertia <= single.inertia);
  CHECK_THROWS_AS(kmeans_best_of(p, 5, r2, 0), std::invalid_argument);
}

TEST_CASE("build_dictionary") {
  Matrix g0(3, 2), g1(3, 2);
  g0 << 0, 0, 0.01, 0, 0, 0.01;
  g1 << 5, 5, 5.01, 5, 5, 5.01;
  Rng rng(5);
  const auto d = build_dictionary<double>({g0, g1}, 1, rng);
  REQUIRE(d.atoms.rows() == 2);
  CHECK(d.atoms.row(0).isApprox(g0.colwise().mean(), 1e-12));
  CHECK(d.atoms.row(1).isApprox(g1.colwise().mean(), 1e-12));
  CHECK(d.group_of_row == std::vector<int>{0, 1});

  Rng x(6), y(6);
  const Matrix p = uniform_matrix<double>(40, 3, 0, 1, x);
  Rng k1(8), k2(8);
  const auto one = build_dictionary<double>({p}, 4, k1);
  const auto plain = kmeans(p, 4, k2);
  CHECK(row_set(Matrix(one.atoms.leftCols(2))) == row_set(Matrix(plain.centroids.leftCols(2))));

  for (int G : {1, 2, 3}) {
    for (int g : {1, 2, 5}) {
      std::vector<Matrix> groups;
      for (int q = 0; q < G; ++q) groups.push_back(uniform_matrix<double>(12, 4, 0, 1, y));
      const auto dict = build_dictionary(groups, g, y);
      CHECK(dict.atoms.rows() == G * g);
      CHECK(dict.atoms.cols() == 4);
    }
  }
}

TEST_CASE("build_dictionary rows of a group come from that group only") {
  Rng rng(7);
  Matrix a = uniform_matrix<double>(20, 2, 0, 1, rng);
  Matrix b = uniform_matrix<double>(20, 2, 100, 101, rng);
  const auto d = build_dictionary<double>({a, b}, 3, rng);
  for (int r = 0; r < 3; ++r) CHECK(d.atoms.row(r).maxCoeff() <= 1.0);
  for (int r = 3; r < 6; ++r) CHECK(d.atoms.row(r).minCoeff() >= 100.0);
  Rng rng2(7);
  Matrix a2 = uniform_matrix<double>(20, 2, 0, 1, rng2);
  Matrix b2 = uniform_matrix<double>(20, 2, 100, 101, rng2);
  const auto e = build_dictionary<double>({a2, b2}, 3, rng2);
  CHECK(d.atoms == e.atoms);
}

TEST_CASE("build_dictionary tops up groups with too few distinct points") {
  Matrix tiny(2, 2);
  tiny << 1, 1, 1, 1;
  Rng rng(2);
  const auto d = build_dictionary<double>({tiny}, 3, rng);
  CHECK(d.atoms.rows() == 3);
  CHECK((d.atoms.rowwise() - tiny.row(0)).cwiseAbs().maxCoeff() < 0.1);
  CHECK_THROWS_AS(build_dictionary<double>({Matrix(0, 2)}, 1, rng), std::invalid_argument);
}

TEST_CASE("install_atoms") {
  Matrix W(2, 2);
  Vector b(2);
  Matrix atoms(2, 2);
  atoms << 3, 4, 1, 1;
  Vector center(2);
  center << 1, 1;
  install_atoms(W, b, atoms, center, 2.0);
  CHECK(W.row(0).norm() == doctest::Approx(2.0));
  CHECK(W.row(1).isZero());
  CHECK((W * center + b).isZero(1e-15));
  CHECK_THROWS_AS(install_atoms(W, b, atoms, center, 0.0), std::invalid_argument);
}
