#include "gsnn/autoencoder.hpp"

#include "gradcheck.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace gsnn;

namespace {

SparsityConfig<double> small_cfg(double alpha, double beta) { return {0.2, 0.1, alpha, beta, 3, 4, 0.0}; }

GsaModel<double> random_model(Eigen::Index d, Eigen::Index s, Rng& rng, bool tied = true) {
  GsaModel<double> m = GsaModel<double>::random(d, s, rng, tied);
  m.b = uniform_matrix<double>(s, 1, -0.5, 0.5, rng).col(0);
  m.c = uniform_matrix<double>(d, 1, -0.5, 0.5, rng).col(0);
  return m;
}

double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace

TEST_CASE("encode") {
  GsaModel<double> m;
  m.W = Matrix::Zero(3, 2);
  m.b = Vector::Zero(3);
  m.c = Vector::Zero(2);
  const Matrix Z = Matrix::Random(4, 2);
  CHECK((encode(m, Z).array() == 0.5).all());

  m.W = Matrix::Identity(3, 3);
  m.b = Vector::Zero(3);
  m.c = Vector::Zero(3);
  m.encoder = Activation::Linear;
  const Matrix Z3 = Matrix::Random(5, 3);
  CHECK(encode(m, Z3) == Z3);

  Rng rng(1);
  const auto r = GsaModel<double>::random(4, 6, rng);
  const Matrix H = encode(r, Matrix(Matrix::Random(7, 4)));
  CHECK(H.rows() == 7);
  CHECK(H.cols() == 6);
}

TEST_CASE("decode") {
  GsaModel<double> m;
  m.W = Matrix::Zero(3, 2);
  m.b = Vector::Zero(3);
  m.c = Vector::Zero(2);
  const Matrix out = decode(m, Matrix(Matrix::Random(4, 3)));
  CHECK(out.rows() == 4);
  CHECK(out.cols() == 2);
  CHECK((out.array() == 0.5).all());

  m.W = Matrix::Identity(3, 3);
  m.b = Vector::Zero(3);
  m.c = Vector::Zero(3);
  m.encoder = Activation::Linear;
  m.decoder = Activation::Linear;
  const Matrix Z = Matrix::Random(5, 3);
  CHECK(decode(m, encode(m, Z)).isApprox(Z, 1e-15));
}

TEST_CASE("recon_loss") {
  const Matrix Z = Matrix::Random(3, 4);
  CHECK(recon_loss(Z, Z, ReconKind::Mse) == 0.0);

  Matrix z(1, 2), zh(1, 2);
  z << 0, 0;
  zh << 3, 4;
  CHECK(recon_loss(z, zh, ReconKind::Mse) == 25.0);

  Matrix t(1, 2), p(1, 2);
  t << 1, 0;
  p << 1 - 1e-12, 1e-12;
  CHECK(recon_loss(t, p, ReconKind::CrossEntropy) < 1e-5);

  Matrix bad(1, 2);
  bad << 1.5, 0;
  CHECK_THROWS_AS(recon_loss(bad, p, ReconKind::CrossEntropy), std::invalid_argument);
  CHECK_THROWS_AS(recon_loss(Z, Matrix(Matrix::Zero(2, 4)), ReconKind::Mse), std::invalid_argument);
}

TEST_CASE("unit_mean_activation") {
  Matrix H(3, 1);
  H << 0.1, 0.2, 0.3;
  CHECK(unit_mean_activation(H)[0] == doctest::Approx(0.2));
  CHECK((unit_mean_activation(Matrix(Matrix::Constant(4, 5, 0.5))).array() == 0.5).all());
  const Matrix row = Matrix::Random(1, 6).cwiseAbs() * 0.5;
  CHECK(unit_mean_activation(row) == row.row(0).transpose());
}

TEST_CASE("group_mean_activation") {
  SparsityConfig<double> cfg{0.2, 0.1, 1, 1, 1, 2, 0};
  Matrix H(2, 2);
  H << 0.2, 0.4, 0.6, 0.0;
  CHECK(group_mean_activation(H, cfg)[0] == doctest::Approx(0.3));

  cfg.groups = 3;
  cfg.group_size = 2;
  const Vector zero = group_mean_activation(Matrix(Matrix::Zero(4, 6)), cfg);
  CHECK((zero.array() == kProbEps).all());

  cfg.groups = 1;
  cfg.group_size = 6;
  const Matrix R = Matrix::Random(5, 6);
  CHECK(group_mean_activation_raw(R, cfg)[0] == doctest::Approx(R.cwiseAbs().mean()));

  cfg.groups = 4;
  CHECK_THROWS_AS(group_mean_activation(R, cfg), std::invalid_argument);
}

TEST_CASE("group_mean_activation permutation symmetries") {
  const SparsityConfig<double> cfg{0.2, 0.1, 1, 1, 3, 4, 0};
  Rng rng(11);
  const Matrix H = uniform_matrix<double>(6, 12, 0, 1, rng);
  const Vector eta = group_mean_activation_raw(H, cfg);

  const std::vector<int> group_perm{2, 0, 1};
  Matrix moved(6, 12);
  for (int p = 0; p < 3; ++p) moved.middleCols(group_perm[p] * 4, 4) = H.middleCols(p * 4, 4);
  const Vector eta_moved = group_mean_activation_raw(moved, cfg);
  for (int p = 0; p < 3; ++p) CHECK(eta_moved[group_perm[p]] == doctest::Approx(eta[p]).epsilon(1e-14));

  Matrix shuffled = H;
  for (int p = 0; p < 3; ++p) {
    std::vector<std::size_t> order{0, 1, 2, 3};
    rng.shuffle(order);
    for (int l = 0; l < 4; ++l) shuffled.col(p * 4 + l) = H.col(p * 4 + static_cast<int>(order[static_cast<std::size_t>(l)]));
  }
  CHECK(group_mean_activation_raw(shuffled, cfg).isApprox(eta, 1e-14));
}

TEST_CASE("kl_bernoulli") {
  CHECK(kl_bernoulli(0.2, 0.2) == 0.0);
  CHECK(std::abs(kl_bernoulli(0.05, 0.5) - 0.49463) <= 1e-5);
  CHECK(std::abs(kl_bernoulli(0.3, 0.1) - 0.15366) <= 1e-5);
  CHECK_THROWS_AS(kl_bernoulli(0.0, 0.5), std::domain_error);
  CHECK_THROWS_AS(kl_bernoulli(0.5, 1.0), std::domain_error);
}

TEST_CASE("kl_bernoulli is nonnegative with equality only on the diagonal") {
  for (int i = 1; i < 50; ++i) {
    for (int j = 1; j < 50; ++j) {
      const double t = i / 50.0;
      const double a = j / 50.0;
      const double v = kl_bernoulli(t, a);
      if (i == j) {
        CHECK(v == 0.0);
      } else {
        CHECK(v > 0.0);
      }
    }
  }
}

TEST_CASE("total_loss reductions and breakdown") {
  Rng rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const auto m = random_model(10, 12, rng);
    const Matrix Z = uniform_matrix<double>(8, 10, 0, 1, rng);

    const auto plain = total_loss(m, small_cfg(0, 0), Z, ReconKind::CrossEntropy);
    CHECK(plain.total == recon_loss(Z, decode(m, encode(m, Z)), ReconKind::CrossEntropy));

    const auto sparse = total_loss(m, small_cfg(0.7, 0), Z, ReconKind::CrossEntropy);
    double unit = 0;
    const Vector rho = unit_mean_activation(encode(m, Z));
    for (Eigen::Index j = 0; j < rho.size(); ++j) unit += kl_bernoulli(0.2, rho[j]);
    CHECK(sparse.total == doctest::Approx(plain.reconstruction + 0.7 * unit).epsilon(1e-13));

    const auto full = total_loss(m, small_cfg(0.5, 1.0), Z, ReconKind::Mse);
    const double sum = full.weighted_reconstruction() + full.weighted_unit_kl() + full.weighted_group_kl();
    CHECK(std::abs(full.total - sum) <= 1e-12);
  }
}

TEST_CASE("total_loss matches the naive oracle") {
  Rng rng(31);
  for (int trial = 0; trial < 30; ++trial) {
    const bool tied = trial % 3 != 0;
    const ReconKind kind = trial % 2 ? ReconKind::Mse : ReconKind::CrossEntropy;
    auto m = random_model(9, 12, rng, tied);
    if (kind == ReconKind::Mse) m.decoder = Activation::Linear;
    const auto cfg = small_cfg(rng.uniform(), rng.uniform());
    const Matrix Z = uniform_matrix<double>(7, 9, 0, 1, rng);
    const auto t = total_loss(m, cfg, Z, kind);
    const auto o = oracle::gsa_objective(m, cfg, Z, kind);
    CHECK(rel_err(t.total, o.total) <= 1e-12);
    CHECK(rel_err(t.reconstruction, o.recon) <= 1e-12);
    CHECK(rel_err(t.unit_kl, o.unit) <= 1e-12);
    CHECK(rel_err(t.group_kl, o.group) <= 1e-12);
  }
}

TEST_CASE("analytic gradients match finite differences") {
  Rng rng(41);
  for (int trial = 0; trial < 12; ++trial) {
    const bool tied = trial % 4 != 3;
    const ReconKind kind = trial % 2 ? ReconKind::Mse : ReconKind::CrossEntropy;
    auto m = random_model(20, 12, rng, tied);
    if (kind == ReconKind::Mse) m.decoder = Activation::Linear;
    const auto cfg = SparsityConfig<double>{rng.uniform(0.05, 0.5), rng.uniform(0.05, 0.5), 1.0, 0.5, 3, 4, 0};
    const Matrix Z = uniform_matrix<double>(8, 20, 0, 1, rng);

    GsaGradients<double> g = gradients(m, cfg, Z, kind);
    const Vector analytic = gradcheck::params(g, tied).get();

    auto probe = m;
    const auto view = gradcheck::params(probe);
    std::function<double(const Vector&)> f = [&](const Vector& x) {
      view.set(x);
      return total_loss(probe, cfg, Z, kind).total;
    };
    const auto cmp = gradcheck::compare(analytic, finite_diff_grad(f, view.get(), 1e-5));
    INFO(cmp.detail);
    CHECK(cmp.ok);
  }
}

TEST_CASE("gradients vanish at a stationary point of a linear autoencoder") {
  GsaModel<double> m;
  m.W = Matrix::Constant(1, 1, 1.0);
  m.b = Vector::Zero(1);
  m.c = Vector::Zero(1);
  m.encoder = Activation::Linear;
  m.decoder = Activation::Linear;
  Matrix Z(4, 1);
  Z << 0.1, -0.4, 0.9, 2.0;
  const auto g = gradients(m, SparsityConfig<double>{0.2, 0.1, 0, 0, 1, 1, 0}, Z, ReconKind::Mse);
  CHECK(g.W.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(g.b.cwiseAbs().maxCoeff() <= 1e-10);
  CHECK(g.c.cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("with alpha = beta = 0 the gradients are those of reconstruction alone") {
  Rng rng(51);
  auto m = random_model(6, 4, rng);
  const Matrix Z = uniform_matrix<double>(5, 6, 0, 1, rng);
  const SparsityConfig<double> cfg{0.2, 0.1, 0, 0, 2, 2, 0};
  GsaGradients<double> g = gradients(m, cfg, Z, ReconKind::CrossEntropy);
  auto probe = m;
  const auto view = gradcheck::params(probe);
  std::function<double(const Vector&)> recon = [&](const Vector& x) {
    view.set(x);
    return recon_loss(Z, decode(probe, encode(probe, Z)), ReconKind::CrossEntropy);
  };
  const auto cmp = gradcheck::compare(gradcheck::params(g, true).get(), finite_diff_grad(recon, view.get(), 1e-5));
  INFO(cmp.detail);
  CHECK(cmp.ok);
}

TEST_CASE("backward with target_is_input includes the target path") {
  Rng rng(61);
  auto m = random_model(5, 4, rng);
  m.decoder = Activation::Linear;
  const SparsityConfig<double> cfg{0.2, 0.1, 0.5, 0.5, 2, 2, 0};
  const Matrix Z = uniform_matrix<double>(3, 5, -1, 1, rng);
  GsaPass<double> pass(m, cfg, Z, Z, ReconKind::Mse, 0.3);
  GsaGradients<double> g = GsaGradients<double>::zeros_like(m);
  Matrix dZ;
  pass.backward(g, nullptr, &dZ, true);

  Eigen::Map<const Vector> flat(Z.data(), Z.size());
  std::function<double(const Vector&)> f = [&](const Vector& x) {
    Matrix in = Z;
    Eigen::Map<Vector>(in.data(), in.size()) = x;
    return GsaPass<double>(m, cfg, in, in, ReconKind::Mse, 0.3).terms().total;
  };
  const auto cmp = gradcheck::compare(Eigen::Map<const Vector>(dZ.data(), dZ.size()), finite_diff_grad(f, Vector(flat), 1e-5));
  INFO(cmp.detail);
  CHECK(cmp.ok);
}

TEST_CASE("corrupt") {
  Rng rng(71);
  const Matrix Z = uniform_matrix<double>(100, 100, 0.1, 1, rng);
  CHECK(corrupt(Z, 0.0, rng) == Z);

  Rng a(5), b(5);
  const Matrix ca = corrupt(Z, 0.3, a);
  CHECK(ca == corrupt(Z, 0.3, b));
  const double zeroed = static_cast<double>((ca.array() == 0.0).count()) / static_cast<double>(Z.size());
  CHECK(zeroed >= 0.27);
  CHECK(zeroed <= 0.33);
  CHECK_THROWS_AS(corrupt(Z, 1.0, rng), std::invalid_argument);
}

TEST_CASE("training a tiny linear autoencoder on rank-1 data") {
  Rng rng(81);
  const Vector u = uniform_matrix<double>(4, 1, -1, 1, rng).col(0);
  Matrix data(40, 4);
  for (int i = 0; i < 40; ++i) data.row(i) = rng.uniform(-1, 1) * u.transpose();
  auto m = GsaModel<double>::random(4, 2, rng);
  m.encoder = Activation::Linear;
  m.decoder = Activation::Linear;
  GsaTrainSettings s;
  s.epochs = 10;
  s.batch_size = 10;
  s.optimizer.learning_rate = 0.01;
  s.optimizer.momentum = 0.0;
  s.recon = ReconKind::Mse;
  const SparsityConfig<double> cfg{0.2, 0.1, 0, 0, 1, 2, 0};
  const auto result = train(m, cfg, data, s);
  REQUIRE(result.trace.size() == 11);
  for (std::size_t e = 1; e < result.trace.size(); ++e) {
    CHECK(result.trace[e].eval.reconstruction < result.trace[e - 1].eval.reconstruction);
  }
}

TEST_CASE("training is deterministic and rejects mismatched data") {
  Rng rng(91);
  const Matrix data = uniform_matrix<double>(60, 8, 0, 1, rng);
  const SparsityConfig<double> cfg{0.3, 0.2, 1, 1, 2, 3, 0.2};
  const auto m = GsaModel<double>::random(8, 6, rng);
  GsaTrainSettings s;
  s.epochs = 3;
  s.batch_size = 16;
  s.seed = 4;
  const auto r1 = train(m, cfg, data, s);
  const auto r2 = train(m, cfg, data, s);
  for (std::size_t e = 0; e < r1.trace.size(); ++e) {
    CHECK(r1.trace[e].eval.total == r2.trace[e].eval.total);
    CHECK(r1.trace[e].train_total == r2.trace[e].train_total);
  }
  CHECK(r1.model.W == r2.model.W);
  CHECK(r1.trace.back().eval.total < r1.trace.front().eval.total);

  CHECK_THROWS_AS(train(m, cfg, Matrix(Matrix::Zero(10, 7)), s), std::invalid_argument);
  CHECK_THROWS_AS(train(m, SparsityConfig<double>{0.3, 0.2, 1, 1, 3, 3, 0}, data, s), std::invalid_argument);
}

TEST_CASE("sparsity config validation") {
  CHECK_NOTHROW(SparsityConfig<double>{}.validate());
  CHECK_THROWS(SparsityConfig<double>{0.0, 0.2, 1, 1, 1, 1, 0}.validate());
  CHECK_THROWS(SparsityConfig<double>{0.3, 1.0, 1, 1, 1, 1, 0}.validate());
  CHECK_THROWS(SparsityConfig<double>{0.3, 0.2, -1, 1, 1, 1, 0}.validate());
  CHECK_THROWS(SparsityConfig<double>{0.3, 0.2, 1, 1, 0, 1, 0}.validate());
  CHECK_THROWS(SparsityConfig<double>{0.3, 0.2, 1, 1, 1, 1, 1.0}.validate());
}

TEST_CASE("group_mass rows sum to one") {
  Rng rng(101);
  const Matrix H = uniform_matrix<double>(5, 12, 0, 1, rng);
  const Matrix M = group_mass(H, 3, 4);
  for (Eigen::Index i = 0; i < 5; ++i) CHECK(M.row(i).sum() == doctest::Approx(1.0));
  CHECK(M(0, 1) == doctest::Approx(H.row(0).segment(4, 4).sum() / H.row(0).sum()));
}

TEST_CASE("grouped_model installs a centred grouped dictionary") {
  Rng rng(111);
  const Matrix data = uniform_matrix<double>(80, 5, 0, 1, rng);
  const SparsityConfig<double> cfg{0.3, 0.2, 1, 1, 2, 3, 0};
  const auto m = grouped_model(data, cfg, rng, true, 2.0, 2);
  CHECK(m.W.rows() == 6);
  CHECK(m.W.cols() == 5);
  for (Eigen::Index r = 0; r < 6; ++r) CHECK(m.W.row(r).norm() == doctest::Approx(2.0));
  const Vector center = data.colwise().mean().transpose();
  CHECK((m.W * center + m.b).cwiseAbs().maxCoeff() <= 1e-12);
}
