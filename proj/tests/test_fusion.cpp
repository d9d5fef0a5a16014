#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <vector>

#include "dms/errors.hpp"
#include "dms/fusion.hpp"
#include "dms/gradcheck.hpp"

using namespace dms;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, RngStream& rng) {
  Matrix m(r, c);
  for (double& v : m.data()) v = rng.normal();
  return m;
}

Matrix random_simplex_rows(std::size_t n, std::size_t m, RngStream& rng) {
  Matrix w(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (double& v : w.row(i)) total += (v = rng.uniform(0.01, 1.0));
    for (double& v : w.row(i)) v /= total;
  }
  return w;
}

}  // namespace

TEST_CASE("fuse_representations") {
  const std::vector<Matrix> f{Matrix::from_rows({{0, 0}}), Matrix::from_rows({{2, 0}})};
  CHECK(fuse_representations(f, Matrix::from_rows({{1, 0}})) == f[0]);
  CHECK(fuse_representations(f, Matrix::from_rows({{0.5, 0.5}})) == Matrix::from_rows({{1, 0}}));

  const std::vector<Matrix> same{Matrix::from_rows({{3, -1}}), Matrix::from_rows({{3, -1}})};
  const Matrix h = fuse_representations(same, Matrix::from_rows({{0.3, 0.7}}));
  for (std::size_t j = 0; j < 2; ++j) CHECK(std::abs(h(0, j) - same[0](0, j)) < 1e-12);

  CHECK_THROWS_AS(fuse_representations(f, Matrix::from_rows({{1, 0, 0}})), ShapeError);
  const std::vector<Matrix> ragged{Matrix(1, 2), Matrix(1, 3)};
  CHECK_THROWS_AS(fuse_representations(ragged, Matrix::from_rows({{0.5, 0.5}})), ShapeError);
}

TEST_CASE("fused representation stays in the coordinate-wise hull") {
  RngStream rng(4, "hull");
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t m = 2 + rng.below(4);
    std::vector<Matrix> f;
    for (std::size_t k = 0; k < m; ++k) f.push_back(random_matrix(5, 6, rng));
    const Matrix w = random_simplex_rows(5, m, rng);
    const Matrix h = fuse_representations(f, w);
    for (std::size_t i = 0; i < 5; ++i) {
      for (std::size_t j = 0; j < 6; ++j) {
        double lo = f[0](i, j), hi = f[0](i, j);
        for (const Matrix& e : f) {
          lo = std::min(lo, e(i, j));
          hi = std::max(hi, e(i, j));
        }
        CHECK(h(i, j) >= lo - 1e-12);
        CHECK(h(i, j) <= hi + 1e-12);
      }
    }
  }
}

TEST_CASE("task_loss") {
  const std::vector<int> y{0, 1, 2, 1};
  const Matrix h = Matrix::from_rows({{1, 0}, {0, 1}, {-1, 0}, {0, 1}});

  SUBCASE("zero head gives ln K") {
    const FusionHeadParams zero{Matrix(2, 3), Matrix(1, 3)};
    CHECK(task_loss(zero, h, y) == doctest::Approx(std::log(3.0)).epsilon(1e-14));
  }

  SUBCASE("a head that is certain of the truth gives ~0") {
    const FusionHeadParams sharp{Matrix::from_rows({{100, 0, -100}, {0, 100, 0}}), Matrix(1, 3)};
    CHECK(task_loss(sharp, h, y) <= 1e-10);
  }

  SUBCASE("label out of range") {
    const std::vector<int> bad{0, 1, 3, 1};
    CHECK_THROWS_AS(task_loss(FusionHeadParams{Matrix(2, 3), Matrix(1, 3)}, h, bad),
                    ContractError);
  }

  SUBCASE("gradient matches finite differences") {
    RngStream rng(5, "head");
    const FusionHeadParams head = init_fusion_head(2, 3, rng);
    const Matrix hv = random_matrix(4, 2, rng);
    Tape tape;
    FusionHeadBinding b = bind(tape, head, true);
    Var hvar = tape.leaf(hv);
    tape.backward(task_loss(b, hvar, y));
    std::vector<double> analytic;
    for (Var v : {b.w, b.b, hvar})
      analytic.insert(analytic.end(), tape.grad(v).data().begin(), tape.grad(v).data().end());

    std::vector<double> theta;
    for (const Matrix* m : {&head.w, &head.b, &hv})
      theta.insert(theta.end(), m->data().begin(), m->data().end());
    const auto numeric = finite_difference_gradient(
        [&](std::span<const double> th) {
          FusionHeadParams p{Matrix(2, 3, {th.begin(), th.begin() + 6}),
                             Matrix(1, 3, {th.begin() + 6, th.begin() + 9})};
          return task_loss(p, Matrix(4, 2, {th.begin() + 9, th.end()}), y);
        },
        theta, 1e-5);
    CHECK(max_relative_error(analytic, numeric) < 1e-5);
  }
}

TEST_CASE("mwcl_loss") {
  const std::vector<Matrix> f{Matrix::from_rows({{0, 0}}), Matrix::from_rows({{2, 0}})};
  CHECK(mwcl_loss(Matrix::from_rows({{1, 0}}), f, Matrix::from_rows({{0.5, 0.5}})) ==
        doctest::Approx(1.0));

  const std::vector<Matrix> single{Matrix::from_rows({{3, 4}})};
  CHECK(mwcl_loss(single[0], single, Matrix::from_rows({{1.0}})) == 0.0);

  const std::vector<Matrix> same{Matrix::from_rows({{1, 2}}), Matrix::from_rows({{1, 2}})};
  CHECK(mwcl_loss(fuse_representations(same, Matrix::from_rows({{0.9, 0.1}})), same,
                  Matrix::from_rows({{0.9, 0.1}})) < 1e-24);

  CHECK_THROWS_AS(mwcl_loss(Matrix(1, 3), f, Matrix::from_rows({{0.5, 0.5}})), ShapeError);
}

TEST_CASE("mwcl is non-negative and equals the weighted variance at the fused point") {
  RngStream rng(6, "mwcl-prop");
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t m = 2 + rng.below(4);
    std::vector<Matrix> f;
    for (std::size_t k = 0; k < m; ++k) f.push_back(random_matrix(3, 5, rng));
    const Matrix w = random_simplex_rows(3, m, rng);
    const Matrix h = fuse_representations(f, w);
    const double loss = mwcl_loss(h, f, w);
    CHECK(loss >= 0.0);
    // mean over rows of Σω‖f‖² − ‖h‖²
    double variance = 0.0;
    for (std::size_t i = 0; i < 3; ++i) {
      variance -= dot(h.row(i), h.row(i));
      for (std::size_t k = 0; k < m; ++k) variance += w(i, k) * dot(f[k].row(i), f[k].row(i));
    }
    CHECK(std::abs(loss - variance / 3.0) < 1e-9);
    CHECK(mwcl_loss(random_matrix(3, 5, rng), f, w) >= loss - 1e-12);
  }
}

TEST_CASE("mwcl gradient flows into h and every embedding") {
  RngStream rng(7, "mwcl-grad");
  const std::vector<Matrix> f{random_matrix(3, 4, rng), random_matrix(3, 4, rng)};
  const Matrix w = random_simplex_rows(3, 2, rng);
  const Matrix h0 = random_matrix(3, 4, rng);
  Tape tape;
  std::vector<Var> fv{tape.leaf(f[0]), tape.leaf(f[1])};
  Var hv = tape.leaf(h0);
  tape.backward(mwcl_loss(hv, fv, w));
  std::vector<double> analytic;
  for (Var v : {hv, fv[0], fv[1]})
    analytic.insert(analytic.end(), tape.grad(v).data().begin(), tape.grad(v).data().end());
  std::vector<double> theta;
  for (const Matrix* m : {&h0, &f[0], &f[1]}) theta.insert(theta.end(), m->data().begin(), m->data().end());
  const auto numeric = finite_difference_gradient(
      [&](std::span<const double> th) {
        const std::vector<Matrix> fs{Matrix(3, 4, {th.begin() + 12, th.begin() + 24}),
                                     Matrix(3, 4, {th.begin() + 24, th.end()})};
        return mwcl_loss(Matrix(3, 4, {th.begin(), th.begin() + 12}), fs, w);
      },
      theta, 1e-5);
  CHECK(max_relative_error(analytic, numeric) < 1e-5);
}

TEST_CASE("total_loss") {
  const LossBreakdown a = total_loss(0.7, 3.0, 0.0);
  CHECK(a.total == 0.7);
  const LossBreakdown b = total_loss(0.0, 1.0, 0.1);
  CHECK(b.total == doctest::Approx(0.1));
  CHECK_THROWS_AS(total_loss(1.0, 1.0, -0.1), ParameterError);

  RngStream rng(8, "total");
  for (int trial = 0; trial < 1000; ++trial) {
    const LossBreakdown r = total_loss(rng.uniform(0, 5), rng.uniform(0, 5), rng.uniform(0, 2));
    CHECK(std::abs(r.total - r.task - r.lambda * r.mwcl) <= 1e-12);
  }
}
