#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "dms/errors.hpp"
#include "dms/theory_checks.hpp"

using namespace dms;

TEST_CASE("fusion_bound_terms") {
  SUBCASE("tight case: opposite vertices with antiparallel embeddings") {
    const Matrix f = Matrix::from_rows({{1, 0}, {-1, 0}});
    const std::vector<double> w{1, 0}, ws{0, 1};
    const BoundTerms t = fusion_bound_terms(f, w, ws);
    CHECK(t.lhs == doctest::Approx(2.0));
    CHECK(t.rhs == doctest::Approx(2.0));
    CHECK(std::abs(t.rhs - t.lhs) <= 1e-12);
  }

  SUBCASE("identical weights give zero on both sides") {
    const Matrix f = Matrix::from_rows({{1, 2}, {3, 4}, {5, 6}});
    const std::vector<double> w{0.2, 0.3, 0.5};
    const BoundTerms t = fusion_bound_terms(f, w, w);
    CHECK(t.lhs == 0.0);
    CHECK(t.rhs == 0.0);
  }

  SUBCASE("equal embeddings make the left side vanish") {
    const Matrix f = Matrix::from_rows({{1, -2}, {1, -2}});
    const std::vector<double> w{0.9, 0.1}, ws{0.4, 0.6};
    const BoundTerms t = fusion_bound_terms(f, w, ws);
    CHECK(t.lhs < 1e-12);
    CHECK(t.rhs == doctest::Approx(0.5 * 2 * std::sqrt(5.0)));
  }

  SUBCASE("hand-computed M=2 case") {
    // ω − ω* = (0.25, −0.25): lhs = 0.25·‖(3,4) − (0,1)‖ = 0.25·√18
    const Matrix f = Matrix::from_rows({{3, 4}, {0, 1}});
    const std::vector<double> w{0.75, 0.25}, ws{0.5, 0.5};
    const BoundTerms t = fusion_bound_terms(f, w, ws);
    CHECK(t.lhs == doctest::Approx(0.25 * std::sqrt(18.0)));
    CHECK(t.rhs == doctest::Approx(0.25 * 6.0));
  }

  SUBCASE("shape errors") {
    const std::vector<double> w{0.5, 0.5}, three{0.2, 0.3, 0.5};
    CHECK_THROWS_AS(fusion_bound_terms(Matrix(2, 3), w, three), ShapeError);
  }
}

TEST_CASE("weighted_spread") {
  const Matrix f = Matrix::from_rows({{0, 0}, {2, 0}});
  const std::vector<double> w{0.5, 0.5}, h{1, 0}, far{1, 1};
  // weighted variance about f̄ = (1, 0) and MWCL at h = f̄ are both 1.0
  CHECK(weighted_spread(f, w, h) == doctest::Approx(1.0));
  CHECK(weighted_spread(f, w, far) == doctest::Approx(2.0));
}

TEST_CASE("randomized bound check has no violations") {
  const BoundCheckResult r =
      check_fusion_approximation_bound(10000, ModalityRange{2, 5}, 16, RngStream(21, "bound"));
  CHECK(r.trials == 10000);
  CHECK(r.violations == 0);
  CHECK(r.max_slack >= -1e-9);
}

TEST_CASE("decomposition check") {
  const DecompositionCheckResult r =
      check_mwcl_decomposition(2000, ModalityRange{2, 5}, 6, RngStream(22, "decomp"));
  CHECK(r.at_mean.violations == 0);
  CHECK(r.off_mean.violations == 0);
  // the minus-sign variant is off by 2‖h − f̄‖², which is far from zero for random h
  CHECK(r.minus_form_max_residual > 1e-3);
}

TEST_CASE("check argument validation") {
  const RngStream rng(1, "x");
  CHECK_THROWS_AS(check_fusion_approximation_bound(10, ModalityRange{1, 3}, 4, rng), ParameterError);
  CHECK_THROWS_AS(check_fusion_approximation_bound(10, ModalityRange{4, 3}, 4, rng), ParameterError);
  CHECK_THROWS_AS(check_mwcl_decomposition(10, ModalityRange{2, 3}, 0, rng), ParameterError);
}
