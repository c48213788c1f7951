#include <doctest.h>

#include "parcalm/linalg.hpp"
#include "support.hpp"

using namespace parcalm;
using testing::v;

TEST_SUITE("linalg") {
  TEST_CASE("rank with relative cutoff and floor") {
    Mat A(3, 2);
    A << 1, 2, 2, 4, 3, 6;
    CHECK(rank_info(A, 1e-8).rank == 1);
    Mat tiny = 1e-12 * Mat::Identity(2, 2);
    CHECK(rank_info(tiny, 1e-8).rank == 0);          // floor 1 treats noise as zero
    CHECK(rank_info(tiny, 1e-8, 0.0).rank == 2);     // purely relative
    CHECK(rank_info(Mat(0, 2), 1e-8).rank == 0);
  }

  TEST_CASE("null space is orthonormal and annihilated") {
    Mat A(1, 3);
    A << 1, 1, 1;
    Mat N = null_space(A, 1e-10);
    CHECK(N.cols() == 2);
    CHECK((A * N).norm() < 1e-12);
    CHECK((N.transpose() * N - Mat::Identity(2, 2)).norm() < 1e-12);
  }

  TEST_CASE("signed solve moves inside the null space") {
    // z1 + z2 = 1 with z1 <= 0 forces z = (0, 1) or any z1 <= 0.
    Mat A(1, 2);
    A << 1, 1;
    Mat C(1, 2);
    C << 1, 0;
    SignedSolve s = solve_with_signs(A, v({1}), C, 1e-12);
    CHECK(s.residual < 1e-12);
    CHECK(s.worst_sign <= 1e-12);
  }

  TEST_CASE("signed solve reports impossible signs") {
    Mat A = Mat::Identity(2, 2);
    Mat C(1, 2);
    C << 1, 0;
    SignedSolve s = solve_with_signs(A, v({1, 0}), C, 1e-12);
    CHECK(s.worst_sign == doctest::Approx(1));
  }

  TEST_CASE("polyhedron vertices of a simplex face") {
    // {u >= 0 : u1 + u3 = 1, u2 + u3 = 2} has vertices (1, 2, 0) and (0, 1, 1).
    Mat A(2, 3);
    A << 1, 0, 1, 0, 1, 1;
    auto V = polyhedron_vertices(A, v({1, 2}), 1e-10, 1e-10);
    REQUIRE(V.size() == 2);
    bool a = false, b = false;
    for (const Vec& z : V) {
      a = a || (z - v({1, 2, 0})).norm() < 1e-12;
      b = b || (z - v({0, 1, 1})).norm() < 1e-12;
    }
    CHECK(a);
    CHECK(b);
  }

  TEST_CASE("min-norm hull point") {
    Mat A(2, 2);
    A << 1, -1, 1, 1;  // columns (1, 1) and (-1, 1)
    HullPoint h = min_norm_hull_point(A);
    CHECK(h.point.isApprox(v({0, 1})));
    CHECK(h.weights.isApprox(v({0.5, 0.5})));
    Mat B(1, 2);
    B << 1, -1;
    CHECK(min_norm_hull_point(B).point.norm() < 1e-14);
  }

  TEST_CASE("gauss-newton converges on a badly scaled system") {
    // -1 + 2 u y = 0, y^2 - x = 0 at small x: the first row dominates the scale.
    const double x = 0.0010227014469331584;
    auto eval = [&](const Vec& z, Vec& r, Mat& J) {
      r = v({-1 + 2 * z[1] * z[0], z[0] * z[0] - x});
      J.resize(2, 2);
      J << 2 * z[1], 2 * z[0], 2 * z[0], 0;
      return true;
    };
    NewtonResult nr = gauss_newton(eval, v({0.0263158, 1 / (2 * 0.0263158)}), 1e-13, 50);
    CHECK(nr.converged);
    CHECK(nr.z[0] == doctest::Approx(std::sqrt(x)).epsilon(1e-12));
  }

  TEST_CASE("subset enumeration") {
    int count = 0;
    for_each_subset(4, 2, [&](const std::vector<int>&) { ++count; });
    CHECK(count == 1 + 4 + 6);
  }
}
