#include "doctest.h"
#include "oracles.hpp"
#include "risjcas/array_geometry.hpp"
#include "risjcas/errors.hpp"

using namespace risjcas;

TEST_CASE("ula steering trivial cases") {
  UlaSpec s{4, 0.05, 0.1};
  CVector a = ula_steering(s, 0.0);
  CHECK((a - CVector::Ones(4)).norm() < 1e-15);

  UlaSpec two{2, 0.05, 0.1};
  CVector b = ula_steering(two, kPi / 2);
  CHECK(std::abs(b(0) - std::polar(1.0, -kPi / 2)) < 1e-15);
  CHECK(std::abs(b(1) - std::polar(1.0, kPi / 2)) < 1e-15);
}

TEST_CASE("ula steering matches scalar loop and has unit modulus") {
  UlaSpec s{4, 0.05, 0.1};
  CHECK(oracle::rel_err(ula_steering(s, kPi / 6), oracle::ula_loop(4, 0.5, kPi / 6)) < 1e-14);
  for (int n : {1, 3, 8})
    for (double d : {0.125, 0.25, 0.5, 1.0})
      for (double th : {-1.2, -0.3, 0.0, 0.7, 1.5}) {
        UlaSpec u{n, d, 1.0};
        CVector a = ula_steering(u, th);
        CHECK(oracle::rel_err(a, oracle::ula_loop(n, d, th)) < 1e-13);
        CHECK((a.cwiseAbs().array() - 1.0).abs().maxCoeff() < 1e-12);
      }
}

TEST_CASE("ula derivative") {
  UlaSpec s{4, 0.05, 0.1};
  CHECK(ula_steering_derivative(s, kPi / 2).norm() < 1e-14);

  auto f = [&](double t) { return ula_steering(s, t); };
  CHECK(oracle::rel_err(ula_steering_derivative(s, 0.3), oracle::central_difference(f, 0.3)) < 1e-6);

  UlaSpec one{1, 0.05, 0.1};
  CHECK(std::abs(ula_steering_derivative(one, 0.9)(0)) == 0.0);

  for (double th : {-1.0, -0.2, 0.4, 1.1}) {
    UlaSpec u{6, 0.03, 0.1};
    auto g = [&](double t) { return ula_steering(u, t); };
    CHECK(oracle::rel_err(ula_steering_derivative(u, th), oracle::central_difference(g, th)) < 1e-6);
  }
}

TEST_CASE("upa steering") {
  UpaSpec s3{3, 0.05, 0.1};
  CHECK((upa_steering(s3, 0.0, 1.3) - CVector::Ones(9)).norm() < 1e-15);

  UpaSpec s2{2, 0.05, 0.1};
  CVector a = upa_steering(s2, kPi / 3, 0.0);
  CHECK((a.cwiseAbs().array() - std::sqrt(0.5)).abs().maxCoeff() < 1e-15);

  CHECK(oracle::rel_err(upa_steering(s2, kPi / 5, kPi / 7),
                        oracle::upa_loop(2, 0.5, kPi / 5, kPi / 7)) < 1e-14);
  UpaSpec s8{8, 0.025, 0.1};
  CHECK(oracle::rel_err(upa_steering(s8, -0.8, 2.1), oracle::upa_loop(8, 0.25, -0.8, 2.1)) < 1e-13);
}

TEST_CASE("upa derivative") {
  UpaSpec s2{2, 0.05, 0.1};
  auto f = [&](double t) { return upa_steering(s2, t, 0.9); };
  CHECK(oracle::rel_err(upa_steering_derivative(s2, 0.4, 0.9), oracle::central_difference(f, 0.4)) < 1e-6);

  // at theta = 0 only the two phase terms remain
  UpaSpec s3{3, 0.05, 0.1};
  const double psi = 0.6;
  CVector expected(9);
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      expected(r * 3 + c) = cd(0.0, kPi * (r * std::sin(psi) + c * std::cos(psi)));
  CHECK(oracle::rel_err(upa_steering_derivative(s3, 0.0, psi), expected) < 1e-14);

  UpaSpec s1{1, 0.05, 0.1};
  for (double th : {0.3, -0.7, 1.2}) {
    const double ct = std::cos(th);
    const double ref = -std::sin(th) * ct / (2.0 * std::pow(std::abs(ct), 1.5));
    CHECK(std::abs(upa_steering_derivative(s1, th, 0.2)(0) - ref) < 1e-14);
  }

  CHECK_THROWS_AS(upa_steering_derivative(s2, kPi / 2, 0.0), DomainError);

  for (double th : {-1.3, -0.5, 0.2, 1.0})
    for (double psi2 : {0.0, 1.0, 2.5}) {
      UpaSpec s{4, 0.0125, 0.1};
      auto g = [&](double t) { return upa_steering(s, t, psi2); };
      CHECK(oracle::rel_err(upa_steering_derivative(s, th, psi2), oracle::central_difference(g, th)) < 1e-6);
    }
}
