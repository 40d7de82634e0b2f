#include <doctest.h>

#include "dip/coupling.hpp"

using namespace dip;

TEST_CASE("coupling apply and transpose") {
  SparseCoupling a(2, 3);
  a.add(0, 0, 1.0);
  a.add(0, 2, -2.0);
  a.add(1, 1, 3.0);

  Vector x(3);
  x << 1.0, 2.0, 3.0;
  const Vector y = a.apply(x);
  CHECK(y[0] == doctest::Approx(-5.0));
  CHECK(y[1] == doctest::Approx(6.0));

  Vector z(2);
  z << 1.0, -1.0;
  const Vector back = a.apply_transpose(z);
  CHECK(back[0] == doctest::Approx(1.0));
  CHECK(back[1] == doctest::Approx(-3.0));
  CHECK(back[2] == doctest::Approx(-2.0));

  CHECK(a.dense()(0, 2) == doctest::Approx(-2.0));
  CHECK(a.nonzero_rows() == std::vector<int>{0, 1});
}

TEST_CASE("coupling nonzero rows skip empty and zero entries") {
  SparseCoupling a(4, 2);
  a.add(1, 0, 0.5);
  a.add(3, 1, 0.0);  // structural zero does not count
  CHECK(a.nonzero_rows() == std::vector<int>{1});
}

TEST_CASE("coupling validation rejects out-of-range triplets") {
  SparseCoupling a(2, 2);
  a.add(2, 0, 1.0);
  CHECK_THROWS_AS(a.validate(), InstanceError);

  SparseCoupling bad_len(1, 1);
  bad_len.add(0, 0, 1.0);
  Vector x(2);
  x << 1.0, 2.0;
  CHECK_THROWS_AS(bad_len.apply(x), InstanceError);
}
