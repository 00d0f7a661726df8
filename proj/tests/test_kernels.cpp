#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "seqpi/estimators.hpp"
#include "seqpi/kernels.hpp"

using namespace seqpi;
using namespace seqpi::kernels;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo, double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double abs_dot(const std::vector<double>& x, const std::vector<double>& y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += std::abs(x[i] * y[i]);
  return s;
}

struct IsaGuard {
  Isa saved = active_isa();
  ~IsaGuard() { set_active_isa(saved); }
};

const std::vector<std::size_t> kSizes = [] {
  std::vector<std::size_t> s;
  for (std::size_t n = 0; n <= 67; ++n) s.push_back(n);
  for (std::size_t n : {127, 128, 129, 1000, 4097, 100003}) s.push_back(n);
  return s;
}();

}  // namespace

TEST_CASE("scalar reference kernels match naive loops") {
  std::mt19937_64 rng(1);
  const auto x = random_vector(rng, 13, -1, 1);
  const auto y = random_vector(rng, 13, -1, 1);
  const auto w = random_vector(rng, 13, 0, 2);
  double d = 0.0;
  double wd = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d += x[i] * y[i];
    wd += w[i] * x[i] * y[i];
  }
  CHECK(scalar::dot(x.data(), y.data(), x.size()) == doctest::Approx(d).epsilon(1e-14));
  CHECK(scalar::weighted_dot(w.data(), x.data(), y.data(), x.size()) ==
        doctest::Approx(wd).epsilon(1e-14));
  auto z = y;
  scalar::axpy(2.5, x.data(), z.data(), z.size());
  for (std::size_t i = 0; i < z.size(); ++i) CHECK(z[i] == doctest::Approx(y[i] + 2.5 * x[i]));
}

TEST_CASE("vector variants agree with the scalar reference at every size") {
  std::vector<Isa> variants;
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (isa_available(isa)) variants.push_back(isa);
  }
  if (variants.empty()) {
    MESSAGE("no vector variant available on this CPU; only the scalar path is exercised");
  }
  std::mt19937_64 rng(7);
  for (Isa isa : variants) {
    CAPTURE(isa_name(isa));
    for (std::size_t n : kSizes) {
      CAPTURE(n);
      const auto x = random_vector(rng, n, -3, 3);
      const auto y = random_vector(rng, n, -3, 3);
      const auto w = random_vector(rng, n, 0, 2);
      const double ref = scalar::dot(x.data(), y.data(), n);
      const double tol = 1e-13 * (abs_dot(x, y) + 1.0);
      double got = 0.0;
      double got_w = 0.0;
      auto z_vec = y;
#if defined(SEQPI_HAVE_AVX2)
      if (isa == Isa::avx2) {
        got = avx2::dot(x.data(), y.data(), n);
        got_w = avx2::weighted_dot(w.data(), x.data(), y.data(), n);
        avx2::axpy(-1.75, x.data(), z_vec.data(), n);
      }
#endif
#if defined(SEQPI_HAVE_NEON)
      if (isa == Isa::neon) {
        got = neon::dot(x.data(), y.data(), n);
        got_w = neon::weighted_dot(w.data(), x.data(), y.data(), n);
        neon::axpy(-1.75, x.data(), z_vec.data(), n);
      }
#endif
      CHECK(std::abs(got - ref) <= tol);
      const double ref_w = scalar::weighted_dot(w.data(), x.data(), y.data(), n);
      CHECK(std::abs(got_w - ref_w) <= 2.0 * tol);
      auto z_ref = y;
      scalar::axpy(-1.75, x.data(), z_ref.data(), n);
      for (std::size_t i = 0; i < n; ++i) {
        REQUIRE(std::abs(z_vec[i] - z_ref[i]) <= 1e-14 * (std::abs(z_ref[i]) + 6.0));
      }
    }
  }
}

TEST_CASE("dispatch honours the selected variant and rejects unavailable ones") {
  IsaGuard guard;
  CHECK(set_active_isa(Isa::scalar));
  CHECK(active_isa() == Isa::scalar);
  CHECK(isa_available(Isa::scalar));
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (!isa_available(isa)) {
      CHECK_FALSE(set_active_isa(isa));
      CHECK(active_isa() == Isa::scalar);
    }
  }
  CHECK(isa_available(detect_isa()));
  std::vector<double> a{1, 2, 3}, b{4, 5, 6};
  CHECK(dot(a, b) == 32.0);
}

TEST_CASE("logistic fits agree across kernel variants") {
  IsaGuard guard;
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  DesignMatrix design({"intercept", "x1", "x2"});
  for (int i = 0; i < 5000; ++i) {
    const double x1 = g(rng);
    const double x2 = g(rng);
    const double p = 1.0 / (1.0 + std::exp(-(-1.0 + 0.8 * x1 - 0.5 * x2)));
    const double row[3] = {1.0, x1, x2};
    design.add_row(row, u(rng) < p ? 1.0 : 0.0);
  }
  REQUIRE(set_active_isa(Isa::scalar));
  const auto ref = fit_logistic(design);
  for (Isa isa : {Isa::avx2, Isa::neon}) {
    if (!set_active_isa(isa)) continue;
    const auto got = fit_logistic(design);
    for (std::size_t j = 0; j < ref.coef.size(); ++j) {
      CHECK(got.coef[j] == doctest::Approx(ref.coef[j]).epsilon(1e-9));
    }
  }
}
