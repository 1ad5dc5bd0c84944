#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "nudgelab/diagnostics.hpp"
#include "nudgelab/errors.hpp"
#include "test_support.hpp"

using namespace nudgelab;
using testsupport::random_field_1d;

TEST_CASE("split_error on equal fields is identically zero") {
  std::mt19937 rng(1);
  const SpectralField1D u = random_field_1d(rng, 128);
  const ErrorSplit s = split_error(u, u, ModeProjection::band(5));
  CHECK(s.low == 0.0);
  CHECK(s.high == 0.0);
  CHECK(s.total == 0.0);
}

TEST_CASE("split_error with support above the band") {
  SpectralField1D u(128, 2.0);
  u.set_mode_pair(6, Complex(0.5, 0.0));
  const SpectralField1D v(128, 2.0);
  const ErrorSplit s = split_error(u, v, ModeProjection::band(5));
  CHECK(s.low == 0.0);
  CHECK(s.high == doctest::Approx(l2_norm(u)).epsilon(1e-14));
  CHECK(s.total == doctest::Approx(l2_norm(u)).epsilon(1e-14));
}

TEST_CASE("split_error satisfies Parseval on random fields") {
  std::mt19937 rng(17);
  for (int rep = 0; rep < 10; ++rep) {
    const SpectralField1D u = random_field_1d(rng, 256);
    const SpectralField1D v = random_field_1d(rng, 256);
    const ErrorSplit s = split_error(u, v, ModeProjection::band(9));
    CHECK(s.low * s.low + s.high * s.high ==
          doctest::Approx(s.total * s.total).epsilon(1e-12));
  }
}

namespace {

ErrorSeries synthetic_series(double rate, double scale, int n = 800,
                             double dt = 0.01) {
  ErrorSeries s;
  auto& e = s.channel("err");
  for (int i = 0; i < n; ++i) {
    s.times.push_back(i * dt);
    e.push_back(scale * std::exp(rate * i * dt));
  }
  return s;
}

}  // namespace

TEST_CASE("decay fit recovers an exact exponential") {
  const ErrorSeries s = synthetic_series(-2.0, 1.0);
  const DecayFit fit = fit_decay_rate(s, "err", 500);
  CHECK(fit.rate == doctest::Approx(-2.0).epsilon(1e-9));
  CHECK(fit.window_end - fit.window_begin == 500);
}

TEST_CASE("decay fit of a constant channel is zero") {
  const ErrorSeries s = synthetic_series(0.0, 0.37);
  const DecayFit fit = fit_decay_rate(s, "err", 500);
  CHECK(fit.rate == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("decay fit is invariant under channel rescaling") {
  const ErrorSeries a = synthetic_series(-0.73, 1.0);
  const ErrorSeries b = synthetic_series(-0.73, 123.456);
  const DecayFit fa = fit_decay_rate(a, "err", 500);
  const DecayFit fb = fit_decay_rate(b, "err", 500);
  CHECK(std::abs(fa.rate - fb.rate) < 1e-12);
}

TEST_CASE("decay fit rejects windows without usable samples") {
  ErrorSeries s;
  auto& e = s.channel("err");
  for (int i = 0; i < 100; ++i) {
    s.times.push_back(i * 0.1);
    e.push_back(0.0);  // at/below the floor; excluded from the fit
  }
  CHECK_THROWS_AS(fit_decay_rate(s, "err", 50), UndefinedFitError);
  CHECK_THROWS_AS(fit_decay_rate(s, "missing", 50), ValidationError);
}

TEST_CASE("lower bound check") {
  ErrorSeries s;
  auto& total = s.channel("err_total");
  auto& nu = s.channel("norm_u");
  auto& nv = s.channel("norm_v");
  for (int i = 0; i < 10; ++i) {
    s.times.push_back(i);
    nu.push_back(2.0);
    nv.push_back(0.0);
    total.push_back(2.0);  // v = 0: error equals the reference norm
  }
  CHECK(lower_bound_check(s).ok);

  total[4] = 1.5;  // below |2 - 0|
  const BoundReport bad = lower_bound_check(s);
  CHECK_FALSE(bad.ok);
  CHECK(bad.first_violation == 4);
  CHECK(bad.worst_margin == doctest::Approx(-0.5));
}

TEST_CASE("series CSV round trips bitwise") {
  ErrorSeries s;
  auto& a = s.channel("a");
  auto& b = s.channel("b");
  std::mt19937 rng(9);
  std::uniform_real_distribution<double> uni(-1.0, 1.0);
  for (int i = 0; i < 50; ++i) {
    s.times.push_back(i * 0.1);
    a.push_back(uni(rng) * 1e-13);
    b.push_back(uni(rng) * 1e7);
  }
  const std::string path =
      (std::filesystem::temp_directory_path() / "nudgelab_series.csv").string();
  const std::vector<std::string> cols = {"a", "b"};
  write_series_csv(path, s, cols);
  const ErrorSeries back = read_series_csv(path);
  REQUIRE(back.times.size() == s.times.size());
  for (size_t i = 0; i < s.times.size(); ++i) {
    CHECK(back.times[i] == s.times[i]);
    CHECK(back.channel("a")[i] == a[i]);
    CHECK(back.channel("b")[i] == b[i]);
  }
  std::filesystem::remove(path);
}

TEST_CASE("single-field spectrum exports") {
  SpectralField1D f(64, 2.0);
  f.set_mode_pair(3, Complex(0.25, 0.0));
  const std::string p1 =
      (std::filesystem::temp_directory_path() / "nudgelab_spec1.csv").string();
  write_spectrum_csv(p1, f);
  std::ifstream in1(p1);
  std::string header;
  std::getline(in1, header);
  CHECK(header == "k,abs_coeff");

  SpectralVectorField2D g(32);
  g.set_mode_pair(0, 3, 4, Complex(0.0, 1.0));  // shell 5
  g.set_mode_pair(1, 3, 4, Complex(0.0, 2.0));
  const std::string p2 =
      (std::filesystem::temp_directory_path() / "nudgelab_spec2.csv").string();
  write_spectrum_csv(p2, g);
  std::ifstream in2(p2);
  std::getline(in2, header);
  CHECK(header == "shell,energy");
  double shell_total = 0.0;
  std::string line;
  while (std::getline(in2, line)) {
    int s;
    double e;
    REQUIRE(std::sscanf(line.c_str(), "%d,%lf", &s, &e) == 2);
    shell_total += e;
  }
  const double n2 = l2_norm(g);
  CHECK(shell_total == doctest::Approx(n2 * n2).epsilon(1e-12));
  std::filesystem::remove(p1);
  std::filesystem::remove(p2);
}
