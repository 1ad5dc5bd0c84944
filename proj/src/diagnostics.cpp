#include "nudgelab/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "nudgelab/errors.hpp"

namespace nudgelab {

namespace {

// Floor below which error samples are treated as machine noise and
// excluded from log-space fits.
constexpr double kFitFloor = 1e-15;

SpectralField1D field_difference(const SpectralField1D& u,
                                 const SpectralField1D& v) {
  if (u.size() != v.size() || u.period() != v.period())
    throw ValidationError("split_error requires fields on the same grid");
  SpectralField1D d = u;
  auto dd = d.data();
  auto vv = v.data();
  for (size_t i = 0; i < dd.size(); ++i) dd[i] -= vv[i];
  return d;
}

}  // namespace

std::vector<double>& ErrorSeries::channel(const std::string& name) {
  for (auto& [n, values] : channels)
    if (n == name) return values;
  channels.emplace_back(name, std::vector<double>{});
  return channels.back().second;
}

const std::vector<double>& ErrorSeries::channel(const std::string& name) const {
  for (const auto& [n, values] : channels)
    if (n == name) return values;
  throw ValidationError("error series has no channel named '" + name + "'");
}

bool ErrorSeries::has_channel(const std::string& name) const {
  for (const auto& [n, values] : channels)
    if (n == name) return true;
  return false;
}

ErrorSplit split_error(const SpectralField1D& u, const SpectralField1D& v,
                       const ModeProjection& p) {
  const SpectralField1D d = field_difference(u, v);
  auto [low, high] = l2_norm_split(d, p);
  return {low, high, l2_norm(d)};
}

ErrorSplit split_error(const SpectralVectorField2D& u,
                       const SpectralVectorField2D& v,
                       const ModeProjection& p) {
  if (u.size() != v.size())
    throw ValidationError("split_error requires fields on the same grid");
  SpectralVectorField2D d = u;
  for (int comp = 0; comp < 2; ++comp) {
    auto dd = d.data(comp);
    auto vv = v.data(comp);
    for (size_t i = 0; i < dd.size(); ++i) dd[i] -= vv[i];
  }
  auto [low, high] = l2_norm_split(d, p);
  return {low, high, l2_norm(d)};
}

DecayFit fit_decay_rate(const ErrorSeries& series, const std::string& channel,
                        std::size_t window_len) {
  const auto& err = series.channel(channel);
  if (err.size() != series.times.size())
    throw ValidationError("channel '" + channel + "' length mismatch");
  const std::size_t n = err.size();
  const std::size_t begin = n > window_len ? n - window_len : 0;

  std::vector<double> ts, ys;
  for (std::size_t i = begin; i < n; ++i) {
    if (err[i] > kFitFloor) {
      ts.push_back(series.times[i]);
      ys.push_back(std::log(err[i]));
    }
  }
  if (ts.size() < 2)
    throw UndefinedFitError(
        "decay fit on channel '" + channel +
        "' needs at least two positive samples in the window");

  const double m = static_cast<double>(ts.size());
  double st = 0.0, sy = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    st += ts[i];
    sy += ys[i];
  }
  const double tbar = st / m, ybar = sy / m;
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - tbar) * (ts[i] - tbar);
    sty += (ts[i] - tbar) * (ys[i] - ybar);
  }
  if (stt == 0.0) throw UndefinedFitError("decay fit window has zero time span");

  DecayFit fit;
  fit.rate = sty / stt;
  fit.intercept = ybar - fit.rate * tbar;
  fit.window_begin = begin;
  fit.window_end = n;
  double ss = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double r = ys[i] - (fit.intercept + fit.rate * ts[i]);
    ss += r * r;
  }
  fit.residual = std::sqrt(ss / m);
  return fit;
}

BoundReport lower_bound_check(std::span<const double> err_total,
                              std::span<const double> norm_u,
                              std::span<const double> norm_v) {
  if (err_total.size() != norm_u.size() || err_total.size() != norm_v.size())
    throw ValidationError("lower_bound_check requires equal-length series");
  BoundReport report;
  report.worst_margin = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < err_total.size(); ++i) {
    const double margin = err_total[i] - std::abs(norm_u[i] - norm_v[i]);
    if (margin < report.worst_margin) report.worst_margin = margin;
    if (margin < -1e-12 && report.ok) {
      report.ok = false;
      report.first_violation = i;
    }
  }
  if (err_total.empty()) report.worst_margin = 0.0;
  return report;
}

BoundReport lower_bound_check(const ErrorSeries& series) {
  return lower_bound_check(series.channel("err_total"),
                           series.channel("norm_u"),
                           series.channel("norm_v"));
}

double parseval_defect(const ErrorSeries& series) {
  const auto& low = series.channel("err_low");
  const auto& high = series.channel("err_high");
  const auto& total = series.channel("err_total");
  double worst = 0.0;
  for (std::size_t i = 0; i < total.size(); ++i) {
    if (total[i] <= 0.0) continue;
    const double t2 = total[i] * total[i];
    worst = std::max(worst,
                     std::abs(low[i] * low[i] + high[i] * high[i] - t2) / t2);
  }
  return worst;
}

// --- CSV -------------------------------------------------------------------

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_series_csv(const std::string& path, const ErrorSeries& series,
                      std::span<const std::string> columns) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "t";
  for (const auto& col : columns) out << "," << col;
  out << "\n";
  for (std::size_t i = 0; i < series.times.size(); ++i) {
    out << format_double(series.times[i]);
    for (const auto& col : columns)
      out << "," << format_double(series.channel(col)[i]);
    out << "\n";
  }
  if (!out) throw Error("write to '" + path + "' failed");
}

ErrorSeries read_series_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "' for reading");
  std::string line;
  if (!std::getline(in, line)) throw Error("'" + path + "' is empty");

  std::vector<std::string> names;
  {
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) names.push_back(cell);
  }
  if (names.empty() || names[0] != "t")
    throw Error("'" + path + "' does not start with a 't' column");

  ErrorSeries series;
  for (std::size_t c = 1; c < names.size(); ++c) series.channel(names[c]);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t c = 0;
    while (std::getline(ss, cell, ',')) {
      const double v = std::stod(cell);
      if (c == 0)
        series.times.push_back(v);
      else
        series.channels[c - 1].second.push_back(v);
      ++c;
    }
    if (c != names.size()) throw Error("ragged row in '" + path + "'");
  }
  return series;
}

void write_spectrum_csv(const std::string& path, const SpectralField1D& f) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "k,abs_coeff\n";
  for (int k = 1; k <= f.size() / 2; ++k)
    out << k << "," << format_double(std::abs(f.coeff(k))) << "\n";
}

void write_spectrum_csv(const std::string& path, const SpectralField1D& u,
                        const SpectralField1D& v) {
  if (u.size() != v.size())
    throw ValidationError("spectrum export requires fields on the same grid");
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "k,abs_uhat,abs_vhat\n";
  for (int k = 1; k <= u.size() / 2; ++k)
    out << k << "," << format_double(std::abs(u.coeff(k))) << ","
        << format_double(std::abs(v.coeff(k))) << "\n";
}

namespace {

std::vector<double> shell_energies(const SpectralVectorField2D& f) {
  const int n = f.size();
  const int max_shell =
      static_cast<int>(std::lround(std::sqrt(2.0) * (n / 2))) + 1;
  std::vector<double> shells(max_shell + 1, 0.0);
  const double area = SpectralVectorField2D::period() *
                      SpectralVectorField2D::period();
  for (int comp = 0; comp < 2; ++comp) {
    auto c = f.data(comp);
    for (int i1 = 0; i1 < n; ++i1) {
      const int k1 = i1 <= n / 2 ? i1 : i1 - n;
      for (int i2 = 0; i2 < n; ++i2) {
        const int k2 = i2 <= n / 2 ? i2 : i2 - n;
        const int s = static_cast<int>(std::lround(
            std::sqrt(static_cast<double>(k1) * k1 + static_cast<double>(k2) * k2)));
        shells[s] += area * std::norm(c[static_cast<size_t>(i1) * n + i2]);
      }
    }
  }
  return shells;
}

}  // namespace

void write_spectrum_csv(const std::string& path,
                        const SpectralVectorField2D& f) {
  const auto shells = shell_energies(f);
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "shell,energy\n";
  for (std::size_t s = 1; s < shells.size(); ++s)
    out << s << "," << format_double(shells[s]) << "\n";
}

void write_spectrum_csv(const std::string& path,
                        const SpectralVectorField2D& u,
                        const SpectralVectorField2D& v) {
  const auto eu = shell_energies(u);
  const auto ev = shell_energies(v);
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "shell,energy_u,energy_v\n";
  for (std::size_t s = 1; s < eu.size(); ++s)
    out << s << "," << format_double(eu[s]) << "," << format_double(ev[s])
        << "\n";
}

void write_spectrum_full_csv(const std::string& path,
                             const SpectralVectorField2D& u,
                             const SpectralVectorField2D& v) {
  const int n = u.size();
  std::ofstream out(path);
  if (!out) throw Error("cannot open '" + path + "' for writing");
  out << "k1,k2,abs_uhat,abs_vhat\n";
  for (int k1 = -n / 2 + 1; k1 <= n / 2; ++k1) {
    for (int k2 = -n / 2 + 1; k2 <= n / 2; ++k2) {
      const double au = std::hypot(std::abs(u.coeff(0, k1, k2)),
                                   std::abs(u.coeff(1, k1, k2)));
      const double av = std::hypot(std::abs(v.coeff(0, k1, k2)),
                                   std::abs(v.coeff(1, k1, k2)));
      out << k1 << "," << k2 << "," << format_double(au) << ","
          << format_double(av) << "\n";
    }
  }
}

}  // namespace nudgelab
