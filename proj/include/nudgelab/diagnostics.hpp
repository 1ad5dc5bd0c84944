#pragma once

// Error accounting shared by all three systems: time series of low/high/
// total L2 errors, exponential decay-rate fits, the reverse-triangle
// lower-bound check, and CSV persistence.

#include <cstddef>
#include <deque>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "nudgelab/spectral.hpp"

namespace nudgelab {

// Time-indexed record of named channels (err_low, err_high, err_total,
// per-component errors for the ODE system, norms, ...). Times are
// strictly increasing; channels all have the same length as times.
struct ErrorSeries {
  std::vector<double> times;
  // Deque keeps references from channel() stable while new
  // channels are appended.
  std::deque<std::pair<std::string, std::vector<double>>> channels;
  std::map<std::string, std::string> metadata;

  std::vector<double>& channel(const std::string& name);
  const std::vector<double>& channel(const std::string& name) const;
  bool has_channel(const std::string& name) const;
  std::size_t samples() const { return times.size(); }
};

struct DecayFit {
  double rate = 0.0;       // slope of ln(err) vs t, 1/time
  double intercept = 0.0;  // ln(err) at t = 0
  std::size_t window_begin = 0;  // first sample index of the fit window
  std::size_t window_end = 0;    // one past the last index
  double residual = 0.0;         // rms of ln-space residuals
};

struct ErrorSplit {
  double low = 0.0;
  double high = 0.0;
  double total = 0.0;
};

ErrorSplit split_error(const SpectralField1D& u, const SpectralField1D& v,
                       const ModeProjection& p);
ErrorSplit split_error(const SpectralVectorField2D& u,
                       const SpectralVectorField2D& v,
                       const ModeProjection& p);

// Least-squares line through (t, ln err) over the last `window_len`
// recorded samples of the channel. Samples at or below 1e-15 are
// excluded so the fit never chases the machine-precision floor; throws
// UndefinedFitError when fewer than two usable samples remain.
DecayFit fit_decay_rate(const ErrorSeries& series, const std::string& channel,
                        std::size_t window_len = 500);

struct BoundReport {
  bool ok = true;
  std::size_t first_violation = 0;  // valid only when !ok
  double worst_margin = 0.0;        // min of err_total - |norm_u - norm_v|
};

// Checks err_total(t) >= | ||u(t)|| - ||v(t)|| | - 1e-12 at every sample.
BoundReport lower_bound_check(std::span<const double> err_total,
                              std::span<const double> norm_u,
                              std::span<const double> norm_v);
// Convenience overload pulling channels err_total / norm_u / norm_v.
BoundReport lower_bound_check(const ErrorSeries& series);

// Relative Parseval defect max_t |low^2 + high^2 - total^2| / total^2
// over samples with total > 0.
double parseval_defect(const ErrorSeries& series);

// --- CSV persistence -------------------------------------------------------

// Writes (t, columns...) with a header row; doubles are printed with 17
// significant digits so output is bitwise reproducible and round-trips.
void write_series_csv(const std::string& path, const ErrorSeries& series,
                      std::span<const std::string> columns);
// Reads a CSV produced by write_series_csv back into a series whose
// channels are the file's non-time columns.
ErrorSeries read_series_csv(const std::string& path);

// Single-field spectrum: rows (k, abs_coeff) for k = 1..N/2.
void write_spectrum_csv(const std::string& path, const SpectralField1D& f);
// Radially binned single-field 2D spectrum: rows (shell, energy).
void write_spectrum_csv(const std::string& path,
                        const SpectralVectorField2D& f);

// 1D twin snapshot: rows (k, abs_uhat, abs_vhat) for k = 1..N/2.
void write_spectrum_csv(const std::string& path, const SpectralField1D& u,
                        const SpectralField1D& v);
// 2D twin snapshot: rows (shell, energy_u, energy_v) where
// shell s collects wavevectors with round(|k|) == s and energy is the
// Parseval-weighted squared-norm content of the shell.
void write_spectrum_csv(const std::string& path,
                        const SpectralVectorField2D& u,
                        const SpectralVectorField2D& v);
// Full 2D dump: rows (k1, k2, abs_uhat, abs_vhat).
void write_spectrum_full_csv(const std::string& path,
                             const SpectralVectorField2D& u,
                             const SpectralVectorField2D& v);

std::string format_double(double v);

}  // namespace nudgelab
