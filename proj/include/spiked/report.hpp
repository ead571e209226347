#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "spiked/experiment.hpp"
#include "spiked/linalg.hpp"

namespace spiked::report {

inline constexpr std::string_view kCsvHeader =
    "seed,n,r,k,a,noise,scheme,method,d_inf,d_2inf,lambda_true,lambda_hat,sigma2_hat,alpha_hat,support_size,"
    "fallback,wall_ms";

/// Shortest decimal string that parses back to exactly `x`.
std::string format_real(double x);

/// Header plus one LF-terminated line per record; missing values are empty fields.
void emit_csv(std::ostream& os, std::span<const exp::TrialRecord> records);
std::string emit_csv(std::span<const exp::TrialRecord> records);

/// Inverse of emit_csv. Throws InputError (with the line number) on malformed input.
std::vector<exp::TrialRecord> parse_csv(std::istream& is);
std::vector<exp::TrialRecord> parse_csv(std::string_view text);

/// Summary table; `metric` fills the leading column so several metrics can share one file.
void emit_summary_csv(std::ostream& os, std::span<const exp::SummaryRow> rows, std::string_view metric,
                      bool header = true);

struct PlotSpec {
  std::string metric = "d_inf";
  std::string title;
  int width = 900;
  int height = 560;
};

/// Log-y line chart of the mean against n: one line per (a, method, k,
/// noise, scheme) group, color per method, dash pattern per a, and the
/// bootstrap interval drawn as a translucent band.
std::string emit_plot(std::span<const exp::SummaryRow> rows, const PlotSpec& spec);

/// Plain-text matrix: first token n, then n*n reals row-major. Symmetry is
/// checked within 1e-9.
linalg::SymMatrix read_matrix(std::istream& is);
linalg::SymMatrix read_matrix_file(const std::string& path);

/// Applies a JSON config document on top of `cfg`. Unknown keys raise InputError.
void apply_config_json(std::string_view text, exp::ExperimentConfig& cfg);
void apply_config_file(const std::string& path, exp::ExperimentConfig& cfg);

/// Run metadata as JSON: the effective configuration and the bootstrap variant.
std::string metadata_json(const exp::ExperimentConfig& cfg, double level, std::size_t resamples);

/// Writes `content` to `path`, throwing InputError with the path on failure.
void write_file(const std::string& path, std::string_view content);

}  // namespace spiked::report
