#pragma once

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "jjres/core.hpp"

namespace jjres::io {

// Trace CSV: header row required. Columns (any order, case-insensitive):
//   freq_hz + (re, im | mag_db, phase_rad) [+ power_dbm] [+ sigma]
// A power_dbm column turns the file into a PowerSweep. Lines starting with '#'
// and blank lines are skipped.
using TraceData = std::variant<FrequencyTrace, PowerSweep>;

TraceData parse_trace_csv(const std::filesystem::path& path);
TraceData parse_trace_csv_text(std::string_view text, double default_power_dbm = 0.0);

enum class ValueFormat { kReIm, kMagPhase };

void write_trace_csv(std::ostream& out, const FrequencyTrace& trace,
                     ValueFormat format = ValueFormat::kReIm);
void write_sweep_csv(std::ostream& out, const PowerSweep& sweep,
                     ValueFormat format = ValueFormat::kReIm);

// Field CSV: field_t, fr_hz [, sigma_hz]. A missing sigma column gives 1 Hz per point.
struct FieldData {
  std::vector<FieldSweepPoint> points;
  bool has_sigma = false;
};

FieldData parse_field_csv(const std::filesystem::path& path);
FieldData parse_field_csv_text(std::string_view text);
void write_field_csv(std::ostream& out, std::span<const FieldSweepPoint> points);

/// Shortest text that round-trips the double exactly.
std::string format_double(double v);

/// Whole file as a string. Throws DataError when it cannot be read.
std::string read_file(const std::filesystem::path& path);

}  // namespace jjres::io
