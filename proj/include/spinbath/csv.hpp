// csv.hpp: CSV ingestion with row-addressed errors, and deterministic CSV output.

#pragma once

#include "spinbath/nv_relaxometry.hpp"

#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace spinbath {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;  ///< 1-based file line of each row
};

/// Split lines on commas; blank lines and lines starting with '#' are skipped.
/// An empty file yields an empty table with no header.
CsvTable parse_csv(const std::string& text);
CsvTable read_csv_file(const std::string& path);

/// Throws DataError unless the header matches `expected` exactly.
void require_columns(const CsvTable& t, const std::vector<std::string>& expected, const std::string& source);

/// Parse a full-field double; throws DataError naming source, row and column.
double parse_number(const std::string& field, const std::string& source, std::size_t line, const std::string& column);

/// Columns nv_id, b_gauss, t1_cupc_us, t1_cupc_sigma_us, t1_free_us, t1_free_sigma_us.
MeasurementSet read_measurements(const std::string& path);
MeasurementSet parse_measurements(const std::string& text, const std::string& source = "measurements");

/// Columns t_us, signal, sigma.
DecayCurve read_decay_curve(const std::string& path);
DecayCurve parse_decay_curve(const std::string& text, const std::string& source = "decay");

/// Columns nv_id, d_ref_nm.
std::map<std::string, double> read_reference_depths(const std::string& path);

/// Text that reads back to the same double (%.17g).
std::string format_double(double v);

/// Writes comma-joined rows to a stream.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

struct SpectrumRow {
    double omega_mhz = 0.0;
    double s_e = 0.0;
};

std::vector<SpectrumRow> parse_spectrum_csv(const std::string& text);

}  // namespace spinbath
