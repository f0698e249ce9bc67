#include "spinbath/csv.hpp"

#include "spinbath/constants.hpp"
#include "spinbath/errors.hpp"

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace spinbath {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) {
        return "";
    }
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw DataError("cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string where(const std::string& source, std::size_t line) {
    return source + " row " + std::to_string(line);
}

void require_width(const CsvTable& t, std::size_t r, const std::string& source) {
    if (t.rows[r].size() != t.header.size()) {
        throw DataError(where(source, t.line_numbers[r]) + ": expected " + std::to_string(t.header.size()) +
                        " fields, got " + std::to_string(t.rows[r].size()));
    }
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
    CsvTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++number;
        const std::string stripped = trim(line);
        if (stripped.empty() || stripped.front() == '#') {
            continue;
        }
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(stripped);
        while (std::getline(ls, field, ',')) {
            fields.push_back(trim(field));
        }
        if (!stripped.empty() && stripped.back() == ',') {
            fields.emplace_back();
        }
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
        } else {
            t.rows.push_back(std::move(fields));
            t.line_numbers.push_back(number);
        }
    }
    return t;
}

CsvTable read_csv_file(const std::string& path) { return parse_csv(slurp(path)); }

void require_columns(const CsvTable& t, const std::vector<std::string>& expected, const std::string& source) {
    if (t.header.empty() && t.rows.empty()) {
        return;
    }
    if (t.header != expected) {
        std::string want;
        for (const auto& c : expected) {
            want += (want.empty() ? "" : ",") + c;
        }
        throw DataError(source + " row 1: header must be '" + want + "'");
    }
}

double parse_number(const std::string& field, const std::string& source, std::size_t line, const std::string& column) {
    if (field.empty()) {
        throw DataError(where(source, line) + ": column " + column + " is empty");
    }
    errno = 0;
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (end != field.c_str() + field.size() || errno == ERANGE || !std::isfinite(v)) {
        throw DataError(where(source, line) + ": column " + column + " is not a finite number ('" + field + "')");
    }
    return v;
}

MeasurementSet parse_measurements(const std::string& text, const std::string& source) {
    const CsvTable t = parse_csv(text);
    const std::vector<std::string> cols{"nv_id",      "b_gauss",       "t1_cupc_us",
                                        "t1_cupc_sigma_us", "t1_free_us", "t1_free_sigma_us"};
    require_columns(t, cols, source);
    MeasurementSet set;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        require_width(t, r, source);
        const auto& f = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        MeasurementRecord rec;
        rec.nv_id = f[0];
        if (rec.nv_id.empty()) {
            throw DataError(where(source, line) + ": column nv_id is empty");
        }
        rec.b_gauss = parse_number(f[1], source, line, cols[1]);
        rec.t1_cupc = parse_number(f[2], source, line, cols[2]) * units::kMicrosecond;
        rec.t1_cupc_sigma = parse_number(f[3], source, line, cols[3]) * units::kMicrosecond;
        rec.t1_free = parse_number(f[4], source, line, cols[4]) * units::kMicrosecond;
        rec.t1_free_sigma = parse_number(f[5], source, line, cols[5]) * units::kMicrosecond;
        try {
            rec.validate();
        } catch (const DataError& e) {
            throw DataError(where(source, line) + ": " + e.what());
        }
        set.records.push_back(rec);
    }
    return set;
}

MeasurementSet read_measurements(const std::string& path) { return parse_measurements(slurp(path), path); }

DecayCurve parse_decay_curve(const std::string& text, const std::string& source) {
    const CsvTable t = parse_csv(text);
    const std::vector<std::string> cols{"t_us", "signal", "sigma"};
    require_columns(t, cols, source);
    DecayCurve c;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        require_width(t, r, source);
        const auto& f = t.rows[r];
        const std::size_t line = t.line_numbers[r];
        DecaySample s;
        s.t = parse_number(f[0], source, line, cols[0]) * units::kMicrosecond;
        s.y = parse_number(f[1], source, line, cols[1]);
        s.sigma = parse_number(f[2], source, line, cols[2]);
        if (!(s.sigma > 0.0)) {
            throw DataError(where(source, line) + ": column sigma must be > 0");
        }
        if (!c.samples.empty() && !(s.t > c.samples.back().t)) {
            throw DataError(where(source, line) + ": column t_us must be strictly increasing");
        }
        c.samples.push_back(s);
    }
    return c;
}

DecayCurve read_decay_curve(const std::string& path) { return parse_decay_curve(slurp(path), path); }

std::map<std::string, double> read_reference_depths(const std::string& path) {
    const CsvTable t = read_csv_file(path);
    const std::vector<std::string> cols{"nv_id", "d_ref_nm"};
    require_columns(t, cols, path);
    std::map<std::string, double> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        require_width(t, r, path);
        const std::size_t line = t.line_numbers[r];
        if (t.rows[r][0].empty()) {
            throw DataError(where(path, line) + ": column nv_id is empty");
        }
        out[t.rows[r][0]] = parse_number(t.rows[r][1], path, line, cols[1]);
    }
    return out;
}

std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i > 0) {
            out << ',';
        }
        out << fields[i];
    }
    out << '\n';
}

std::vector<SpectrumRow> parse_spectrum_csv(const std::string& text) {
    const CsvTable t = parse_csv(text);
    const std::vector<std::string> cols{"omega_MHz", "S_e_T2s"};
    require_columns(t, cols, "spectrum");
    std::vector<SpectrumRow> out;
    for (std::size_t r = 0; r < t.rows.size(); ++r) {
        require_width(t, r, "spectrum");
        out.push_back({parse_number(t.rows[r][0], "spectrum", t.line_numbers[r], cols[0]),
                       parse_number(t.rows[r][1], "spectrum", t.line_numbers[r], cols[1])});
    }
    return out;
}

}  // namespace spinbath
