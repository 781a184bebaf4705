#include "jjres/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>

namespace jjres::io {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// One non-comment line with its 1-based position in the file.
struct Line {
  std::string_view text;
  std::size_t number = 0;
};

std::vector<Line> content_lines(std::string_view text) {
  if (text.substr(0, 3) == "\xEF\xBB\xBF") text.remove_prefix(3);
  std::vector<Line> out;
  std::size_t pos = 0;
  std::size_t number = 0;
  while (pos <= text.size()) {
    const auto nl = text.find('\n', pos);
    const auto raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    ++number;
    const auto t = trim(raw);
    if (!t.empty() && t.front() != '#') out.push_back({t, number});
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

// Header name -> column index, with schema checks against the allowed set.
class Header {
 public:
  Header(const Line& line, std::initializer_list<const char*> allowed) {
    const auto cells = split(line.text);
    for (std::size_t i = 0; i < cells.size(); ++i) {
      const std::string name = lower(cells[i]);
      if (name.empty()) throw SchemaError("empty column name at position " + std::to_string(i + 1));
      if (std::find_if(allowed.begin(), allowed.end(),
                       [&](const char* a) { return name == a; }) == allowed.end())
        throw SchemaError("unrecognized column '" + std::string(cells[i]) + "'");
      if (!index_.emplace(name, i).second)
        throw SchemaError("duplicated column '" + std::string(cells[i]) + "'");
    }
    width_ = cells.size();
  }

  bool has(const std::string& name) const { return index_.count(name) > 0; }
  std::size_t at(const std::string& name) const { return index_.at(name); }
  std::size_t width() const { return width_; }

  void require(const std::string& name) const {
    if (!has(name)) throw SchemaError("missing required column '" + name + "'");
  }

 private:
  std::map<std::string, std::size_t> index_;
  std::size_t width_ = 0;
};

double parse_number(std::string_view cell, const Line& line, std::size_t row,
                    const std::string& column) {
  double v = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    std::ostringstream msg;
    msg << "row " << row << " (line " << line.number << "): column '" << column
        << "' is not a finite number: '" << cell << "'";
    throw DataError(msg.str());
  }
  return v;
}

std::vector<std::string_view> row_cells(const Line& line, std::size_t row, std::size_t width) {
  auto cells = split(line.text);
  if (cells.size() != width) {
    std::ostringstream msg;
    msg << "row " << row << " (line " << line.number << "): expected " << width
        << " fields, found " << cells.size();
    throw DataError(msg.str());
  }
  return cells;
}

struct ParsedRow {
  double freq = 0.0;
  Complex value;
  std::optional<double> sigma;
  std::size_t row = 0;
  std::size_t line = 0;
};

FrequencyTrace build_trace(const std::vector<ParsedRow>& rows, double power) {
  std::vector<ComplexSample> samples;
  std::vector<double> sigma;
  samples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& r = rows[i];
    if (!(r.freq > 0.0)) {
      std::ostringstream msg;
      msg << "row " << r.row << " (line " << r.line << "): frequency must be positive";
      throw DataError(msg.str());
    }
    if (i > 0 && !(r.freq > rows[i - 1].freq)) {
      std::ostringstream msg;
      msg << "row " << r.row << " (line " << r.line << "): frequency " << format_double(r.freq)
          << " is not strictly greater than the previous " << format_double(rows[i - 1].freq);
      throw DataError(msg.str());
    }
    if (r.sigma) {
      if (!(*r.sigma > 0.0)) {
        std::ostringstream msg;
        msg << "row " << r.row << " (line " << r.line << "): sigma must be positive";
        throw DataError(msg.str());
      }
      sigma.push_back(*r.sigma);
    }
    samples.push_back({r.freq, r.value});
  }
  return FrequencyTrace(std::move(samples), power, {}, std::move(sigma));
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return ec == std::errc() ? std::string(buf, ptr) : std::string("nan");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TraceData parse_trace_csv(const std::filesystem::path& path) {
  return parse_trace_csv_text(read_file(path));
}

TraceData parse_trace_csv_text(std::string_view text, double default_power_dbm) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw SchemaError("file is empty; a header row is required");
  const Header header(lines.front(),
                      {"freq_hz", "re", "im", "mag_db", "phase_rad", "power_dbm", "sigma"});
  header.require("freq_hz");
  const bool cartesian = header.has("re") || header.has("im");
  const bool polar = header.has("mag_db") || header.has("phase_rad");
  if (cartesian && polar)
    throw SchemaError(std::string("ambiguous value columns: '") +
                      (header.has("re") ? "re" : "im") + "' together with '" +
                      (header.has("mag_db") ? "mag_db" : "phase_rad") + "'");
  if (!cartesian && !polar) throw SchemaError("missing value columns: need re,im or mag_db,phase_rad");
  if (cartesian) {
    header.require("re");
    header.require("im");
  } else {
    header.require("mag_db");
    header.require("phase_rad");
  }
  const bool has_power = header.has("power_dbm");
  const bool has_sigma = header.has("sigma");
  const std::string c1 = cartesian ? "re" : "mag_db";
  const std::string c2 = cartesian ? "im" : "phase_rad";

  // Rows grouped by power in order of first appearance.
  std::vector<double> power_order;
  std::map<double, std::vector<ParsedRow>> groups;
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const Line& line = lines[k];
    const std::size_t row = k;
    const auto cells = row_cells(line, row, header.width());
    ParsedRow r;
    r.row = row;
    r.line = line.number;
    r.freq = parse_number(cells[header.at("freq_hz")], line, row, "freq_hz");
    const double v1 = parse_number(cells[header.at(c1)], line, row, c1);
    const double v2 = parse_number(cells[header.at(c2)], line, row, c2);
    r.value = cartesian ? Complex{v1, v2} : std::polar(std::pow(10.0, v1 / 20.0), v2);
    if (has_sigma) r.sigma = parse_number(cells[header.at("sigma")], line, row, "sigma");
    const double power =
        has_power ? parse_number(cells[header.at("power_dbm")], line, row, "power_dbm")
                  : default_power_dbm;
    auto [it, inserted] = groups.try_emplace(power);
    if (inserted) power_order.push_back(power);
    it->second.push_back(r);
  }
  if (groups.empty()) throw DataError("file has a header but no data rows");

  if (!has_power) return build_trace(groups.begin()->second, default_power_dbm);
  std::vector<FrequencyTrace> traces;
  for (const auto& [power, rows] : groups) traces.push_back(build_trace(rows, power));
  return PowerSweep(std::move(traces));
}

FieldData parse_field_csv(const std::filesystem::path& path) {
  return parse_field_csv_text(read_file(path));
}

FieldData parse_field_csv_text(std::string_view text) {
  const auto lines = content_lines(text);
  if (lines.empty()) throw SchemaError("file is empty; a header row is required");
  const Header header(lines.front(), {"field_t", "fr_hz", "sigma_hz"});
  header.require("field_t");
  header.require("fr_hz");
  FieldData out;
  out.has_sigma = header.has("sigma_hz");
  for (std::size_t k = 1; k < lines.size(); ++k) {
    const Line& line = lines[k];
    const auto cells = row_cells(line, k, header.width());
    FieldSweepPoint p;
    p.field = parse_number(cells[header.at("field_t")], line, k, "field_t");
    p.resonance = parse_number(cells[header.at("fr_hz")], line, k, "fr_hz");
    p.sigma = out.has_sigma ? parse_number(cells[header.at("sigma_hz")], line, k, "sigma_hz") : 1.0;
    try {
      validate(p);
    } catch (const DataError& e) {
      std::ostringstream msg;
      msg << "row " << k << " (line " << line.number << "): " << e.what();
      throw DataError(msg.str());
    }
    out.points.push_back(p);
  }
  if (out.points.empty()) throw DataError("file has a header but no data rows");
  return out;
}

namespace {

void write_values(std::ostream& out, const Complex& v, ValueFormat format) {
  if (format == ValueFormat::kReIm)
    out << format_double(v.real()) << ',' << format_double(v.imag());
  else
    out << format_double(20.0 * std::log10(std::abs(v))) << ',' << format_double(std::arg(v));
}

const char* value_header(ValueFormat format) {
  return format == ValueFormat::kReIm ? "re,im" : "mag_db,phase_rad";
}

}  // namespace

void write_trace_csv(std::ostream& out, const FrequencyTrace& trace, ValueFormat format) {
  out << "freq_hz," << value_header(format) << (trace.weighted() ? ",sigma" : "") << '\n';
  for (std::size_t i = 0; i < trace.size(); ++i) {
    const auto& s = trace.samples()[i];
    out << format_double(s.frequency) << ',';
    write_values(out, s.value, format);
    if (trace.weighted()) out << ',' << format_double(trace.sigma()[i]);
    out << '\n';
  }
}

void write_sweep_csv(std::ostream& out, const PowerSweep& sweep, ValueFormat format) {
  out << "power_dbm,freq_hz," << value_header(format) << '\n';
  for (const auto& trace : sweep.traces()) {
    for (const auto& s : trace.samples()) {
      out << format_double(trace.drive_power()) << ',' << format_double(s.frequency) << ',';
      write_values(out, s.value, format);
      out << '\n';
    }
  }
}

void write_field_csv(std::ostream& out, std::span<const FieldSweepPoint> points) {
  out << "field_t,fr_hz,sigma_hz\n";
  for (const auto& p : points)
    out << format_double(p.field) << ',' << format_double(p.resonance) << ','
        << format_double(p.sigma) << '\n';
}

}  // namespace jjres::io
