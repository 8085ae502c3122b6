#include "genad/data/csv.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>
#include <string_view>
#include <vector>

#include "genad/errors.hpp"
#include "genad/io.hpp"

namespace genad::data {
namespace {

constexpr double kMissing = std::numeric_limits<double>::quiet_NaN();

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    pos = nl + 1;
  }
  while (!lines.empty() && lines.back().empty()) lines.pop_back();
  return lines;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t comma = line.find(',', pos);
    if (comma == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      return fields;
    }
    fields.push_back(line.substr(pos, comma - pos));
    pos = comma + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

[[noreturn]] void fail(const std::filesystem::path& path, std::size_t line, const std::string& what) {
  throw DataError(path.string() + ":" + std::to_string(line) + ": " + what);
}

std::int64_t parse_timestamp(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  s = trim(s);
  std::int64_t v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) {
    fail(path, line, "unparsable timestamp '" + std::string(s) + "'");
  }
  return v;
}

double parse_value(std::string_view s, const std::filesystem::path& path, std::size_t line) {
  s = trim(s);
  if (s.empty() || s == "nan" || s == "NaN" || s == "NA") return kMissing;
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size() || !std::isfinite(v)) {
    fail(path, line, "unparsable value '" + std::string(s) + "'");
  }
  return v;
}

struct Row {
  std::int64_t timestamp;
  std::size_t line;
  std::vector<double> cells;
};

std::vector<std::uint8_t> load_labels(const std::filesystem::path& path,
                                      const std::vector<std::int64_t>& timestamps) {
  const std::string text = io::read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) fail(path, 1, "missing header");
  const auto header = split_fields(lines[0]);
  if (header.size() != 2 || trim(header[0]) != "timestamp" || trim(header[1]) != "label") {
    fail(path, 1, "label header must be 'timestamp,label'");
  }
  std::map<std::int64_t, std::uint8_t> by_time;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line = i + 1;
    const auto fields = split_fields(lines[i]);
    if (fields.size() != 2) fail(path, line, "expected 2 fields, got " + std::to_string(fields.size()));
    const std::int64_t ts = parse_timestamp(fields[0], path, line);
    const std::string_view lab = trim(fields[1]);
    if (lab != "0" && lab != "1") fail(path, line, "label must be 0 or 1, got '" + std::string(lab) + "'");
    if (!by_time.emplace(ts, lab == "1" ? 1 : 0).second) {
      fail(path, line, "duplicate label timestamp " + std::to_string(ts));
    }
  }
  std::vector<std::uint8_t> labels;
  labels.reserve(timestamps.size());
  for (std::int64_t ts : timestamps) {
    auto it = by_time.find(ts);
    if (it == by_time.end()) {
      throw DataError(path.string() + ": label coverage incomplete (no label for timestamp " +
                      std::to_string(ts) + ")");
    }
    labels.push_back(it->second);
  }
  if (by_time.size() != timestamps.size()) {
    throw DataError(path.string() + ": label file has timestamps that are not in the data");
  }
  return labels;
}

}  // namespace

std::filesystem::path sibling_label_path(const std::filesystem::path& data_path) {
  std::filesystem::path p = data_path;
  p.replace_filename(data_path.stem().string() + ".labels.csv");
  return p;
}

SeriesFrame load_csv(const std::filesystem::path& path) {
  const auto labels = sibling_label_path(path);
  if (std::filesystem::exists(labels)) return load_csv(path, labels);
  return load_csv(path, std::nullopt);
}

SeriesFrame load_csv(const std::filesystem::path& path,
                     const std::optional<std::filesystem::path>& label_path) {
  const std::string text = io::read_file(path);
  const auto lines = split_lines(text);
  if (lines.empty()) fail(path, 1, "missing header");
  const auto header = split_fields(lines[0]);
  if (header.size() < 2 || trim(header[0]) != "timestamp") {
    fail(path, 1, "header must start with 'timestamp' followed by metric names");
  }
  SeriesFrame frame;
  for (std::size_t i = 1; i < header.size(); ++i) {
    const std::string_view name = trim(header[i]);
    if (name.empty()) fail(path, 1, "empty metric name in column " + std::to_string(i + 1));
    frame.metric_names.emplace_back(name);
  }
  const std::size_t n = frame.metric_names.size();

  std::vector<Row> rows;
  rows.reserve(lines.size());
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::size_t line = i + 1;
    const auto fields = split_fields(lines[i]);
    if (fields.size() != n + 1) {
      fail(path, line, "ragged row: expected " + std::to_string(n + 1) + " fields, got " +
                           std::to_string(fields.size()));
    }
    Row row{parse_timestamp(fields[0], path, line), line, std::vector<double>(n)};
    for (std::size_t c = 0; c < n; ++c) row.cells[c] = parse_value(fields[c + 1], path, line);
    rows.push_back(std::move(row));
  }
  if (rows.empty()) fail(path, 2, "no data rows");

  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& a, const Row& b) { return a.timestamp < b.timestamp; });
  for (std::size_t r = 1; r < rows.size(); ++r) {
    if (rows[r].timestamp == rows[r - 1].timestamp) {
      fail(path, rows[r].line, "duplicate timestamp " + std::to_string(rows[r].timestamp) +
                                   " (first seen on line " + std::to_string(rows[r - 1].line) + ")");
    }
  }
  if (rows.size() >= 2) {
    const std::int64_t step = rows[1].timestamp - rows[0].timestamp;
    for (std::size_t r = 2; r < rows.size(); ++r) {
      if (rows[r].timestamp - rows[r - 1].timestamp != step) {
        fail(path, rows[r].line, "non-constant timestamp spacing (expected step " +
                                     std::to_string(step) + ")");
      }
    }
  }

  const std::size_t t_len = rows.size();
  frame.timestamps.resize(t_len);
  frame.values.assign(n * t_len, kMissing);
  for (std::size_t t = 0; t < t_len; ++t) {
    frame.timestamps[t] = rows[t].timestamp;
    for (std::size_t c = 0; c < n; ++c) frame.values[c * t_len + t] = rows[t].cells[c];
  }
  for (std::size_t c = 0; c < n; ++c) {
    auto m = frame.metric(c);
    auto first = std::find_if(m.begin(), m.end(), [](double v) { return !std::isnan(v); });
    if (first == m.end()) throw DataError(path.string() + ": metric '" + frame.metric_names[c] + "' is entirely missing");
    std::fill(m.begin(), first, *first);
    for (auto it = first + 1; it != m.end(); ++it) {
      if (std::isnan(*it)) *it = *(it - 1);
    }
  }

  if (label_path) frame.labels = load_labels(*label_path, frame.timestamps);
  frame.validate();
  return frame;
}

void save_csv(const SeriesFrame& frame, const std::filesystem::path& path) {
  frame.validate();
  std::string out = "timestamp";
  for (const auto& name : frame.metric_names) out += "," + name;
  out += "\n";
  for (std::size_t t = 0; t < frame.length(); ++t) {
    out += std::to_string(frame.timestamps[t]);
    for (std::size_t i = 0; i < frame.n_metrics(); ++i) {
      out += ',';
      out += io::format_double(frame.at(i, t));
    }
    out += '\n';
  }
  io::atomic_write(path, out);
  if (frame.labels) {
    std::string lab = "timestamp,label\n";
    for (std::size_t t = 0; t < frame.length(); ++t) {
      lab += std::to_string(frame.timestamps[t]);
      lab += (*frame.labels)[t] ? ",1\n" : ",0\n";
    }
    io::atomic_write(sibling_label_path(path), lab);
  }
}

}  // namespace genad::data
