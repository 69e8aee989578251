#include "chaosnet/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "chaosnet/errors.hpp"
#include "chaosnet/rng.hpp"

namespace chaosnet {

namespace {

constexpr std::array<std::string_view, kNumColumns> kColumnNames{
    "time", "distance", "angle1", "pos1x", "pos1y", "angle2", "pos2x", "pos2y"};

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(trim(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return cells;
}

bool is_blank(std::string_view line) { return trim(line).empty(); }

}  // namespace

std::string_view to_string(Column c) { return kColumnNames[static_cast<std::size_t>(c)]; }

std::optional<Column> parse_column(std::string_view name) {
  for (std::size_t i = 0; i < kNumColumns; ++i) {
    if (kColumnNames[i] == name) return static_cast<Column>(i);
  }
  return std::nullopt;
}

std::vector<Record> parse_csv(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("\xEF\xBB\xBF")) line.erase(0, 3);
    if (!is_blank(line)) {
      have_header = true;
      break;
    }
  }
  if (!have_header) throw DataError("empty CSV: no header row");

  const auto header = split_commas(line);
  std::array<std::size_t, kNumColumns> position{};
  for (std::size_t c = 0; c < kNumColumns; ++c) {
    const auto it = std::find(header.begin(), header.end(), kColumnNames[c]);
    if (it == header.end()) {
      throw DataError("CSV header is missing column '" + std::string(kColumnNames[c]) + "'");
    }
    position[c] = static_cast<std::size_t>(it - header.begin());
  }

  std::vector<Record> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank(line)) continue;
    const auto cells = split_commas(line);
    if (cells.size() < header.size()) {
      throw DataError("CSV line " + std::to_string(line_no) + ": expected " +
                      std::to_string(header.size()) + " cells, got " + std::to_string(cells.size()));
    }
    Record rec;
    for (std::size_t c = 0; c < kNumColumns; ++c) {
      const std::string_view cell = cells[position[c]];
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc() || ptr != cell.data() + cell.size() || !std::isfinite(v)) {
        throw DataError("CSV line " + std::to_string(line_no) + ", column '" +
                        std::string(kColumnNames[c]) + "': not a finite number: '" + std::string(cell) + "'");
      }
      rec.values[c] = v;
    }
    records.push_back(rec);
  }
  if (records.empty()) throw DataError("CSV has a header but no data rows");
  return records;
}

std::vector<Record> parse_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset '" + path.string() + "'");
  try {
    return parse_csv(in);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

void write_csv(std::ostream& out, std::span<const Record> records) {
  for (std::size_t c = 0; c < kNumColumns; ++c) out << (c ? "," : "") << kColumnNames[c];
  out << '\n';
  char buf[32];
  for (const Record& r : records) {
    for (std::size_t c = 0; c < kNumColumns; ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, r.values[c]);
      if (c) out << ',';
      out.write(buf, res.ptr - buf);
    }
    out << '\n';
  }
}

std::vector<SeriesSegment> segment_on_resets(std::span<const Record> records, double gap_factor) {
  std::vector<SeriesSegment> segments;
  if (records.empty()) return segments;

  std::vector<double> steps;
  for (std::size_t i = 1; i < records.size(); ++i) {
    const double dt = records[i].time() - records[i - 1].time();
    if (dt > 0.0) steps.push_back(dt);
  }
  double max_step = std::numeric_limits<double>::infinity();
  if (!steps.empty()) {
    const std::size_t mid = steps.size() / 2;
    std::nth_element(steps.begin(), steps.begin() + mid, steps.end());
    double median = steps[mid];
    if (steps.size() % 2 == 0) {
      median = 0.5 * (median + *std::max_element(steps.begin(), steps.begin() + mid));
    }
    max_step = gap_factor * median;
  }

  segments.push_back({0, 0, {records[0]}});
  for (std::size_t i = 1; i < records.size(); ++i) {
    const double dt = records[i].time() - records[i - 1].time();
    if (!(dt > 0.0) || dt > max_step) segments.push_back({segments.size(), i, {}});
    segments.back().records.push_back(records[i]);
  }
  return segments;
}

ColumnMapping object_mapping(int object, std::size_t lag) {
  ColumnMapping m;
  if (object == 1) {
    m.input = {Column::angle1, Column::pos1x, Column::pos1y};
  } else if (object == 2) {
    m.input = {Column::angle2, Column::pos2x, Column::pos2y};
  } else {
    throw ConfigError("object_mapping: object must be 1 or 2, got " + std::to_string(object));
  }
  m.target = m.input;
  m.lag = lag;
  return m;
}

void validate(const ColumnMapping& mapping) {
  if (mapping.lag < 1) throw ConfigError("column mapping: lag must be >= 1");
}

// ---------------------------------------------------------------------------
// Scaler

Scaler::Scaler(std::vector<Range> ranges) : ranges_(std::move(ranges)) {
  for (const Range& r : ranges_) {
    if (!(r.max > r.min)) {
      throw DataError("cannot scale constant column '" + std::string(to_string(r.column)) +
                      "' (min = max = " + std::to_string(r.min) + ")");
    }
  }
}

bool Scaler::has(Column c) const noexcept {
  return std::any_of(ranges_.begin(), ranges_.end(), [c](const Range& r) { return r.column == c; });
}

const Scaler::Range& Scaler::range(Column c) const {
  for (const Range& r : ranges_) {
    if (r.column == c) return r;
  }
  throw DataError("scaler has no range for column '" + std::string(to_string(c)) + "'");
}

double Scaler::apply(Column c, double v) const {
  const Range& r = range(c);
  return 2.0 * (v - r.min) / (r.max - r.min) - 1.0;
}

double Scaler::invert(Column c, double v) const {
  const Range& r = range(c);
  return (v + 1.0) * 0.5 * (r.max - r.min) + r.min;
}

std::array<double, 3> Scaler::apply(const std::array<Column, 3>& cols, const std::array<double, 3>& v) const {
  return {apply(cols[0], v[0]), apply(cols[1], v[1]), apply(cols[2], v[2])};
}

std::array<double, 3> Scaler::invert(const std::array<Column, 3>& cols, const std::array<double, 3>& v) const {
  return {invert(cols[0], v[0]), invert(cols[1], v[1]), invert(cols[2], v[2])};
}

Scaler fit_scaler(std::span<const SeriesSegment> segments, const ColumnMapping& mapping) {
  std::vector<Column> cols;
  for (const auto& group : {mapping.input, mapping.target}) {
    for (Column c : group) {
      if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    }
  }
  std::vector<Scaler::Range> ranges;
  for (Column c : cols) {
    Scaler::Range r{c, std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
    for (const SeriesSegment& seg : segments) {
      for (const Record& rec : seg.records) {
        r.min = std::min(r.min, rec[c]);
        r.max = std::max(r.max, rec[c]);
      }
    }
    if (!std::isfinite(r.min)) throw DataError("fit_scaler: no records to fit");
    ranges.push_back(r);
  }
  return Scaler(std::move(ranges));
}

// ---------------------------------------------------------------------------
// Windows

WindowSet make_windows(std::span<const SeriesSegment> segments, const ColumnMapping& mapping,
                       const Scaler& scaler) {
  validate(mapping);
  WindowSet set;
  for (const SeriesSegment& seg : segments) {
    const std::size_t len = seg.records.size();
    if (len < mapping.lag + 1) {
      ++set.skipped_segments;
      continue;
    }
    for (std::size_t t = 0; t + mapping.lag < len; ++t) {
      const Record& now = seg.records[t];
      const Record& later = seg.records[t + mapping.lag];
      Window w;
      for (std::size_t j = 0; j < 3; ++j) {
        w.input[j] = scaler.apply(mapping.input[j], now[mapping.input[j]]);
        w.target[j] = scaler.apply(mapping.target[j], later[mapping.target[j]]);
      }
      w.segment = seg.id;
      w.index = t;
      set.windows.push_back(w);
    }
  }
  return set;
}

std::size_t train_count(std::size_t n, double fraction) {
  const double v = fraction * static_cast<double>(n);
  const double nearest = std::round(v);
  // Snap products like 0.7 * 10 = 7.000000000000001 back to the integer.
  if (std::abs(v - nearest) <= 1e-9 * std::max(1.0, v)) return static_cast<std::size_t>(nearest);
  return static_cast<std::size_t>(std::ceil(v));
}

std::pair<std::vector<Window>, std::vector<Window>> split_train_test(std::span<const Window> windows,
                                                                     double fraction) {
  if (!(fraction > 0.0 && fraction < 1.0)) {
    throw DataError("train fraction must lie in (0, 1), got " + std::to_string(fraction));
  }
  const std::size_t n_train = train_count(windows.size(), fraction);
  if (n_train == 0 || n_train >= windows.size()) {
    throw DataError("too few windows (" + std::to_string(windows.size()) +
                    ") for a non-empty train/test split at fraction " + std::to_string(fraction));
  }
  return {std::vector<Window>(windows.begin(), windows.begin() + n_train),
          std::vector<Window>(windows.begin() + n_train, windows.end())};
}

Dataset prepare_dataset(std::span<const Record> records, const ColumnMapping& mapping,
                        const DataOptions& options, const std::optional<Scaler>& fixed_scaler) {
  validate(mapping);
  Dataset ds;
  ds.segments = segment_on_resets(records, options.gap_factor);

  std::size_t total = 0;
  for (const SeriesSegment& seg : ds.segments) {
    if (seg.records.size() > mapping.lag) total += seg.records.size() - mapping.lag;
  }

  if (fixed_scaler) {
    ds.scaler = *fixed_scaler;
  } else {
    // Records touched by the leading n_train windows: a prefix of each segment.
    std::size_t remaining = train_count(total, options.train_fraction);
    std::vector<SeriesSegment> train_part;
    for (const SeriesSegment& seg : ds.segments) {
      if (remaining == 0) break;
      if (seg.records.size() <= mapping.lag) continue;
      const std::size_t n = std::min(remaining, seg.records.size() - mapping.lag);
      remaining -= n;
      train_part.push_back({seg.id, seg.first_row,
                            {seg.records.begin(), seg.records.begin() + static_cast<std::ptrdiff_t>(n + mapping.lag)}});
    }
    if (train_part.empty()) throw DataError("no segment is long enough to form a training window");
    ds.scaler = fit_scaler(train_part, mapping);
  }

  WindowSet set = make_windows(ds.segments, mapping, ds.scaler);
  ds.skipped_segments = set.skipped_segments;
  auto [train, test] = split_train_test(set.windows, options.train_fraction);
  ds.train = std::move(train);
  ds.test = std::move(test);
  return ds;
}

std::vector<double> stack_inputs(std::span<const Window> windows) {
  std::vector<double> out;
  out.reserve(windows.size() * 3);
  for (const Window& w : windows) out.insert(out.end(), w.input.begin(), w.input.end());
  return out;
}

std::vector<double> stack_targets(std::span<const Window> windows) {
  std::vector<double> out;
  out.reserve(windows.size() * 3);
  for (const Window& w : windows) out.insert(out.end(), w.target.begin(), w.target.end());
  return out;
}

std::vector<Record> synthetic_limit_cycle(std::size_t rows, double noise, std::uint64_t seed) {
  constexpr double kStep = 2.0 * std::numbers::pi / 80.0;
  constexpr double kDt = 0.05;
  Rng rng(seed);
  std::vector<Record> out(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const double t = static_cast<double>(i);
    const double a1 = kStep * t;
    const double a2 = -1.3 * kStep * t + 0.7;
    const double r1 = 1.0 + 0.25 * std::cos(3.0 * a1);
    const double r2 = 0.6 * (1.0 + 0.2 * std::sin(2.0 * a2));
    Record& rec = out[i];
    rec[Column::time] = kDt * t;
    rec[Column::angle1] = 0.5 * std::sin(2.0 * a1) + noise * rng.normal();
    rec[Column::pos1x] = r1 * std::cos(a1) + noise * rng.normal();
    rec[Column::pos1y] = r1 * std::sin(a1) + noise * rng.normal();
    rec[Column::angle2] = std::cos(a2) + noise * rng.normal();
    rec[Column::pos2x] = 0.5 + r2 * std::cos(a2) + noise * rng.normal();
    rec[Column::pos2y] = -0.2 + r2 * std::sin(a2) + noise * rng.normal();
    rec[Column::distance] = std::hypot(rec[Column::pos1x] - rec[Column::pos2x],
                                       rec[Column::pos1y] - rec[Column::pos2y]);
  }
  return out;
}

}  // namespace chaosnet
