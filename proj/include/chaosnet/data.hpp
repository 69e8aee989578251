#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace chaosnet {

// Columns of the attractor dataset, in canonical order.
enum class Column : std::size_t { time, distance, angle1, pos1x, pos1y, angle2, pos2x, pos2y };
inline constexpr std::size_t kNumColumns = 8;

std::string_view to_string(Column c);
std::optional<Column> parse_column(std::string_view name);

struct Record {
  std::array<double, kNumColumns> values{};

  double time() const noexcept { return values[0]; }
  double operator[](Column c) const noexcept { return values[static_cast<std::size_t>(c)]; }
  double& operator[](Column c) noexcept { return values[static_cast<std::size_t>(c)]; }

  friend bool operator==(const Record&, const Record&) = default;
};

// Reads a UTF-8, comma-separated file whose header names all eight columns in any
// order (extra columns are ignored). Throws DataError on an empty file, a missing
// column, a short row, or a cell that is not a finite number; messages carry the
// 1-based line number and column name.
std::vector<Record> parse_csv(std::istream& in);
std::vector<Record> parse_csv_file(const std::filesystem::path& path);

// Writes the header and rows with round-trip precision.
void write_csv(std::ostream& out, std::span<const Record> records);

struct SeriesSegment {
  std::size_t id = 0;
  std::size_t first_row = 0;  // index of records.front() in the parsed file
  std::vector<Record> records;
};

inline constexpr double kDefaultGapFactor = 10.0;

// Splits wherever time fails to increase or jumps by more than
// gap_factor * (median positive step). Every segment has strictly increasing time.
std::vector<SeriesSegment> segment_on_resets(std::span<const Record> records,
                                             double gap_factor = kDefaultGapFactor);

struct ColumnMapping {
  std::array<Column, 3> input{Column::angle1, Column::pos1x, Column::pos1y};
  std::array<Column, 3> target{Column::angle1, Column::pos1x, Column::pos1y};
  std::size_t lag = 1;

  bool autoregressive() const noexcept { return input == target; }
  friend bool operator==(const ColumnMapping&, const ColumnMapping&) = default;
};

// Built-in per-object mappings: (angleN, posNx, posNy) -> same triple at t + lag.
ColumnMapping object_mapping(int object, std::size_t lag = 1);
void validate(const ColumnMapping& mapping);

// Per-column min-max scaling onto [-1, 1]. No clamping outside the fitted range.
class Scaler {
 public:
  struct Range {
    Column column;
    double min;
    double max;
    friend bool operator==(const Range&, const Range&) = default;
  };

  Scaler() = default;
  // Throws DataError naming the column when max <= min.
  explicit Scaler(std::vector<Range> ranges);

  double apply(Column c, double v) const;
  double invert(Column c, double v) const;
  std::array<double, 3> apply(const std::array<Column, 3>& cols, const std::array<double, 3>& v) const;
  std::array<double, 3> invert(const std::array<Column, 3>& cols, const std::array<double, 3>& v) const;

  const std::vector<Range>& ranges() const noexcept { return ranges_; }
  bool has(Column c) const noexcept;

  friend bool operator==(const Scaler&, const Scaler&) = default;

 private:
  const Range& range(Column c) const;
  std::vector<Range> ranges_;
};

// Fits over every record of `segments` for the union of input and target columns.
Scaler fit_scaler(std::span<const SeriesSegment> segments, const ColumnMapping& mapping);

struct Window {
  std::array<double, 3> input{};   // scaled input columns at t
  std::array<double, 3> target{};  // scaled target columns at t + lag
  std::size_t segment = 0;
  std::size_t index = 0;  // t, relative to the segment start
};

struct WindowSet {
  std::vector<Window> windows;
  std::size_t skipped_segments = 0;  // segments shorter than lag + 1
};

WindowSet make_windows(std::span<const SeriesSegment> segments, const ColumnMapping& mapping,
                       const Scaler& scaler);

// Number of leading windows that go to training: ceil(fraction * n).
std::size_t train_count(std::size_t n, double fraction);

// Chronological split: the first ceil(fraction * N) windows train, the rest test.
// Throws DataError when either side would be empty or fraction is outside (0, 1).
std::pair<std::vector<Window>, std::vector<Window>> split_train_test(std::span<const Window> windows,
                                                                     double fraction);

struct DataOptions {
  double gap_factor = kDefaultGapFactor;
  double train_fraction = 0.8;
};

struct Dataset {
  std::vector<SeriesSegment> segments;
  Scaler scaler;
  std::vector<Window> train;
  std::vector<Window> test;
  std::size_t skipped_segments = 0;
};

// segment -> split -> scale pipeline. The scaler is fitted on the records that
// feed training windows only, unless `fixed_scaler` is supplied (e.g. from a checkpoint).
Dataset prepare_dataset(std::span<const Record> records, const ColumnMapping& mapping,
                        const DataOptions& options, const std::optional<Scaler>& fixed_scaler = {});

// Stacks window inputs / targets into [n, 3] row-major buffers.
std::vector<double> stack_inputs(std::span<const Window> windows);
std::vector<double> stack_targets(std::span<const Window> windows);

// Noisy two-object limit cycle in the dataset schema: both objects circle a
// closed orbit with period ~80 steps; Gaussian noise of stddev `noise` is added
// to every column except time.
std::vector<Record> synthetic_limit_cycle(std::size_t rows, double noise, std::uint64_t seed);

}  // namespace chaosnet
