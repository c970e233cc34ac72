#include "oscl/phasor_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <set>
#include <sstream>
#include <string_view>

#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "oscl/errors.hpp"

namespace oscl {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kDeg = std::numbers::pi / 180.0;

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

// Empty cells are missing values; anything unparsable is a data error.
double parse_cell(std::string_view cell, std::size_t row, std::string_view column) {
  cell = trim(cell);
  if (cell.empty()) return kNaN;
  double value = 0.0;
  const auto* first = cell.data();
  const auto* last = cell.data() + cell.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw DataError(fmt::format("row {}: cannot parse '{}' in column {}", row,
                                std::string(cell), std::string(column)));
  }
  return value;
}

struct ColumnGroup {
  int location_id = 0;
  std::size_t first_column = 0;  // index of _Vm
};

std::vector<ColumnGroup> parse_header(std::string_view header) {
  const auto fields = split_fields(header);
  if (fields.empty() || trim(fields[0]) != "time") {
    throw SchemaError(fmt::format("first column must be 'time', found '{}'",
                                  fields.empty() ? "" : std::string(trim(fields[0]))));
  }
  static constexpr std::string_view suffixes[] = {"_Vm", "_Va", "_Im", "_Ia"};
  std::vector<ColumnGroup> groups;
  std::set<int> seen;
  for (std::size_t c = 1; c < fields.size(); c += 4) {
    int group_id = -1;
    for (std::size_t s = 0; s < 4; ++s) {
      const std::size_t col = c + s;
      if (col >= fields.size()) {
        throw SchemaError(fmt::format("incomplete column group: expected '{}' at column {}",
                                      fmt::format("loc{}{}", group_id, suffixes[s]), col));
      }
      const auto name = trim(fields[col]);
      const bool ok_prefix = name.size() > 3 + suffixes[s].size() && name.substr(0, 3) == "loc" &&
                             name.substr(name.size() - suffixes[s].size()) == suffixes[s];
      int id = -1;
      if (ok_prefix) {
        const auto digits = name.substr(3, name.size() - 3 - suffixes[s].size());
        const auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), id);
        if (ec != std::errc{} || ptr != digits.data() + digits.size() || id < 0) id = -1;
      }
      if (id < 0 || (s > 0 && id != group_id)) {
        throw SchemaError(fmt::format("malformed column '{}' at position {}", std::string(name), col));
      }
      group_id = id;
    }
    if (!seen.insert(group_id).second) {
      throw SchemaError(fmt::format("duplicate location loc{}", group_id));
    }
    groups.push_back({group_id, c});
  }
  if (groups.empty()) throw SchemaError("header has no location column groups");
  return groups;
}

bool all_nan(const std::vector<double>& v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isnan(x); });
}

std::size_t count_nan(const std::vector<double>& v) {
  return static_cast<std::size_t>(
      std::count_if(v.begin(), v.end(), [](double x) { return std::isnan(x); }));
}

double wrap_to_pi(double a) {
  return a - 2.0 * std::numbers::pi * std::floor((a + std::numbers::pi) / (2.0 * std::numbers::pi));
}

void sort_channels(std::vector<PhasorChannel>& channels) {
  std::stable_sort(channels.begin(), channels.end(), [](const auto& a, const auto& b) {
    if (a.location_id != b.location_id) return a.location_id < b.location_id;
    return a.quantity == Quantity::Voltage && b.quantity == Quantity::Current;
  });
}

}  // namespace

const char* to_string(Quantity q) { return q == Quantity::Voltage ? "Voltage" : "Current"; }

void PhasorChannel::validate() const {
  const auto label = fmt::format("loc{} {}", location_id, to_string(quantity));
  if (magnitude.size() != angle.size())
    throw DataError(label + ": magnitude and angle lengths differ");
  if (magnitude.size() < 2) throw DataError(label + ": fewer than 2 samples");
  if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
    throw DataError(label + ": sample rate must be positive");
  for (std::size_t k = 0; k < magnitude.size(); ++k) {
    if (!std::isfinite(magnitude[k]) || magnitude[k] < 0.0)
      throw DataError(fmt::format("{}: invalid magnitude at sample {}", label, k));
    if (!std::isfinite(angle[k]))
      throw DataError(fmt::format("{}: invalid angle at sample {}", label, k));
  }
}

std::vector<int> EventDataset::locations() const {
  std::vector<int> ids;
  for (const auto& ch : channels) {
    if (ids.empty() || ids.back() != ch.location_id) ids.push_back(ch.location_id);
  }
  return ids;
}

namespace {
template <typename Channels>
auto& find_channel(Channels& channels, int location_id, Quantity q) {
  for (auto& ch : channels) {
    if (ch.location_id == location_id && ch.quantity == q) return ch;
  }
  throw DataError(fmt::format("missing {} channel for loc{}", to_string(q), location_id));
}
}  // namespace

const PhasorChannel& EventDataset::voltage(int id) const {
  return find_channel(channels, id, Quantity::Voltage);
}
const PhasorChannel& EventDataset::current(int id) const {
  return find_channel(channels, id, Quantity::Current);
}
PhasorChannel& EventDataset::voltage(int id) { return find_channel(channels, id, Quantity::Voltage); }
PhasorChannel& EventDataset::current(int id) { return find_channel(channels, id, Quantity::Current); }

void EventDataset::validate() const {
  if (channels.empty()) throw DataError("dataset has no channels");
  const auto n = samples();
  for (const auto& ch : channels) {
    ch.validate();
    if (ch.size() != n) throw DataError("channels have different lengths");
    if (ch.sample_rate != sample_rate) throw DataError("channels have different sample rates");
    if (ch.t0 != channels.front().t0) throw DataError("channels have different time bases");
  }
  for (int id : locations()) {
    int nv = 0, ni = 0;
    for (const auto& ch : channels) {
      if (ch.location_id != id) continue;
      (ch.quantity == Quantity::Voltage ? nv : ni) += 1;
    }
    if (nv != 1 || ni != 1)
      throw DataError(fmt::format("loc{} needs exactly one voltage and one current channel", id));
  }
}

std::string metadata_path_for(const std::string& csv_path) {
  constexpr std::string_view ext = ".csv";
  if (csv_path.size() > ext.size() &&
      std::string_view(csv_path).substr(csv_path.size() - ext.size()) == ext) {
    return csv_path.substr(0, csv_path.size() - ext.size()) + ".meta.json";
  }
  return csv_path + ".meta.json";
}

ChannelSchema load_schema(const std::string& csv_path) {
  ChannelSchema schema;
  std::ifstream in(metadata_path_for(csv_path));
  if (!in) return schema;
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(fmt::format("metadata sidecar is not valid JSON: {}", e.what()));
  }
  if (meta.contains("units")) schema.units = meta.at("units").get<std::string>();
  if (meta.contains("sample_rate_hz")) schema.sample_rate_hz = meta.at("sample_rate_hz").get<double>();
  if (meta.contains("angle_unit")) schema.angle_unit = meta.at("angle_unit").get<std::string>();
  return schema;
}

EventDataset load_event_csv(const std::string& path) { return load_event_csv(path, load_schema(path)); }

EventDataset load_event_csv(const std::string& path, const ChannelSchema& schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(fmt::format("cannot open '{}'", path));

  double angle_scale = 1.0;
  if (schema.angle_unit == "deg") {
    angle_scale = kDeg;
  } else if (schema.angle_unit != "rad") {
    throw SchemaError(fmt::format("unknown angle_unit '{}'", schema.angle_unit));
  }

  std::string line;
  if (!std::getline(in, line)) throw SchemaError("empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // BOM
  const auto groups = parse_header(line);
  const std::size_t n_columns = 1 + 4 * groups.size();

  std::vector<double> time;
  std::vector<std::vector<double>> columns(n_columns - 1);
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != n_columns) {
      throw DataError(fmt::format("row {}: expected {} fields, found {}", row, n_columns, fields.size()));
    }
    const double t = parse_cell(fields[0], row, "time");
    if (!std::isfinite(t)) throw DataError(fmt::format("row {}: missing timestamp", row));
    time.push_back(t);
    for (std::size_t c = 1; c < n_columns; ++c) {
      columns[c - 1].push_back(parse_cell(fields[c], row, fmt::format("#{}", c)));
    }
    ++row;
  }
  if (time.size() < 2) throw DataError("file has fewer than 2 data rows");

  for (std::size_t k = 1; k < time.size(); ++k) {
    if (!(time[k] > time[k - 1]))
      throw DataError(fmt::format("non-monotonic timestamp at row {}", k));
  }
  double dt = 0.0;
  if (schema.sample_rate_hz) {
    if (!(*schema.sample_rate_hz > 0.0)) throw SchemaError("sample_rate_hz must be positive");
    dt = 1.0 / *schema.sample_rate_hz;
  } else {
    std::vector<double> diffs(time.size() - 1);
    for (std::size_t k = 1; k < time.size(); ++k) diffs[k - 1] = time[k] - time[k - 1];
    std::nth_element(diffs.begin(), diffs.begin() + diffs.size() / 2, diffs.end());
    dt = diffs[diffs.size() / 2];
  }
  for (std::size_t k = 1; k < time.size(); ++k) {
    const double step = time[k] - time[k - 1];
    if (std::abs(step - dt) > schema.jitter_tolerance * dt) {
      throw DataError(fmt::format("sample interval {:.6f} s at row {} deviates from {:.6f} s by more than {}%",
                                  step, k, dt, schema.jitter_tolerance * 100.0));
    }
  }
  const double sample_rate = schema.sample_rate_hz
                                 ? *schema.sample_rate_hz
                                 : static_cast<double>(time.size() - 1) / (time.back() - time.front());

  EventDataset ds;
  ds.sample_rate = sample_rate;
  ds.units = schema.units;
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const auto base = groups[g].first_column - 1;
    auto make = [&](Quantity q, std::size_t mag_col) {
      PhasorChannel ch;
      ch.location_id = groups[g].location_id;
      ch.quantity = q;
      ch.magnitude = std::move(columns[mag_col]);
      ch.angle = std::move(columns[mag_col + 1]);
      for (auto& a : ch.angle) a *= angle_scale;
      ch.sample_rate = sample_rate;
      ch.t0 = time.front();
      ch.units = schema.units;
      ch.missing = std::max(count_nan(ch.magnitude), count_nan(ch.angle));
      return ch;
    };
    auto v = make(Quantity::Voltage, base);
    auto i = make(Quantity::Current, base + 2);
    if (all_nan(v.magnitude) || all_nan(v.angle) || all_nan(i.magnitude) || all_nan(i.angle)) {
      ds.excluded_locations.push_back({groups[g].location_id, "no valid samples"});
      continue;
    }
    ds.channels.push_back(std::move(v));
    ds.channels.push_back(std::move(i));
  }
  if (ds.channels.empty()) throw DataError("every location in the file is empty");
  sort_channels(ds.channels);
  ds.window = {time.front(), time.front() + static_cast<double>(time.size()) / sample_rate};
  return ds;
}

void write_event_csv(const EventDataset& ds, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write '{}'", path));
  const auto ids = ds.locations();
  std::string buf = "time";
  for (int id : ids) buf += fmt::format(",loc{0}_Vm,loc{0}_Va,loc{0}_Im,loc{0}_Ia", id);
  buf += '\n';
  auto put = [&buf](double x) {
    buf += ',';
    if (std::isfinite(x)) buf += fmt::format("{:.15g}", x);
  };
  std::vector<const PhasorChannel*> v, i;
  for (int id : ids) {
    v.push_back(&ds.voltage(id));
    i.push_back(&ds.current(id));
  }
  for (std::size_t k = 0; k < ds.samples(); ++k) {
    buf += fmt::format("{:.9f}", ds.channels.front().time_at(k));
    for (std::size_t g = 0; g < ids.size(); ++g) {
      put(v[g]->magnitude[k]);
      put(v[g]->angle[k] / kDeg);
      put(i[g]->magnitude[k]);
      put(i[g]->angle[k] / kDeg);
    }
    buf += '\n';
  }
  out << buf;

  nlohmann::ordered_json meta;
  meta["units"] = ds.units;
  meta["sample_rate_hz"] = ds.sample_rate;
  meta["angle_unit"] = "deg";
  std::ofstream mout(metadata_path_for(path), std::ios::binary);
  if (!mout) throw IoError(fmt::format("cannot write metadata for '{}'", path));
  mout << meta.dump(2) << '\n';
}

void unwrap_angles(std::vector<double>& angle) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double offset = 0.0;
  double prev_raw = kNaN;
  for (auto& a : angle) {
    if (std::isnan(a)) continue;
    if (!std::isnan(prev_raw)) {
      const double d = a - prev_raw;
      offset -= two_pi * std::round(d / two_pi);
    }
    prev_raw = a;
    a += offset;
  }
}

EventDataset align_and_window(const EventDataset& ds, double t_start, double t_end, double f_min_hz) {
  if (ds.channels.empty()) throw DataError("dataset has no channels");
  const double fs = ds.sample_rate;
  const double t0 = ds.t0();
  const auto n = ds.samples();
  const double span_end = t0 + static_cast<double>(n) / fs;
  constexpr double slack = 1e-6;
  if (!(t_end > t_start) || t_start < t0 - slack / fs || t_end > span_end + slack / fs) {
    throw RangeError(fmt::format("window [{}, {}] s is outside the recorded span [{}, {}] s", t_start,
                                 t_end, t0, span_end));
  }
  if (!(f_min_hz > 0.0)) throw ValidationError("f_min must be positive");
  const double min_length = kMinCyclesInWindow / f_min_hz;
  if (t_end - t_start < min_length * (1.0 - 1e-12)) {
    throw ValidationError(fmt::format(
        "window of {} s is shorter than {} cycles of the slowest analysable mode ({} Hz needs {} s)",
        t_end - t_start, kMinCyclesInWindow, f_min_hz, min_length));
  }
  const auto clamp_index = [n](double x) {
    return static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(n)));
  };
  const auto i0 = clamp_index(std::ceil((t_start - t0) * fs - slack));
  const auto i1 = clamp_index(std::ceil((t_end - t0) * fs - slack));
  if (i1 < i0 + 2) throw RangeError("window contains fewer than 2 samples");

  EventDataset out = ds;
  for (std::size_t c = 0; c < ds.channels.size(); ++c) {
    const auto& src = ds.channels[c];
    auto& dst = out.channels[c];
    dst.magnitude.assign(src.magnitude.begin() + static_cast<std::ptrdiff_t>(i0),
                         src.magnitude.begin() + static_cast<std::ptrdiff_t>(i1));
    dst.angle.assign(src.angle.begin() + static_cast<std::ptrdiff_t>(i0),
                     src.angle.begin() + static_cast<std::ptrdiff_t>(i1));
    dst.t0 = src.time_at(i0);
    dst.missing = std::max(count_nan(dst.magnitude), count_nan(dst.angle));
    unwrap_angles(dst.angle);
  }
  out.window = {t_start, t_end};
  return out;
}

EventDataset exclude_bad_channels(const EventDataset& ds, double max_gap_fraction,
                                  double flat_run_seconds) {
  if (!(max_gap_fraction >= 0.0 && max_gap_fraction <= 1.0))
    throw ValidationError("max_gap_fraction must lie in [0, 1]");
  const auto n = ds.samples();
  const auto flat_run =
      std::max<std::size_t>(2, static_cast<std::size_t>(std::lround(flat_run_seconds * ds.sample_rate)));

  EventDataset out;
  out.window = ds.window;
  out.sample_rate = ds.sample_rate;
  out.units = ds.units;
  out.excluded_locations = ds.excluded_locations;
  out.interpolated_samples = ds.interpolated_samples;

  for (int id : ds.locations()) {
    PhasorChannel v = ds.voltage(id);
    PhasorChannel i = ds.current(id);
    std::vector<const std::vector<double>*> series = {&v.magnitude, &v.angle, &i.magnitude, &i.angle};

    std::vector<char> bad(n, 0);
    for (const auto* s : series) {
      for (std::size_t k = 0; k < n; ++k) bad[k] |= std::isnan((*s)[k]) ? 1 : 0;
    }
    for (const auto* s : {&v.magnitude, &i.magnitude}) {
      std::size_t run_start = 0;
      for (std::size_t k = 1; k <= n; ++k) {
        const bool same = k < n && !std::isnan((*s)[k]) && (*s)[k] == (*s)[k - 1];
        if (same) continue;
        if (k - run_start >= flat_run) std::fill(bad.begin() + run_start, bad.begin() + k, 1);
        run_start = k;
      }
    }
    const double fraction =
        static_cast<double>(std::count(bad.begin(), bad.end(), 1)) / static_cast<double>(n);
    if (fraction > max_gap_fraction) {
      out.excluded_locations.push_back(
          {id, fmt::format("bad-sample fraction {:.4f} exceeds {:.4f}", fraction, max_gap_fraction)});
      continue;
    }

    // Repair short NaN gaps channel by channel; longer gaps exclude the location.
    std::vector<char> repaired(n, 0);
    std::size_t longest_gap = 0;
    auto repair = [&](std::vector<double>& s, bool is_angle) {
      std::size_t k = 0;
      while (k < n) {
        if (!std::isnan(s[k])) {
          ++k;
          continue;
        }
        std::size_t end = k;
        while (end < n && std::isnan(s[end])) ++end;
        longest_gap = std::max(longest_gap, end - k);
        if (end - k <= kMaxRepairableGap) {
          for (std::size_t m = k; m < end; ++m) {
            if (k == 0 && end == n) break;
            if (k == 0) {
              s[m] = s[end];
            } else if (end == n) {
              s[m] = s[k - 1];
            } else {
              const double left = s[k - 1];
              double span = s[end] - left;
              if (is_angle) span = wrap_to_pi(span);
              const double w = static_cast<double>(m - k + 1) / static_cast<double>(end - k + 1);
              s[m] = left + w * span;
            }
            repaired[m] = 1;
          }
        }
        k = end;
      }
    };
    repair(v.magnitude, false);
    repair(v.angle, true);
    repair(i.magnitude, false);
    repair(i.angle, true);
    if (longest_gap > kMaxRepairableGap) {
      out.excluded_locations.push_back(
          {id, fmt::format("gap of {} consecutive samples exceeds {}", longest_gap, kMaxRepairableGap)});
      continue;
    }
    const auto count = static_cast<std::size_t>(std::count(repaired.begin(), repaired.end(), 1));
    if (count > 0) out.interpolated_samples[id] += count;
    v.missing = i.missing = 0;
    out.channels.push_back(std::move(v));
    out.channels.push_back(std::move(i));
  }
  if (out.channels.empty()) throw DataError("all locations excluded as bad data");
  return out;
}

EventDataset time_reversed(const EventDataset& ds) {
  EventDataset out = ds;
  for (auto& ch : out.channels) {
    std::reverse(ch.magnitude.begin(), ch.magnitude.end());
    std::reverse(ch.angle.begin(), ch.angle.end());
  }
  return out;
}

}  // namespace oscl
