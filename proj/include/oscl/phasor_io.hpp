#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace oscl {

enum class Quantity { Voltage, Current };

const char* to_string(Quantity q);

/// One location's voltage or current phasor series on a uniform time grid.
/// Angles are held in radians; missing samples are NaN until repaired.
struct PhasorChannel {
  int location_id = 0;
  Quantity quantity = Quantity::Voltage;
  std::vector<double> magnitude;
  std::vector<double> angle;
  double sample_rate = 0.0;
  double t0 = 0.0;
  std::string units;
  std::size_t missing = 0;  // NaN/blank cells seen on load

  std::size_t size() const { return magnitude.size(); }
  double time_at(std::size_t k) const {
    return t0 + static_cast<double>(k) / sample_rate;
  }

  /// Throws DataError when the channel breaks its invariants (length >= 2,
  /// equal lengths, finite non-negative magnitudes, finite angles).
  void validate() const;
};

struct ExcludedLocation {
  int location_id = 0;
  std::string reason;
};

struct TimeWindow {
  double t_start = 0.0;
  double t_end = 0.0;
  double duration() const { return t_end - t_start; }
};

/// Time-aligned channels for a set of locations. Channels are kept sorted by
/// (location, quantity) so that voltage precedes current for every location.
struct EventDataset {
  std::vector<PhasorChannel> channels;
  TimeWindow window;
  double sample_rate = 0.0;
  std::vector<ExcludedLocation> excluded_locations;
  /// Per location: number of timestamps repaired by gap interpolation.
  std::map<int, std::size_t> interpolated_samples;
  std::string units = "pu";

  std::size_t samples() const {
    return channels.empty() ? 0 : channels.front().size();
  }
  double t0() const { return channels.empty() ? 0.0 : channels.front().t0; }

  std::vector<int> locations() const;
  const PhasorChannel& voltage(int location_id) const;
  const PhasorChannel& current(int location_id) const;
  PhasorChannel& voltage(int location_id);
  PhasorChannel& current(int location_id);

  /// Full structural check: one V and one I per location, shared sample rate
  /// and time base, every channel valid.
  void validate() const;
};

/// Sidecar metadata and parse options for the wide CSV format.
struct ChannelSchema {
  std::string units = "pu";
  std::optional<double> sample_rate_hz;
  std::string angle_unit = "deg";
  double jitter_tolerance = 0.01;
};

/// Path of the `<name>.meta.json` sidecar that belongs to a CSV file.
std::string metadata_path_for(const std::string& csv_path);

/// Reads the sidecar next to `csv_path`, or returns defaults when absent.
ChannelSchema load_schema(const std::string& csv_path);

EventDataset load_event_csv(const std::string& path, const ChannelSchema& schema);
EventDataset load_event_csv(const std::string& path);

/// Writes the CSV and its metadata sidecar. Angles go out in degrees.
void write_event_csv(const EventDataset& ds, const std::string& path);

/// Lowest analysable frequency used by the window-length rule.
inline constexpr double kDefaultMinFrequencyHz = 0.2;
inline constexpr double kMinCyclesInWindow = 10.0;

EventDataset align_and_window(const EventDataset& ds, double t_start, double t_end,
                              double f_min_hz = kDefaultMinFrequencyHz);

inline constexpr std::size_t kMaxRepairableGap = 5;

EventDataset exclude_bad_channels(const EventDataset& ds, double max_gap_fraction,
                                  double flat_run_seconds = 1.0);

/// In-place phase unwrapping; NaN samples are skipped.
void unwrap_angles(std::vector<double>& angle);

/// Reverses every channel in time; used by reversal-symmetry checks.
EventDataset time_reversed(const EventDataset& ds);

}  // namespace oscl
