#ifndef EMX_IO_HPP
#define EMX_IO_HPP

#include "emx/dynamics.hpp"
#include "emx/estimation.hpp"
#include "emx/spectra.hpp"

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace emx
{

// Malformed file contents; the message carries the offending line number.
class FormatError : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Shortest decimal form that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

// Text file with `# key=value` header lines and a tab-separated two-column
// body. Header order is preserved, unknown keys included.
struct TraceFile
{
    std::vector<std::pair<std::string, std::string>> header;
    std::vector<double> x;
    std::vector<double> y;

    std::optional<std::string> get(const std::string &key) const;
    void set(const std::string &key, const std::string &value);
    bool operator==(const TraceFile &) const = default;
};

std::string serialize(const TraceFile &file);
TraceFile parse_trace_file(std::string_view text);

TraceFile read_trace_file(const std::filesystem::path &path);
void write_trace_file(const std::filesystem::path &path, const TraceFile &file);

// Writes to a sibling temporary file and renames it into place.
void write_text_atomic(const std::filesystem::path &path, const std::string &text);
std::string read_text(const std::filesystem::path &path);

// Header keys written by the conversions below.
inline constexpr const char *kKindKey = "kind";
inline constexpr const char *kRingdownKind = "Ringdown";
inline constexpr const char *kOccupancyKind = "Occupancy";

TraceFile to_trace_file(const SpectrumTrace &trace);
SpectrumTrace spectrum_from_file(const TraceFile &file);

TraceFile to_trace_file(const RingdownTrace &trace);
RingdownTrace ringdown_from_file(const TraceFile &file);

// `key: value` blocks, one per report.
std::string serialize_report(const std::string &title, const FitReport &report);
std::vector<std::pair<std::string, FitReport>> parse_reports(std::string_view text);

} // namespace emx

#endif // EMX_IO_HPP
