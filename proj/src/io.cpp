#include "emx/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace emx
{
namespace
{
namespace fs = std::filesystem;

std::string_view trim(std::string_view s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string_view> split_lines(std::string_view text)
{
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos < text.size())
    {
        const auto nl = text.find('\n', pos);
        const auto end = nl == std::string_view::npos ? text.size() : nl;
        lines.push_back(text.substr(pos, end - pos));
        pos = end + 1;
    }
    return lines;
}

FormatError at_line(std::size_t line, const std::string &what)
{
    return FormatError("line " + std::to_string(line) + ": " + what);
}

const char *default_units(TraceKind kind)
{
    return kind == TraceKind::NPSD ? "quanta" : "dimensionless";
}
} // namespace

std::string format_double(double v)
{
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s)
{
    s = trim(s);
    double v = 0.0;
    const char *first = s.data();
    if (!s.empty() && s.front() == '+')
        ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size() || s.empty())
        throw FormatError("not a number: '" + std::string(s) + "'");
    return v;
}

std::optional<std::string> TraceFile::get(const std::string &key) const
{
    for (const auto &[k, v] : header)
        if (k == key)
            return v;
    return std::nullopt;
}

void TraceFile::set(const std::string &key, const std::string &value)
{
    for (auto &[k, v] : header)
        if (k == key)
        {
            v = value;
            return;
        }
    header.emplace_back(key, value);
}

std::string serialize(const TraceFile &file)
{
    if (file.x.size() != file.y.size())
        throw DomainError("TraceFile: column lengths differ");
    std::string out;
    for (const auto &[k, v] : file.header)
    {
        if (k.empty() || k.find_first_of("=\n") != std::string::npos || v.find('\n') != std::string::npos)
            throw DomainError("TraceFile: header entries must be single-line and keys must not contain '='");
        out += "# " + k + "=" + v + "\n";
    }
    for (std::size_t i = 0; i < file.x.size(); ++i)
        out += format_double(file.x[i]) + "\t" + format_double(file.y[i]) + "\n";
    return out;
}

TraceFile parse_trace_file(std::string_view text)
{
    TraceFile f;
    const auto lines = split_lines(text);
    bool in_body = false;
    for (std::size_t n = 0; n < lines.size(); ++n)
    {
        const auto line = lines[n];
        if (line.empty())
            continue;
        if (line.front() == '#')
        {
            if (in_body)
                throw at_line(n + 1, "header line after data");
            auto body = line.substr(1);
            if (!body.empty() && body.front() == ' ')
                body.remove_prefix(1);
            const auto eq = body.find('=');
            if (eq == std::string_view::npos || eq == 0)
                throw at_line(n + 1, "header line is not key=value");
            f.header.emplace_back(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
            continue;
        }
        in_body = true;
        const auto tab = line.find('\t');
        if (tab == std::string_view::npos)
            throw at_line(n + 1, "expected two tab-separated columns");
        try
        {
            f.x.push_back(parse_double(line.substr(0, tab)));
            f.y.push_back(parse_double(line.substr(tab + 1)));
        }
        catch (const FormatError &e)
        {
            throw at_line(n + 1, e.what());
        }
    }
    return f;
}

std::string read_text(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_atomic(const fs::path &path, const std::string &text)
{
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw std::runtime_error("cannot write " + tmp.string());
        out << text;
        out.flush();
        if (!out)
            throw std::runtime_error("write failed for " + tmp.string());
    }
    fs::rename(tmp, path);
}

TraceFile read_trace_file(const fs::path &path)
{
    try
    {
        return parse_trace_file(read_text(path));
    }
    catch (const FormatError &e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_trace_file(const fs::path &path, const TraceFile &file)
{
    write_text_atomic(path, serialize(file));
}

TraceFile to_trace_file(const SpectrumTrace &trace)
{
    trace.validate();
    TraceFile f;
    f.set(kKindKey, to_string(trace.kind));
    const auto units = trace.meta.extra.find("units");
    f.set("units", units != trace.meta.extra.end() ? units->second : default_units(trace.kind));
    f.set("x", "frequency_hz");
    if (trace.meta.drive_detuning_hz)
        f.set("drive_detuning_hz", format_double(*trace.meta.drive_detuning_hz));
    if (trace.meta.n_d)
        f.set("n_d", format_double(*trace.meta.n_d));
    if (trace.meta.gain_db)
        f.set("gain_db", format_double(*trace.meta.gain_db));
    for (const auto &[k, v] : trace.meta.extra)
        if (k != "units" && k != "x")
            f.set(k, v);
    f.x = trace.freqs_hz;
    f.y = trace.values;
    return f;
}

SpectrumTrace spectrum_from_file(const TraceFile &file)
{
    const auto kind = file.get(kKindKey);
    if (!kind)
        throw FormatError("trace file has no kind");
    SpectrumTrace t;
    t.kind = trace_kind_from_string(*kind);
    for (const auto &[k, v] : file.header)
    {
        if (k == kKindKey || k == "x")
            continue;
        if (k == "drive_detuning_hz")
            t.meta.drive_detuning_hz = parse_double(v);
        else if (k == "n_d")
            t.meta.n_d = parse_double(v);
        else if (k == "gain_db")
            t.meta.gain_db = parse_double(v);
        else
            t.meta.extra[k] = v;
    }
    t.freqs_hz = file.x;
    t.values = file.y;
    t.validate();
    return t;
}

TraceFile to_trace_file(const RingdownTrace &trace)
{
    trace.validate();
    TraceFile f;
    f.set(kKindKey, kRingdownKind);
    f.set("units", "quanta");
    f.set("x", "time_s");
    f.x = trace.times;
    f.y = trace.power;
    return f;
}

RingdownTrace ringdown_from_file(const TraceFile &file)
{
    if (file.get(kKindKey) != kRingdownKind)
        throw FormatError("trace file is not a ringdown");
    RingdownTrace t;
    t.times = file.x;
    t.power = file.y;
    t.validate();
    return t;
}

// --- reports -----------------------------------------------------------------

std::string serialize_report(const std::string &title, const FitReport &report)
{
    std::string out = "[report " + title + "]\n";
    out += "convergence: " + to_string(report.convergence) + "\n";
    out += "residual_norm: " + format_double(report.residual_norm) + "\n";
    for (const auto &[name, est] : report.params)
    {
        out += "param " + name + ": " + format_double(est.value) + " +- " + format_double(est.sigma);
        if (!est.unit.empty())
            out += " " + est.unit;
        out += "\n";
    }
    for (const auto &stage : report.stage_log)
    {
        out += "stage: " + stage.name + "\n";
        for (const auto &[k, v] : stage.inputs)
            out += "  input " + k + ": " + format_double(v) + "\n";
        for (const auto &[k, v] : stage.outputs)
            out += "  output " + k + ": " + format_double(v) + "\n";
        if (!stage.note.empty())
            out += "  note: " + stage.note + "\n";
    }
    for (const auto &w : report.warnings)
        out += "warning: " + w + "\n";
    return out;
}

std::vector<std::pair<std::string, FitReport>> parse_reports(std::string_view text)
{
    std::vector<std::pair<std::string, FitReport>> out;
    const auto lines = split_lines(text);
    for (std::size_t n = 0; n < lines.size(); ++n)
    {
        const auto raw = lines[n];
        const auto line = trim(raw);
        if (line.empty())
            continue;
        if (line.starts_with("[report ") && line.ends_with("]"))
        {
            out.emplace_back(std::string(line.substr(8, line.size() - 9)), FitReport{});
            continue;
        }
        if (out.empty())
            throw at_line(n + 1, "content before the first report header");
        FitReport &rep = out.back().second;
        const auto colon = line.find(": ");
        const auto key = line.substr(0, colon == std::string_view::npos ? line.size() : colon);
        const auto value = colon == std::string_view::npos ? std::string_view{} : line.substr(colon + 2);
        try
        {
            if (raw.starts_with("  "))
            {
                if (rep.stage_log.empty())
                    throw at_line(n + 1, "stage detail without a stage");
                auto &stage = rep.stage_log.back();
                if (key.starts_with("input "))
                    stage.inputs.emplace_back(std::string(key.substr(6)), parse_double(value));
                else if (key.starts_with("output "))
                    stage.outputs.emplace_back(std::string(key.substr(7)), parse_double(value));
                else if (key == "note")
                    stage.note = std::string(value);
                else
                    throw at_line(n + 1, "unknown stage entry");
            }
            else if (key == "convergence")
                rep.convergence = convergence_from_string(std::string(value));
            else if (key == "residual_norm")
                rep.residual_norm = parse_double(value);
            else if (key.starts_with("param "))
            {
                const auto pm = value.find(" +- ");
                if (pm == std::string_view::npos)
                    throw at_line(n + 1, "parameter without standard error");
                const auto rest = value.substr(pm + 4);
                const auto sp = rest.find(' ');
                ParamEstimate est;
                est.value = parse_double(value.substr(0, pm));
                est.sigma = parse_double(rest.substr(0, sp));
                if (sp != std::string_view::npos)
                    est.unit = std::string(rest.substr(sp + 1));
                rep.params.emplace_back(std::string(key.substr(6)), est);
            }
            else if (key == "stage")
                rep.stage_log.push_back({std::string(value), {}, {}, ""});
            else if (key == "warning")
                rep.warnings.emplace_back(value);
            else
                throw at_line(n + 1, "unknown report entry '" + std::string(key) + "'");
        }
        catch (const FormatError &)
        {
            throw;
        }
        catch (const std::exception &e)
        {
            throw at_line(n + 1, e.what());
        }
    }
    return out;
}

} // namespace emx
