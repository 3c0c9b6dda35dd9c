#include "emx/config.hpp"

#include "emx/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace emx
{
namespace
{
using json = nlohmann::ordered_json;

class Reader
{
public:
    Reader(const json &obj, std::string path, std::set<std::string> known)
        : obj_(obj), path_(std::move(path)), known_(std::move(known))
    {
        if (!obj_.is_object())
            throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
        for (const auto &item : obj_.items())
            if (!known_.count(item.key()))
                throw ConfigError(field(item.key()), "unknown key");
    }

    std::string field(const std::string &key) const { return path_.empty() ? key : path_ + "." + key; }

    bool has(const std::string &key) const { return obj_.contains(key); }

    void num(const std::string &key, double &out) const
    {
        if (!has(key))
            return;
        const auto &v = obj_.at(key);
        if (!v.is_number())
            throw ConfigError(field(key), "expected a number");
        out = v.get<double>();
        if (!std::isfinite(out))
            throw ConfigError(field(key), "must be finite");
    }

    void opt_num(const std::string &key, std::optional<double> &out) const
    {
        if (!has(key))
            return;
        double v = 0.0;
        num(key, v);
        out = v;
    }

    void count(const std::string &key, std::size_t &out) const
    {
        if (!has(key))
            return;
        const auto &v = obj_.at(key);
        if (!v.is_number_unsigned())
            throw ConfigError(field(key), "expected a non-negative integer");
        out = v.get<std::size_t>();
    }

    void nums(const std::string &key, std::vector<double> &out) const
    {
        if (!has(key))
            return;
        const auto &v = obj_.at(key);
        if (!v.is_array())
            throw ConfigError(field(key), "expected an array of numbers");
        out.clear();
        for (std::size_t i = 0; i < v.size(); ++i)
        {
            if (!v[i].is_number())
                throw ConfigError(field(key) + "[" + std::to_string(i) + "]", "expected a number");
            out.push_back(v[i].get<double>());
        }
    }

    Reader child(const std::string &key, std::set<std::string> known) const
    {
        return Reader(obj_.at(key), field(key), std::move(known));
    }

    const json &raw(const std::string &key) const { return obj_.at(key); }

private:
    const json &obj_;
    std::string path_;
    std::set<std::string> known_;
};

void check(bool cond, const std::string &where, const std::string &what)
{
    if (!cond)
        throw ConfigError(where, what);
}

std::size_t line_of_offset(const std::string &text, std::size_t offset)
{
    offset = std::min(offset, text.size());
    return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

double hz(double rad) { return rad_to_hz(rad); }
} // namespace

ConfigError::ConfigError(std::string where, const std::string &what)
    : std::runtime_error(where + ": " + what), where_(std::move(where))
{
}

double ExperimentConfig::drive_frequency(double detuning_hz) const
{
    return cavity.omega_plus() - hz_to_rad(detuning_hz);
}

double ExperimentConfig::photons(const DriveSpec &drive) const
{
    if (drive.n_d)
        return *drive.n_d;
    DriveConfig d;
    d.power_in_dbm = drive.power_in_dbm.value_or(-200.0);
    d.attenuation_db = attenuation_db;
    d.omega_d = drive_frequency(drive.detuning_hz);
    d.g0_pm = g0_pm;
    return intracavity_photons(d, cavity);
}

ExperimentConfig default_config()
{
    ExperimentConfig c;
    c.cavity.omega_r0 = hz_to_rad(10.77e9);
    c.cavity.J = hz_to_rad(207.5e6);
    c.cavity.kappa_plus = hz_to_rad(230e3);
    c.cavity.kappa_e_plus = hz_to_rad(85.3e3);
    c.cavity.kappa_minus = hz_to_rad(8.9e6);
    c.cavity.kappa_e_minus = hz_to_rad(8.9e6);
    c.cavity.n_bath_plus = 0.0;
    c.mech.omega_m = hz_to_rad(424.7e6);
    c.mech.gamma_i = hz_to_rad(68.0);
    c.mech.n_bath_m = 1.5;
    c.g0_pm = hz_to_rad(17.3);
    c.drives.push_back({424.7e6, std::nullopt, 2.357e5});
    c.jitter = {JitterShape::Gaussian, 1.98e3};
    c.design.coil = {500e-9, 1e-6, 35.0, 74e-6, 120e-9};
    return c;
}

ExperimentConfig parse_config(const std::string &text)
{
    json root;
    try
    {
        root = json::parse(text);
    }
    catch (const json::parse_error &e)
    {
        throw ConfigError("line " + std::to_string(line_of_offset(text, e.byte == 0 ? 0 : e.byte - 1)),
                          "syntax error");
    }

    ExperimentConfig c = default_config();
    const Reader r(root, "", {"seed", "output_dir", "device", "drives", "jitter", "noise", "sweep", "ringdown",
                              "heating", "npsd", "design"});
    if (r.has("seed"))
    {
        const auto &s = r.raw("seed");
        check(s.is_number_unsigned(), "seed", "expected a non-negative integer");
        c.seed = s.get<std::uint64_t>();
    }
    if (r.has("output_dir"))
    {
        const auto &s = r.raw("output_dir");
        check(s.is_string(), "output_dir", "expected a string");
        c.output_dir = s.get<std::string>();
    }

    if (r.has("device"))
    {
        const Reader d = r.child("device", {"omega_r0_hz", "J_hz", "kappa_plus_hz", "kappa_minus_hz",
                                            "kappa_e_plus_hz", "kappa_e_minus_hz", "n_bath_plus", "omega_m_hz",
                                            "gamma_i_hz", "n_bath_m", "g0_pm_hz", "attenuation_db"});
        auto rate = [&](const char *key, double &field) {
            double v = hz(field);
            d.num(key, v);
            field = hz_to_rad(v);
        };
        rate("omega_r0_hz", c.cavity.omega_r0);
        rate("J_hz", c.cavity.J);
        rate("kappa_plus_hz", c.cavity.kappa_plus);
        rate("kappa_minus_hz", c.cavity.kappa_minus);
        rate("kappa_e_plus_hz", c.cavity.kappa_e_plus);
        rate("kappa_e_minus_hz", c.cavity.kappa_e_minus);
        rate("omega_m_hz", c.mech.omega_m);
        rate("gamma_i_hz", c.mech.gamma_i);
        rate("g0_pm_hz", c.g0_pm);
        d.num("n_bath_plus", c.cavity.n_bath_plus);
        d.num("n_bath_m", c.mech.n_bath_m);
        d.num("attenuation_db", c.attenuation_db);
        try
        {
            c.cavity.validate();
            c.mech.validate();
        }
        catch (const DomainError &e)
        {
            throw ConfigError("device", e.what());
        }
        check(c.g0_pm >= 0.0, "device.g0_pm_hz", "must be non-negative");
    }

    if (r.has("drives"))
    {
        const auto &arr = r.raw("drives");
        check(arr.is_array(), "drives", "expected an array");
        c.drives.clear();
        for (std::size_t i = 0; i < arr.size(); ++i)
        {
            const std::string path = "drives[" + std::to_string(i) + "]";
            const Reader d(arr[i], path, {"detuning_hz", "power_in_dbm", "n_d"});
            DriveSpec spec;
            check(d.has("detuning_hz"), path + ".detuning_hz", "missing");
            d.num("detuning_hz", spec.detuning_hz);
            d.opt_num("power_in_dbm", spec.power_in_dbm);
            d.opt_num("n_d", spec.n_d);
            check(spec.power_in_dbm.has_value() != spec.n_d.has_value(), path,
                  "give exactly one of power_in_dbm or n_d");
            check(!spec.n_d || *spec.n_d >= 0.0, path + ".n_d", "must be non-negative");
            c.drives.push_back(spec);
        }
    }

    if (r.has("jitter"))
    {
        const Reader j = r.child("jitter", {"shape", "fwhm_hz"});
        if (j.has("shape"))
        {
            const auto &s = j.raw("shape");
            check(s.is_string(), "jitter.shape", "expected a string");
            const auto name = s.get<std::string>();
            if (name == "gaussian")
                c.jitter.shape = JitterShape::Gaussian;
            else if (name == "lorentzian")
                c.jitter.shape = JitterShape::Lorentzian;
            else
                throw ConfigError("jitter.shape", "expected \"gaussian\" or \"lorentzian\"");
        }
        j.num("fwhm_hz", c.jitter.fwhm_hz);
        check(c.jitter.fwhm_hz >= 0.0, "jitter.fwhm_hz", "must be non-negative");
    }

    if (r.has("noise"))
    {
        const Reader n = r.child("noise", {"reflection_sigma", "ringdown_sigma", "npsd_sigma", "heating_sigma"});
        n.num("reflection_sigma", c.noise.reflection_sigma);
        n.num("ringdown_sigma", c.noise.ringdown_sigma);
        n.num("npsd_sigma", c.noise.npsd_sigma);
        n.num("heating_sigma", c.noise.heating_sigma);
        for (double v : {c.noise.reflection_sigma, c.noise.ringdown_sigma, c.noise.npsd_sigma, c.noise.heating_sigma})
            check(v >= 0.0, "noise", "sigmas must be non-negative");
    }

    if (r.has("sweep"))
    {
        const Reader s = r.child("sweep", {"n_d", "offsets_hz", "span_hz", "points", "resonance_span_hz",
                                           "resonance_points"});
        s.num("n_d", c.sweep.n_d);
        s.nums("offsets_hz", c.sweep.offsets_hz);
        s.num("span_hz", c.sweep.span_hz);
        s.count("points", c.sweep.points);
        s.num("resonance_span_hz", c.sweep.resonance_span_hz);
        s.count("resonance_points", c.sweep.resonance_points);
        check(c.sweep.n_d >= 0.0, "sweep.n_d", "must be non-negative");
        check(c.sweep.span_hz > 0.0 && c.sweep.resonance_span_hz > 0.0, "sweep", "spans must be positive");
        check(c.sweep.points >= 2 && c.sweep.resonance_points >= 2, "sweep", "need at least two points");
    }

    if (r.has("ringdown"))
    {
        const Reader s = r.child("ringdown", {"n_d", "cavity_amplitude", "duration_decays", "points"});
        s.nums("n_d", c.ringdown.n_d);
        s.num("cavity_amplitude", c.ringdown.cavity_amplitude);
        s.num("duration_decays", c.ringdown.duration_decays);
        s.count("points", c.ringdown.points);
        check(c.ringdown.duration_decays > 0.0, "ringdown.duration_decays", "must be positive");
        check(c.ringdown.points >= 8, "ringdown.points", "need at least eight points");
        for (double n : c.ringdown.n_d)
            check(n >= 0.0, "ringdown.n_d", "must be non-negative");
    }

    if (r.has("heating"))
    {
        const Reader s = r.child("heating", {"n_d", "gamma_p_hz", "n_hot", "delta_b", "gamma_s_hz", "duration_s",
                                             "points"});
        s.num("n_d", c.heating.n_d);
        s.num("gamma_p_hz", c.heating.gamma_p_hz);
        s.num("n_hot", c.heating.n_hot);
        s.num("delta_b", c.heating.delta_b);
        s.num("gamma_s_hz", c.heating.gamma_s_hz);
        s.num("duration_s", c.heating.duration_s);
        s.count("points", c.heating.points);
        check(c.heating.duration_s > 0.0, "heating.duration_s", "must be positive");
        check(c.heating.points >= 10, "heating.points", "need at least ten points");
    }

    if (r.has("npsd"))
    {
        const Reader s = r.child("npsd", {"n_d", "gain_db", "span_hz", "points"});
        s.nums("n_d", c.npsd.n_d);
        s.num("gain_db", c.npsd.gain_db);
        s.num("span_hz", c.npsd.span_hz);
        s.count("points", c.npsd.points);
        check(c.npsd.span_hz > 0.0, "npsd.span_hz", "must be positive");
        check(c.npsd.points >= 3, "npsd.points", "need at least three points");
    }

    if (r.has("design"))
    {
        const Reader s = r.child("design", {"wire_width_nm", "pitch_nm", "turns", "outer_dim_nm", "thickness_nm",
                                            "wheeler_k1", "wheeler_k2", "srf_hz", "c_motional_ff", "m_eff_kg",
                                            "dc_du_f_per_m"});
        auto nm = [&](const char *key, double &field) {
            double v = field * 1e9;
            s.num(key, v);
            field = v * 1e-9;
        };
        nm("wire_width_nm", c.design.coil.wire_width);
        nm("pitch_nm", c.design.coil.pitch);
        nm("outer_dim_nm", c.design.coil.outer_dim);
        nm("thickness_nm", c.design.coil.thickness);
        s.num("turns", c.design.coil.turns);
        s.num("wheeler_k1", c.design.coefficients.k1);
        s.num("wheeler_k2", c.design.coefficients.k2);
        s.num("srf_hz", c.design.srf_hz);
        s.num("c_motional_ff", c.design.c_motional_ff);
        s.opt_num("m_eff_kg", c.design.m_eff_kg);
        s.opt_num("dc_du_f_per_m", c.design.dc_du_f_per_m);
    }
    return c;
}

ExperimentConfig load_config(const std::filesystem::path &path)
{
    std::string text;
    try
    {
        text = read_text(path);
    }
    catch (const std::exception &e)
    {
        throw ConfigError(path.string(), e.what());
    }
    try
    {
        return parse_config(text);
    }
    catch (const ConfigError &e)
    {
        throw ConfigError(path.string() + ":" + e.where(), std::string(e.what()).substr(e.where().size() + 2));
    }
}

std::string config_to_json(const ExperimentConfig &c)
{
    json j;
    j["seed"] = c.seed;
    if (c.output_dir)
        j["output_dir"] = *c.output_dir;
    j["device"] = {{"omega_r0_hz", hz(c.cavity.omega_r0)},
                   {"J_hz", hz(c.cavity.J)},
                   {"kappa_plus_hz", hz(c.cavity.kappa_plus)},
                   {"kappa_minus_hz", hz(c.cavity.kappa_minus)},
                   {"kappa_e_plus_hz", hz(c.cavity.kappa_e_plus)},
                   {"kappa_e_minus_hz", hz(c.cavity.kappa_e_minus)},
                   {"n_bath_plus", c.cavity.n_bath_plus},
                   {"omega_m_hz", hz(c.mech.omega_m)},
                   {"gamma_i_hz", hz(c.mech.gamma_i)},
                   {"n_bath_m", c.mech.n_bath_m},
                   {"g0_pm_hz", hz(c.g0_pm)},
                   {"attenuation_db", c.attenuation_db}};
    j["drives"] = json::array();
    for (const auto &d : c.drives)
    {
        json e = {{"detuning_hz", d.detuning_hz}};
        if (d.power_in_dbm)
            e["power_in_dbm"] = *d.power_in_dbm;
        if (d.n_d)
            e["n_d"] = *d.n_d;
        j["drives"].push_back(e);
    }
    j["jitter"] = {{"shape", c.jitter.shape == JitterShape::Gaussian ? "gaussian" : "lorentzian"},
                   {"fwhm_hz", c.jitter.fwhm_hz}};
    j["noise"] = {{"reflection_sigma", c.noise.reflection_sigma},
                  {"ringdown_sigma", c.noise.ringdown_sigma},
                  {"npsd_sigma", c.noise.npsd_sigma},
                  {"heating_sigma", c.noise.heating_sigma}};
    j["sweep"] = {{"n_d", c.sweep.n_d},
                  {"offsets_hz", c.sweep.offsets_hz},
                  {"span_hz", c.sweep.span_hz},
                  {"points", c.sweep.points},
                  {"resonance_span_hz", c.sweep.resonance_span_hz},
                  {"resonance_points", c.sweep.resonance_points}};
    j["ringdown"] = {{"n_d", c.ringdown.n_d},
                     {"cavity_amplitude", c.ringdown.cavity_amplitude},
                     {"duration_decays", c.ringdown.duration_decays},
                     {"points", c.ringdown.points}};
    j["heating"] = {{"n_d", c.heating.n_d},         {"gamma_p_hz", c.heating.gamma_p_hz},
                    {"n_hot", c.heating.n_hot},     {"delta_b", c.heating.delta_b},
                    {"gamma_s_hz", c.heating.gamma_s_hz}, {"duration_s", c.heating.duration_s},
                    {"points", c.heating.points}};
    j["npsd"] = {{"n_d", c.npsd.n_d}, {"gain_db", c.npsd.gain_db}, {"span_hz", c.npsd.span_hz},
                 {"points", c.npsd.points}};
    json design = {{"wire_width_nm", c.design.coil.wire_width * 1e9},
                   {"pitch_nm", c.design.coil.pitch * 1e9},
                   {"turns", c.design.coil.turns},
                   {"outer_dim_nm", c.design.coil.outer_dim * 1e9},
                   {"thickness_nm", c.design.coil.thickness * 1e9},
                   {"wheeler_k1", c.design.coefficients.k1},
                   {"wheeler_k2", c.design.coefficients.k2},
                   {"srf_hz", c.design.srf_hz},
                   {"c_motional_ff", c.design.c_motional_ff}};
    if (c.design.m_eff_kg)
        design["m_eff_kg"] = *c.design.m_eff_kg;
    if (c.design.dc_du_f_per_m)
        design["dc_du_f_per_m"] = *c.design.dc_du_f_per_m;
    j["design"] = design;
    return j.dump(2) + "\n";
}

} // namespace emx
