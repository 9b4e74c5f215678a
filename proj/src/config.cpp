#include "hvibem/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace hvibem {

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

}  // namespace

Config Config::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_string(ss.str());
}

Config Config::parse_string(const std::string& text) {
    Config cfg;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError("config: empty key on line " + std::to_string(lineno));
        cfg.values_[key] = val;
    }
    return cfg;
}

bool Config::has(const std::string& key) const { return values_.count(key) > 0; }

std::string Config::get_string(const std::string& key, const std::string& def) const {
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? def : it->second;
    used_[key] = v;
    return v;
}

double Config::get_double(const std::string& key, double def) const {
    const auto it = values_.find(key);
    if (it == values_.end()) {
        std::ostringstream os;
        os.precision(17);
        os << def;
        used_[key] = os.str();
        return def;
    }
    try {
        std::size_t pos = 0;
        const double v = std::stod(it->second, &pos);
        if (pos != it->second.size()) throw std::invalid_argument("trailing characters");
        used_[key] = it->second;
        return v;
    } catch (const std::exception&) {
        throw ConfigError("config: key '" + key + "' is not a number: '" + it->second + "'");
    }
}

int Config::get_int(const std::string& key, int def) const {
    const double v = get_double(key, def);
    const int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) throw ConfigError("config: key '" + key + "' is not an integer");
    return i;
}

bool Config::get_bool(const std::string& key, bool def) const {
    const auto it = values_.find(key);
    const std::string v = it == values_.end() ? (def ? "true" : "false") : it->second;
    used_[key] = v;
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: key '" + key + "' is not a boolean: '" + v + "'");
}

void Config::set(const std::string& key, const std::string& value) {
    values_[key] = value;
    used_[key] = value;
}

std::string Config::resolved() const {
    std::map<std::string, std::string> all = used_;
    for (const auto& [k, v] : values_) all[k] = v;
    std::ostringstream os;
    for (const auto& [k, v] : all) os << k << " = " << v << "\n";
    return os.str();
}

std::string Config::first_unused_key() const {
    for (const auto& [k, v] : values_)
        if (!used_.count(k)) return k;
    return "";
}

RunConfig RunConfig::from_config(const Config& cfg) {
    RunConfig rc;
    rc.fixture = cfg.get_string("fixture", rc.fixture);
    rc.h = cfg.get_double("mesh.h", 0.0);
    rc.nl_a = cfg.get_double("nonlinearity.a", -1.0);
    rc.nl_b = cfg.get_double("nonlinearity.b", -1.0);
    rc.mu1 = cfg.get_double("law.mu1", -1.0);
    rc.mu2 = cfg.get_double("law.mu2", -1.0);
    rc.alpha = cfg.get_double("law.alpha", -1.0);
    rc.outer_tol = cfg.get_double("solver.outer_tol", rc.outer_tol);
    rc.inner_tol = cfg.get_double("solver.inner_tol", rc.inner_tol);
    rc.max_outer = cfg.get_int("solver.max_outer", rc.max_outer);
    rc.seed = static_cast<std::uint64_t>(cfg.get_double("seed", 1234));
    rc.out_dir = cfg.get_string("out", rc.out_dir);
    rc.workers = cfg.get_int("workers", rc.workers);
    rc.stability_kind = cfg.get_string("stability.kind", rc.stability_kind);
    rc.stability_N = cfg.get_int("stability.N", rc.stability_N);
    rc.control_kind = cfg.get_string("control.kind", rc.control_kind);
    rc.control_rho = cfg.get_double("control.rho", -1.0);
    rc.control_max_evals = cfg.get_int("control.max_evals", rc.control_max_evals);
    rc.control_rho_sweep = cfg.get_bool("control.rho_sweep", false);
    rc.field_grid = cfg.get_int("field.grid", rc.field_grid);
    rc.spectra_panels = cfg.get_int("spectra.panels", rc.spectra_panels);

    // validation: fail before any compute, naming the violated invariant
    if (rc.h < 0.0) throw ConfigError("mesh.h must be positive (or omitted)");
    const bool has_m1 = rc.mu1 >= 0.0, has_m2 = rc.mu2 >= 0.0;
    if (has_m1 != has_m2) throw ConfigError("law.mu1 and law.mu2 must be set together");
    if (has_m1 && !(rc.mu1 > rc.mu2))
        throw ConfigError("friction law requires mu1 > mu2 (got mu1 <= mu2)");
    if (has_m2 && !(rc.mu2 > 0.0)) throw ConfigError("friction law requires mu2 > 0");
    if (cfg.has("law.alpha") && !(rc.alpha > 0.0)) throw ConfigError("friction law requires alpha > 0");
    if (cfg.has("nonlinearity.a") && cfg.has("nonlinearity.b") && !(rc.nl_a > rc.nl_b / 8.0))
        throw ConfigError("nonlinearity requires a > b/8");
    if (!(rc.outer_tol > 0.0) || !(rc.inner_tol > 0.0))
        throw ConfigError("solver tolerances must be positive");
    if (rc.max_outer < 1) throw ConfigError("solver.max_outer must be at least 1");
    if (rc.workers < 1) throw ConfigError("workers must be at least 1");
    if (rc.stability_N < 1) throw ConfigError("stability.N must be at least 1");
    if (rc.stability_kind != "linear" && rc.stability_kind != "obstacle")
        throw ConfigError("stability.kind must be 'linear' or 'obstacle'");
    if (rc.control_kind != "1" && rc.control_kind != "2" && rc.control_kind != "3" &&
        rc.control_kind != "4")
        throw ConfigError("control.kind must be one of 1,2,3,4");
    if (rc.field_grid < 2) throw ConfigError("field.grid must be at least 2");
    if (rc.spectra_panels < 8) throw ConfigError("spectra.panels must be at least 8");
    const std::string unused = cfg.first_unused_key();
    if (!unused.empty()) throw ConfigError("config: unknown key '" + unused + "'");
    return rc;
}

}  // namespace hvibem
