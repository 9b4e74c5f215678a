#pragma once

#include <map>
#include <stdexcept>
#include <string>

namespace hvibem {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Flat key-value configuration with '#' comments and dotted keys, e.g.
///   # friction bounds mu1 > mu2 > 0
///   law.mu1 = 2.0
/// Every read is recorded with the value actually used, so the resolved
/// configuration (defaults included) can be echoed next to the results.
class Config {
  public:
    Config() = default;
    static Config parse_file(const std::string& path);
    static Config parse_string(const std::string& text);

    bool has(const std::string& key) const;
    std::string get_string(const std::string& key, const std::string& def) const;
    double get_double(const std::string& key, double def) const;
    int get_int(const std::string& key, int def) const;
    bool get_bool(const std::string& key, bool def) const;
    void set(const std::string& key, const std::string& value);

    /// Sorted key=value echo of every key read so far plus every key set.
    std::string resolved() const;
    /// Keys present in the file but never read; flagged during validation.
    std::string first_unused_key() const;

  private:
    std::map<std::string, std::string> values_;
    mutable std::map<std::string, std::string> used_;
};

/// Validated run parameters shared by the CLI subcommands.
struct RunConfig {
    std::string fixture = "square-nonmonotone";
    double h = 0.0;  // 0 keeps the fixture default
    // physics overrides (negative means keep the fixture value)
    double nl_a = -1.0, nl_b = -1.0;
    double mu1 = -1.0, mu2 = -1.0, alpha = -1.0;
    // solver
    double outer_tol = 1e-9;
    double inner_tol = 1e-11;
    int max_outer = 200;
    std::uint64_t seed = 1234;
    std::string out_dir = "out";
    int workers = 1;
    // experiment options
    std::string stability_kind = "linear";
    int stability_N = 8;
    std::string control_kind = "1";
    double control_rho = -1.0;
    int control_max_evals = 4000;
    bool control_rho_sweep = false;
    int field_grid = 24;
    int spectra_panels = 128;

    static RunConfig from_config(const Config& cfg);  // throws ConfigError
};

}  // namespace hvibem
