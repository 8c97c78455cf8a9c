#include "masgan/config.hpp"

#include "masgan/errors.hpp"
#include "masgan/hash.hpp"
#include "masgan/io.hpp"

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <sstream>

namespace fs = std::filesystem;

namespace masgan::cli {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct KvParser {
    std::string section;
    std::string source;
    int line_no = 0;

    double to_double(const std::string& key, const std::string& value) const {
        char* end = nullptr;
        const double v = std::strtod(value.c_str(), &end);
        if (end == value.c_str() || *end != '\0')
            throw ParseError(source + ":" + std::to_string(line_no) + ": bad number for " + key + ": '" + value + "'");
        return v;
    }
    int64_t to_int(const std::string& key, const std::string& value) const {
        char* end = nullptr;
        const int64_t v = std::strtoll(value.c_str(), &end, 10);
        if (end == value.c_str() || *end != '\0')
            throw ParseError(source + ":" + std::to_string(line_no) + ": bad integer for " + key + ": '" + value + "'");
        return v;
    }
    bool to_bool(const std::string& key, const std::string& value) const {
        if (value == "true" || value == "1") return true;
        if (value == "false" || value == "0") return false;
        throw ParseError(source + ":" + std::to_string(line_no) + ": bad bool for " + key + ": '" + value + "'");
    }
    template <typename T, typename F>
    std::vector<T> to_list(const std::string& key, const std::string& value, F convert) const {
        std::vector<T> out;
        std::istringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) out.push_back(convert(key, trim(item)));
        if (out.empty())
            throw ParseError(source + ":" + std::to_string(line_no) + ": empty list for " + key);
        return out;
    }
};

} // namespace

RunConfig parse_config_text(const std::string& text, const std::string& source_name) {
    RunConfig cfg;
    cfg.source_path = source_name;
    cfg.source_hash = sha256_hex(text);
    cfg.calibration_seeds.clear();

    KvParser p;
    p.source = source_name;
    std::istringstream in(text);
    std::string raw;
    bool seeds_seen = false;
    while (std::getline(in, raw)) {
        ++p.line_no;
        std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ParseError(source_name + ":" + std::to_string(p.line_no) + ": unterminated section header");
            p.section = trim(line.substr(1, line.size() - 2));
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ParseError(source_name + ":" + std::to_string(p.line_no) + ": expected key = value, got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));

        if (p.section.empty()) {
            if (key == "output_dir") cfg.output_dir = value;
            else throw ParseError(source_name + ":" + std::to_string(p.line_no) + ": unknown top-level key '" + key + "'");
        } else if (p.section == "simulator") {
            auto& s = cfg.simulator;
            if (key == "n_noise") s.n_noise = p.to_int(key, value);
            else if (key == "value_rate") s.value_rate = p.to_double(key, value);
            else if (key == "n_value") s.n_value = static_cast<int>(p.to_int(key, value));
            else if (key == "session_seconds") s.session_seconds = p.to_int(key, value);
            else if (key == "tick_size") s.tick_size = p.to_double(key, value);
            else if (key == "initial_price") s.initial_price = p.to_double(key, value);
            else if (key == "ou_r_bar") s.ou.r_bar = p.to_double(key, value);
            else if (key == "ou_kappa") s.ou.kappa = p.to_double(key, value);
            else if (key == "ou_sigma") s.ou.sigma = p.to_double(key, value);
            else if (key == "ou_dt") s.ou.dt = p.to_double(key, value);
            else if (key == "mm_wake_interval_s") s.mm.wake_interval_s = p.to_double(key, value);
            else if (key == "mm_levels") s.mm.levels = static_cast<int>(p.to_int(key, value));
            else if (key == "mm_size_per_level") s.mm.size_per_level = p.to_int(key, value);
            else if (key == "value_order_size") s.value_order_size = p.to_int(key, value);
            else if (key == "value_obs_noise_ticks") s.value_obs_noise_ticks = p.to_double(key, value);
            else if (key == "emit_trades") cfg.emit_trades = p.to_bool(key, value);
            else if (key == "seeds") {
                cfg.simulate_seeds = p.to_list<uint64_t>(key, value, [&](const std::string& k, const std::string& v) {
                    return static_cast<uint64_t>(p.to_int(k, v));
                });
                seeds_seen = true;
            } else
                throw ParseError(source_name + ":" + std::to_string(p.line_no) + ": unknown simulator key '" + key + "'");
        } else if (p.section == "data") {
            if (key == "bar_seconds") cfg.bar_seconds = static_cast<int>(p.to_int(key, value));
            else if (key == "window_len") cfg.window_len = static_cast<int>(p.to_int(key, value));
            else if (key == "input_dir") cfg.input_dir = value;
            else if (key == "dataset_dir") cfg.dataset_dir = value;
            else throw ParseError(source_name + ":" + std::to_string(p.line_no) + ": unknown data key '" + key + "'");
        } else if (p.section == "gan") {
            auto& gn = cfg.gan;
            if (key == "latent_dim") gn.latent_dim = static_cast<int>(p.to_int(key, value));
            else if (key == "batch_size") gn.batch_size = static_cast<int>(p.to_int(key, value));
            else if (key == "n_critic") gn.n_critic = static_cast<int>(p.to_int(key, value));
            else if (key == "gp_lambda") gn.gp_lambda = p.to_double(key, value);
            else if (key == "learning_rate") gn.learning_rate = p.to_double(key, value);
            else if (key == "lr_decay") gn.lr_decay = p.to_bool(key, value);
            else if (key == "max_iterations") gn.max_iterations = static_cast<int>(p.to_int(key, value));
            else if (key == "seed") gn.seed = static_cast<uint64_t>(p.to_int(key, value));
            else if (key == "use_attention") gn.use_attention = p.to_bool(key, value);
            else if (key == "eval_interval") gn.eval_interval = static_cast<int>(p.to_int(key, value));
            else if (key == "stop_on_convergence") gn.stop_on_convergence = p.to_bool(key, value);
            else if (key == "base_channels") gn.base_channels = static_cast<int>(p.to_int(key, value));
            else if (key == "hidden_units") gn.hidden_units = static_cast<int>(p.to_int(key, value));
            else if (key == "dropout_rate") gn.dropout_rate = p.to_double(key, value);
            else if (key == "eval_real_cap") gn.eval_real_cap = static_cast<int>(p.to_int(key, value));
            else if (key == "eval_gen_count") gn.eval_gen_count = static_cast<int>(p.to_int(key, value));
            else throw ParseError(source_name + ":" + std::to_string(p.line_no) + ": unknown gan key '" + key + "'");
        } else if (p.section == "calibration") {
            if (key == "n_values")
                cfg.grid.n_values = p.to_list<int64_t>(key, value, [&](const std::string& k, const std::string& v) {
                    return p.to_int(k, v);
                });
            else if (key == "lambda_values")
                cfg.grid.lambda_values = p.to_list<double>(key, value, [&](const std::string& k, const std::string& v) {
                    return p.to_double(k, v);
                });
            else if (key == "seeds")
                cfg.calibration_seeds =
                    p.to_list<uint64_t>(key, value, [&](const std::string& k, const std::string& v) {
                        return static_cast<uint64_t>(p.to_int(k, v));
                    });
            else
                throw ParseError(source_name + ":" + std::to_string(p.line_no) + ": unknown calibration key '" + key + "'");
        } else {
            throw ParseError(source_name + ":" + std::to_string(p.line_no) + ": unknown section [" + p.section + "]");
        }
    }
    (void)seeds_seen;

    if (const char* env_out = std::getenv("MASGAN_OUT"); env_out && *env_out) cfg.output_dir = env_out;
    return cfg;
}

RunConfig parse_config_file(const std::string& path) {
    return parse_config_text(read_file(path), path);
}

void RunConfig::validate() const {
    std::vector<std::string> bad;
    const auto collect = [&](const auto& fn) {
        try {
            fn();
        } catch (const std::exception& e) {
            const std::string what = e.what();
            if (what.find('\n') == std::string::npos) {
                bad.push_back(what);
                return;
            }
            std::istringstream lines(what);
            std::string line;
            bool first = true;
            while (std::getline(lines, line)) {
                if (first) { first = false; continue; } // skip the "invalid X:" banner
                bad.push_back(trim(line));
            }
        }
    };
    collect([&] { simulator.validate(); });
    collect([&] { gan.validate(); });

    if (bar_seconds <= 0) bad.push_back("data.bar_seconds must be > 0");
    if (window_len <= 0) bad.push_back("data.window_len must be > 0");
    if (bar_seconds > 0 && simulator.session_seconds % bar_seconds != 0)
        bad.push_back("simulator.session_seconds must be a multiple of data.bar_seconds");
    if (bar_seconds > 0 && window_len > 0 && simulator.session_seconds / bar_seconds < window_len)
        bad.push_back("data.window_len exceeds the returns a session yields (session_seconds / bar_seconds)");
    if (simulate_seeds.empty()) bad.push_back("simulator.seeds must list at least one seed");
    if (output_dir.empty()) bad.push_back("output_dir must be non-empty");

    if (!grid.n_values.empty() || !grid.lambda_values.empty()) {
        try {
            grid.validate();
        } catch (const std::exception& e) {
            bad.push_back(std::string("calibration: ") + e.what());
        }
        if (calibration_seeds.empty()) bad.push_back("calibration.seeds must list at least one seed");
    }

    if (!bad.empty()) {
        std::string msg = "config validation failed (" + source_path + "):";
        for (const auto& m : bad) msg += "\n  " + m;
        throw ConfigError(msg);
    }
}

std::string RunConfig::resolved_input_dir() const {
    return input_dir.empty() ? (fs::path(output_dir) / "sessions").string() : input_dir;
}

std::string RunConfig::resolved_dataset_dir() const {
    return dataset_dir.empty() ? (fs::path(output_dir) / "dataset").string() : dataset_dir;
}

} // namespace masgan::cli
