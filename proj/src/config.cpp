#include "driftbench/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "driftbench/errors.hpp"

namespace driftbench::cli {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = 0;
    std::size_t b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

struct Entry {
    std::string value;
    int line;
};

using Entries = std::map<std::string, Entry>;

[[noreturn]] void fail(const std::string& origin, const std::string& key, int line,
                       const std::string& msg) {
    throw ConfigError(origin + ":" + std::to_string(line) + ": key '" + key + "': " + msg);
}

double to_double(const std::string& origin, const std::string& key, const Entry& e) {
    const std::string v = trim(e.value);
    double out = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        fail(origin, key, e.line, "expected a number, got '" + v + "'");
    return out;
}

long to_long(const std::string& origin, const std::string& key, const Entry& e) {
    const double d = to_double(origin, key, e);
    if (d != std::floor(d)) fail(origin, key, e.line, "expected an integer");
    return static_cast<long>(d);
}

std::uint64_t to_u64(const std::string& origin, const std::string& key, const Entry& e) {
    const std::string v = trim(e.value);
    std::uint64_t out = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || p != v.data() + v.size())
        fail(origin, key, e.line, "expected an unsigned integer, got '" + v + "'");
    return out;
}

bool to_bool(const std::string& origin, const std::string& key, const Entry& e) {
    const std::string v = trim(e.value);
    if (v == "true" || v == "1") return true;
    if (v == "false" || v == "0") return false;
    fail(origin, key, e.line, "expected true/false");
}

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    for (const std::string& tok : split_csv(csv)) {
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
        if (ec != std::errc() || p != tok.data() + tok.size())
            throw ConfigError("bad seed '" + tok + "' in seed list");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("seed list is empty");
    return out;
}

std::vector<engine::Mode> parse_mode_list(const std::string& csv) {
    std::vector<engine::Mode> out;
    for (const std::string& tok : split_csv(csv)) {
        try {
            out.push_back(engine::mode_from_name(tok));
        } catch (const InvalidInputError& e) {
            throw ConfigError(e.what());
        }
    }
    if (out.empty()) throw ConfigError("mode list is empty");
    return out;
}

RunConfig parse_config_text(const std::string& text, const std::string& origin) {
    Entries entries;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(line_no) +
                              ": expected 'section.key = value', got '" + line + "'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw ConfigError(origin + ":" + std::to_string(line_no) + ": empty key");
        if (entries.count(key))
            throw ConfigError(origin + ":" + std::to_string(line_no) + ": duplicate key '" + key + "'");
        entries[key] = Entry{value, line_no};
    }

    RunConfig cfg;
    long custom_domain_count = 0;
    std::map<long, CustomDomain> customs;

    for (const auto& [key, e] : entries) {
        if (key == "model.input_dim") cfg.input_dim = static_cast<std::size_t>(to_long(origin, key, e));
        else if (key == "model.num_classes") cfg.num_classes = static_cast<std::size_t>(to_long(origin, key, e));
        else if (key == "model.hidden_dim") cfg.hidden_dim = static_cast<std::size_t>(to_long(origin, key, e));
        else if (key == "model.dropout_rate") cfg.dropout_rate = to_double(origin, key, e);
        else if (key == "rfp.n_passes") cfg.n_passes = static_cast<std::size_t>(to_long(origin, key, e));
        else if (key == "rfp.gamma") cfg.gamma = to_double(origin, key, e);
        else if (key == "rfp.tau") cfg.tau = to_double(origin, key, e);
        else if (key == "cda.policy") {
            const std::string v = trim(e.value);
            if (v == "linear_clamp") cfg.alpha_policy = cda::AlphaPolicy::Kind::linear_clamp;
            else if (v == "exp_decay") cfg.alpha_policy = cda::AlphaPolicy::Kind::exp_decay;
            else fail(origin, key, e.line, "expected linear_clamp or exp_decay");
        } else if (key == "cda.alpha_bound") cfg.alpha_bound = to_double(origin, key, e);
        else if (key == "cda.kappa") cfg.kappa = to_double(origin, key, e);
        else if (key == "cda.k") cfg.cda_k = static_cast<std::size_t>(to_long(origin, key, e));
        else if (key == "engine.mode") {
            try {
                cfg.modes = parse_mode_list(e.value);
            } catch (const ConfigError& err) {
                fail(origin, key, e.line, err.what());
            }
        } else if (key == "engine.alpha") cfg.fixed_alpha = to_double(origin, key, e);
        else if (key == "engine.restore_prob") cfg.restore_prob = to_double(origin, key, e);
        else if (key == "engine.student_dropout") cfg.student_update_dropout = to_bool(origin, key, e);
        else if (key == "optimizer.kind") {
            const std::string v = trim(e.value);
            if (v == "sgd") cfg.optimizer_kind = model::OptimizerState::Kind::sgd;
            else if (v == "adam") cfg.optimizer_kind = model::OptimizerState::Kind::adam;
            else fail(origin, key, e.line, "expected sgd or adam");
        } else if (key == "optimizer.lr") cfg.lr = to_double(origin, key, e);
        else if (key == "optimizer.weight_decay") cfg.weight_decay = to_double(origin, key, e);
        else if (key == "stream.preset") cfg.preset = trim(e.value);
        else if (key == "stream.steps_per_domain") cfg.steps_per_domain = to_long(origin, key, e);
        else if (key == "stream.batch_size") cfg.batch_size = static_cast<std::size_t>(to_long(origin, key, e));
        else if (key == "stream.separation") cfg.separation = to_double(origin, key, e);
        else if (key == "stream.cov_scale") cfg.cov_scale = to_double(origin, key, e);
        else if (key == "stream.label_noise") cfg.label_noise = to_double(origin, key, e);
        else if (key == "stream.order_seed") cfg.order_seed = to_u64(origin, key, e);
        else if (key == "stream.domains") custom_domain_count = to_long(origin, key, e);
        else if (key == "pretrain.steps") cfg.pretrain_steps = to_long(origin, key, e);
        else if (key == "pretrain.lr") cfg.pretrain_lr = to_double(origin, key, e);
        else if (key == "pretrain.batch") cfg.pretrain_batch = static_cast<std::size_t>(to_long(origin, key, e));
        else if (key == "run.seeds") {
            try {
                cfg.seeds = parse_seed_list(e.value);
            } catch (const ConfigError& err) {
                fail(origin, key, e.line, err.what());
            }
        } else if (key == "run.jobs") cfg.jobs = static_cast<std::size_t>(to_long(origin, key, e));
        else if (key.rfind("domain.", 0) == 0) {
            // domain.<index>.<field>
            const std::size_t dot = key.find('.', 7);
            if (dot == std::string::npos) fail(origin, key, e.line, "expected domain.<i>.<field>");
            const std::string idx_str = key.substr(7, dot - 7);
            long idx = -1;
            const auto [p, ec] = std::from_chars(idx_str.data(), idx_str.data() + idx_str.size(), idx);
            if (ec != std::errc() || p != idx_str.data() + idx_str.size() || idx < 0)
                fail(origin, key, e.line, "bad domain index '" + idx_str + "'");
            const std::string field = key.substr(dot + 1);
            CustomDomain& cd = customs[idx];
            if (field == "rotation") cd.rotation = to_double(origin, key, e);
            else if (field == "shift") cd.shift = to_double(origin, key, e);
            else if (field == "cov_scale") cd.cov_scale = to_double(origin, key, e);
            else if (field == "label_noise") cd.label_noise = to_double(origin, key, e);
            else if (field == "steps") cd.steps = to_long(origin, key, e);
            else fail(origin, key, e.line, "unknown domain field '" + field + "'");
        } else {
            fail(origin, key, e.line, "unknown key");
        }
    }

    // Range validation.
    auto require = [&](bool ok, const std::string& key, const std::string& msg) {
        if (!ok) throw ConfigError(origin + ": key '" + key + "': " + msg);
    };
    require(cfg.num_classes >= 2, "model.num_classes", "need at least 2 classes");
    require(cfg.input_dim >= cfg.num_classes, "model.input_dim", "need input_dim >= num_classes");
    require(cfg.dropout_rate >= 0.0 && cfg.dropout_rate < 1.0, "model.dropout_rate", "must be in [0,1)");
    require(cfg.n_passes >= 2, "rfp.n_passes", "need N >= 2");
    require(cfg.gamma > 0.0, "rfp.gamma", "must be > 0");
    require(cfg.tau >= 0.0, "rfp.tau", "must be >= 0");
    require(cfg.alpha_bound > 0.0 && cfg.alpha_bound < 1.0, "cda.alpha_bound", "must be in (0,1)");
    require(cfg.kappa > 0.0, "cda.kappa", "must be > 0");
    require(cfg.cda_k <= cfg.input_dim, "cda.k", "must be <= input_dim");
    require(cfg.restore_prob >= 0.0 && cfg.restore_prob <= 1.0, "engine.restore_prob", "must be in [0,1]");
    require(cfg.lr >= 0.0, "optimizer.lr", "must be >= 0");
    require(cfg.weight_decay >= 0.0, "optimizer.weight_decay", "must be >= 0");
    require(cfg.batch_size >= 1, "stream.batch_size", "must be >= 1");
    require(cfg.steps_per_domain >= 1, "stream.steps_per_domain", "must be >= 1");
    require(cfg.label_noise >= 0.0 && cfg.label_noise < 1.0, "stream.label_noise", "must be in [0,1)");
    require(cfg.preset == "short" || cfg.preset == "long" || cfg.preset == "custom",
            "stream.preset", "expected short, long, or custom");
    require(cfg.pretrain_steps >= 0, "pretrain.steps", "must be >= 0");
    require(cfg.pretrain_lr >= 0.0, "pretrain.lr", "must be >= 0");
    require(cfg.pretrain_batch >= 1, "pretrain.batch", "must be >= 1");
    require(cfg.jobs >= 1, "run.jobs", "must be >= 1");

    if (cfg.preset == "custom") {
        require(custom_domain_count >= 1, "stream.domains", "custom preset needs stream.domains >= 1");
        for (const auto& [idx, cd] : customs)
            require(idx < custom_domain_count, "domain." + std::to_string(idx),
                    "index exceeds stream.domains");
        cfg.custom_domains.resize(static_cast<std::size_t>(custom_domain_count));
        for (const auto& [idx, cd] : customs) cfg.custom_domains[static_cast<std::size_t>(idx)] = cd;
    } else {
        require(customs.empty() && custom_domain_count == 0, "stream.domains",
                "domain.* keys require stream.preset = custom");
    }

    const bool has_fixed = std::find(cfg.modes.begin(), cfg.modes.end(),
                                     engine::Mode::fixed_alpha) != cfg.modes.end();
    if (has_fixed) {
        if (!entries.count("engine.alpha"))
            throw ConfigError(origin + ": key 'engine.alpha': required when engine.mode includes fixed_alpha");
        require(cfg.fixed_alpha >= 0.0 && cfg.fixed_alpha <= 1.0, "engine.alpha", "must be in [0,1]");
    }
    return cfg;
}

RunConfig parse_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace driftbench::cli
