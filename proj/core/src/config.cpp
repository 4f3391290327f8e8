#include "fcl/config.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "fcl/errors.hpp"
#include "fcl/report.hpp"

namespace fcl {

namespace {

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) {
        return "";
    }
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> items;
    std::istringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        items.push_back(trim(item));
    }
    return items;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const std::uint64_t v = std::stoull(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected unsigned integer, got '" + value + "'");
    }
}

std::size_t parse_count(const std::string& key, const std::string& value) {
    return static_cast<std::size_t>(parse_u64(key, value));
}

double parse_f64(const std::string& key, const std::string& value) {
    try {
        std::size_t used = 0;
        const double v = std::stod(value, &used);
        if (used != value.size()) {
            throw std::invalid_argument(value);
        }
        return v;
    } catch (const std::exception&) {
        throw ConfigError("key '" + key + "': expected number, got '" + value + "'");
    }
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") {
        return true;
    }
    if (value == "false" || value == "0") {
        return false;
    }
    throw ConfigError("key '" + key + "': expected true/false, got '" + value + "'");
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i > 0) {
            out += ",";
        }
        out += items[i];
    }
    return out;
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = {
        // dataset
        "num_clients", "volumes_per_client", "slices_per_volume", "partitions", "image_side",
        "template_strength", "noise_sigma",
        // pre-training
        "rounds", "local_steps", "batch_size", "lr", "momentum", "bank_capacity", "bank_min_fill",
        "tau", "arm", "hidden_dim", "embed_dim", "wire_codec",
        // probe
        "probe_epochs", "probe_lr", "folds", "probe_finetune", "probe_finetune_lr",
        // experiment
        "arms", "budgets", "seeds", "seed", "out_dir"};
    return keys;
}

RunConfig parse_config_text(const std::string& text) {
    RunConfig cfg;
    std::map<std::string, std::string> seen;

    std::istringstream stream(text);
    std::string raw_line;
    std::size_t line_no = 0;
    while (std::getline(stream, raw_line)) {
        ++line_no;
        std::string line = raw_line;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) {
            throw ConfigError("line " + std::to_string(line_no) + ": empty key");
        }
        if (seen.count(key)) {
            throw ConfigError("duplicate key '" + key + "'");
        }
        seen[key] = value;

        if (key == "num_clients") {
            cfg.data.num_clients = parse_count(key, value);
        } else if (key == "volumes_per_client") {
            cfg.data.volumes_per_client = parse_count(key, value);
        } else if (key == "slices_per_volume") {
            cfg.data.slices_per_volume = parse_count(key, value);
        } else if (key == "partitions") {
            cfg.data.partitions = parse_count(key, value);
        } else if (key == "image_side") {
            cfg.data.image_side = parse_count(key, value);
        } else if (key == "template_strength") {
            cfg.data.template_strength = parse_f64(key, value);
        } else if (key == "noise_sigma") {
            cfg.data.noise_sigma = parse_f64(key, value);
        } else if (key == "rounds") {
            cfg.round.rounds = parse_count(key, value);
        } else if (key == "local_steps") {
            cfg.round.local_steps = parse_count(key, value);
        } else if (key == "batch_size") {
            cfg.round.batch_size = parse_count(key, value);
        } else if (key == "lr") {
            cfg.round.lr = parse_f64(key, value);
        } else if (key == "momentum") {
            cfg.round.momentum = parse_f64(key, value);
        } else if (key == "bank_capacity") {
            cfg.round.bank_capacity = parse_count(key, value);
        } else if (key == "bank_min_fill") {
            cfg.round.bank_min_fill = parse_count(key, value);
        } else if (key == "tau") {
            cfg.round.tau = parse_f64(key, value);
        } else if (key == "arm") {
            cfg.round.mode = mode_from_string(value);
        } else if (key == "hidden_dim") {
            cfg.round.hidden_dim = parse_count(key, value);
        } else if (key == "embed_dim") {
            cfg.round.embed_dim = parse_count(key, value);
        } else if (key == "wire_codec") {
            cfg.round.wire_codec = parse_bool(key, value);
        } else if (key == "probe_epochs") {
            cfg.probe.epochs = parse_count(key, value);
        } else if (key == "probe_lr") {
            cfg.probe.lr = parse_f64(key, value);
        } else if (key == "folds") {
            cfg.probe.folds = parse_count(key, value);
        } else if (key == "probe_finetune") {
            cfg.probe.finetune_encoder = parse_bool(key, value);
        } else if (key == "probe_finetune_lr") {
            cfg.probe.finetune_lr = parse_f64(key, value);
        } else if (key == "arms") {
            cfg.arms.clear();
            for (const std::string& item : split_list(value)) {
                cfg.arms.push_back(mode_from_string(item));
            }
        } else if (key == "budgets") {
            cfg.budgets.clear();
            for (const std::string& item : split_list(value)) {
                cfg.budgets.push_back(parse_count(key, item));
            }
        } else if (key == "seeds") {
            cfg.eval_seeds.clear();
            for (const std::string& item : split_list(value)) {
                cfg.eval_seeds.push_back(parse_u64(key, item));
            }
        } else if (key == "seed") {
            cfg.seed = parse_u64(key, value);
            cfg.seed_set = true;
        } else if (key == "out_dir") {
            cfg.out_dir = value;
        } else {
            throw ConfigError("unknown key '" + key + "'");
        }
    }
    return cfg;
}

RunConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config file: " + path);
    }
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config_text(text.str());
}

void RunConfig::validate() const {
    if (!seed_set) {
        throw ConfigError("missing required key 'seed' (set it in the config or pass --seed)");
    }
    data.validate();
    round.validate();
    probe.validate(data.volumes_per_client);
    if (arms.empty()) {
        throw ConfigError("key 'arms': must name at least one arm");
    }
    if (budgets.empty()) {
        throw ConfigError("key 'budgets': must name at least one label budget");
    }
    for (std::size_t n : budgets) {
        if (n < 1 || n > data.volumes_per_client - 1) {
            throw ConfigError("key 'budgets': every N must lie in [1, volumes_per_client - 1]");
        }
    }
    if (eval_seeds.empty()) {
        throw ConfigError("key 'seeds': must name at least one seed");
    }
    if (out_dir.empty()) {
        throw ConfigError("key 'out_dir': must not be empty");
    }
}

std::string canonical_config_text(const RunConfig& cfg) {
    std::vector<std::string> arm_names;
    for (Mode m : cfg.arms) {
        arm_names.push_back(to_string(m));
    }
    std::vector<std::string> budget_names;
    for (std::size_t n : cfg.budgets) {
        budget_names.push_back(std::to_string(n));
    }
    std::vector<std::string> seed_names;
    for (std::uint64_t s : cfg.eval_seeds) {
        seed_names.push_back(std::to_string(s));
    }

    std::ostringstream out;
    out << "num_clients = " << cfg.data.num_clients << "\n"
        << "volumes_per_client = " << cfg.data.volumes_per_client << "\n"
        << "slices_per_volume = " << cfg.data.slices_per_volume << "\n"
        << "partitions = " << cfg.data.partitions << "\n"
        << "image_side = " << cfg.data.image_side << "\n"
        << "template_strength = " << format_double(cfg.data.template_strength) << "\n"
        << "noise_sigma = " << format_double(cfg.data.noise_sigma) << "\n"
        << "rounds = " << cfg.round.rounds << "\n"
        << "local_steps = " << cfg.round.local_steps << "\n"
        << "batch_size = " << cfg.round.batch_size << "\n"
        << "lr = " << format_double(cfg.round.lr) << "\n"
        << "momentum = " << format_double(cfg.round.momentum) << "\n"
        << "bank_capacity = " << cfg.round.bank_capacity << "\n"
        << "bank_min_fill = " << cfg.round.bank_min_fill << "\n"
        << "tau = " << format_double(cfg.round.tau) << "\n"
        << "arm = " << to_string(cfg.round.mode) << "\n"
        << "hidden_dim = " << cfg.round.hidden_dim << "\n"
        << "embed_dim = " << cfg.round.embed_dim << "\n"
        << "wire_codec = " << (cfg.round.wire_codec ? "true" : "false") << "\n"
        << "probe_epochs = " << cfg.probe.epochs << "\n"
        << "probe_lr = " << format_double(cfg.probe.lr) << "\n"
        << "folds = " << cfg.probe.folds << "\n"
        << "probe_finetune = " << (cfg.probe.finetune_encoder ? "true" : "false") << "\n"
        << "probe_finetune_lr = " << format_double(cfg.probe.finetune_lr) << "\n"
        << "arms = " << join(arm_names) << "\n"
        << "budgets = " << join(budget_names) << "\n"
        << "seeds = " << join(seed_names) << "\n"
        << "seed = " << cfg.seed << "\n";
    // out_dir is deliberately absent: it changes where results land, never
    // what they are, so it must not perturb the config hash.
    return out.str();
}

std::string config_hash_hex(const RunConfig& cfg) {
    const std::string text = canonical_config_text(cfg);
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char ch : text) {
        hash ^= ch;
        hash *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(hash));
    return std::string(buf, 16);
}

}  // namespace fcl
