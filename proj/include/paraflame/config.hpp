#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "paraflame/common.hpp"

// INI-style run configuration with sections [dataset], [model], [train],
// [eval]. Unknown sections or keys are rejected; parse(serialize(c)) == c.

namespace paraflame::config {

struct RunConfig {
    // [dataset]
    std::string equation = "ks";
    std::vector<double> gammas = {6.0, 24.0};
    int sequences = 20;  // per gamma
    int frames = 200;
    int grid = 256;
    double dt = 0.015;
    double abs_tol = 1e-9;
    double rel_tol = 1e-7;
    bool dealias = true;
    std::uint64_t dataset_seed = 1;
    double ic_low = 0.0;
    double ic_high = 0.03;

    // [model]
    std::string kind = "pfno";
    int levels = 4;
    int width = 30;
    int kmax = 64;
    int n_gamma = 6;
    bool share_weights = true;
    bool use_skip = false;
    int p_hidden = 0;
    int q_hidden = 0;
    int d_hidden = 32;
    std::vector<double> pcnn_channels = {16, 32, 64, 96, 96, 96};
    int pcnn_levels = 6;
    int param_levels = 4;
    int convs_per_block = 2;
    bool use_inception = false;
    std::string embed = "log";
    double embed_min = 0.0;  // 0 -> derived from the dataset's gamma range
    double embed_max = 0.0;
    std::uint64_t model_seed = 7;

    // [train]
    int horizon = 20;
    int epochs = 1000;
    int batch = 800;
    double lr0 = 0.0025;
    double weight_decay = 1e-4;
    int lr_step = 100;
    double lr_gamma = 0.5;
    double clip = 50.0;
    int stride = 1;
    std::uint64_t train_seed = 0;
    bool decoupled_decay = false;

    // [eval]
    double eval_gamma = 9.0;
    int eval_steps = 500;
    int burn_in = 500;
    int samples = 100;
    int sample_every = 10;
    std::uint64_t eval_seed = 0;
    int record = 0;
};

namespace detail {

enum class Kind { Int, U64, Double, Bool, String, DoubleList };

struct FieldDef {
    const char* section;
    const char* key;
    Kind kind;
    void* ptr;
};

inline std::vector<FieldDef> fields(RunConfig& c) {
    using K = Kind;
    return {
        {"dataset", "equation", K::String, &c.equation},
        {"dataset", "gammas", K::DoubleList, &c.gammas},
        {"dataset", "sequences", K::Int, &c.sequences},
        {"dataset", "frames", K::Int, &c.frames},
        {"dataset", "grid", K::Int, &c.grid},
        {"dataset", "dt", K::Double, &c.dt},
        {"dataset", "abs_tol", K::Double, &c.abs_tol},
        {"dataset", "rel_tol", K::Double, &c.rel_tol},
        {"dataset", "dealias", K::Bool, &c.dealias},
        {"dataset", "seed", K::U64, &c.dataset_seed},
        {"dataset", "ic_low", K::Double, &c.ic_low},
        {"dataset", "ic_high", K::Double, &c.ic_high},

        {"model", "kind", K::String, &c.kind},
        {"model", "levels", K::Int, &c.levels},
        {"model", "width", K::Int, &c.width},
        {"model", "kmax", K::Int, &c.kmax},
        {"model", "n_gamma", K::Int, &c.n_gamma},
        {"model", "share_weights", K::Bool, &c.share_weights},
        {"model", "use_skip", K::Bool, &c.use_skip},
        {"model", "p_hidden", K::Int, &c.p_hidden},
        {"model", "q_hidden", K::Int, &c.q_hidden},
        {"model", "d_hidden", K::Int, &c.d_hidden},
        {"model", "pcnn_channels", K::DoubleList, &c.pcnn_channels},
        {"model", "pcnn_levels", K::Int, &c.pcnn_levels},
        {"model", "param_levels", K::Int, &c.param_levels},
        {"model", "convs_per_block", K::Int, &c.convs_per_block},
        {"model", "use_inception", K::Bool, &c.use_inception},
        {"model", "embed", K::String, &c.embed},
        {"model", "embed_min", K::Double, &c.embed_min},
        {"model", "embed_max", K::Double, &c.embed_max},
        {"model", "seed", K::U64, &c.model_seed},

        {"train", "n", K::Int, &c.horizon},
        {"train", "epochs", K::Int, &c.epochs},
        {"train", "batch", K::Int, &c.batch},
        {"train", "lr0", K::Double, &c.lr0},
        {"train", "weight_decay", K::Double, &c.weight_decay},
        {"train", "lr_step", K::Int, &c.lr_step},
        {"train", "lr_gamma", K::Double, &c.lr_gamma},
        {"train", "clip", K::Double, &c.clip},
        {"train", "stride", K::Int, &c.stride},
        {"train", "seed", K::U64, &c.train_seed},
        {"train", "decoupled_decay", K::Bool, &c.decoupled_decay},

        {"eval", "gamma", K::Double, &c.eval_gamma},
        {"eval", "steps", K::Int, &c.eval_steps},
        {"eval", "burn_in", K::Int, &c.burn_in},
        {"eval", "samples", K::Int, &c.samples},
        {"eval", "sample_every", K::Int, &c.sample_every},
        {"eval", "seed", K::U64, &c.eval_seed},
        {"eval", "record", K::Int, &c.record},
    };
}

inline std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void assign(const FieldDef& f, const std::string& raw, int line_no) {
    const std::string value = trim(raw);
    auto bad = [&](const char* why) {
        throw ConfigError("line " + std::to_string(line_no) + ": " + f.section + "." + f.key +
                          ": " + why + " ('" + value + "')");
    };
    try {
        switch (f.kind) {
            case Kind::Int:
                *static_cast<int*>(f.ptr) = std::stoi(value);
                break;
            case Kind::U64:
                *static_cast<std::uint64_t*>(f.ptr) = std::stoull(value);
                break;
            case Kind::Double:
                *static_cast<double*>(f.ptr) = std::stod(value);
                break;
            case Kind::Bool: {
                if (value == "true" || value == "1")
                    *static_cast<bool*>(f.ptr) = true;
                else if (value == "false" || value == "0")
                    *static_cast<bool*>(f.ptr) = false;
                else
                    bad("expected true/false");
                break;
            }
            case Kind::String:
                *static_cast<std::string*>(f.ptr) = value;
                break;
            case Kind::DoubleList: {
                std::vector<double> out;
                std::stringstream ss(value);
                std::string item;
                while (std::getline(ss, item, ',')) {
                    item = trim(item);
                    if (!item.empty()) out.push_back(std::stod(item));
                }
                if (out.empty()) bad("expected a comma-separated list");
                *static_cast<std::vector<double>*>(f.ptr) = out;
                break;
            }
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        bad("could not parse value");
    }
}

inline std::string render(const FieldDef& f) {
    switch (f.kind) {
        case Kind::Int: return std::to_string(*static_cast<int*>(f.ptr));
        case Kind::U64: return std::to_string(*static_cast<std::uint64_t*>(f.ptr));
        case Kind::Double: return format_double(*static_cast<double*>(f.ptr));
        case Kind::Bool: return *static_cast<bool*>(f.ptr) ? "true" : "false";
        case Kind::String: return *static_cast<std::string*>(f.ptr);
        case Kind::DoubleList: {
            const auto& v = *static_cast<std::vector<double>*>(f.ptr);
            std::string out;
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out += ",";
                out += format_double(v[i]);
            }
            return out;
        }
    }
    return "";
}

}  // namespace detail

inline RunConfig parse(const std::string& text) {
    RunConfig cfg;
    auto defs = detail::fields(cfg);
    std::string section;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string s = detail::trim(line);
        if (s.empty() || s[0] == '#' || s[0] == ';') continue;
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("line " + std::to_string(line_no) + ": malformed section");
            section = s.substr(1, s.size() - 2);
            bool known = false;
            for (const auto& d : defs)
                if (section == d.section) known = true;
            if (!known)
                throw ConfigError("line " + std::to_string(line_no) + ": unknown section [" +
                                  section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos)
            throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = detail::trim(s.substr(0, eq));
        const detail::FieldDef* match = nullptr;
        for (const auto& d : defs)
            if (section == d.section && key == d.key) match = &d;
        if (!match)
            throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key +
                              "' in section [" + section + "]");
        detail::assign(*match, s.substr(eq + 1), line_no);
    }
    return cfg;
}

inline std::string serialize(RunConfig& cfg) {
    auto defs = detail::fields(cfg);
    std::string out;
    std::string section;
    for (const auto& d : defs) {
        if (section != d.section) {
            if (!out.empty()) out += "\n";
            section = d.section;
            out += "[" + section + "]\n";
        }
        out += std::string(d.key) + " = " + detail::render(d) + "\n";
    }
    return out;
}

inline RunConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse(text);
}

}  // namespace paraflame::config
