#include "config.hpp"

#include "tpmgrit/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>

namespace tpmgrit::cli {

namespace {

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r\n");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r\n");
    return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(const std::string& key, const std::string& value, const char* expected) {
    throw ConfigError("invalid value '" + value + "' for key '" + key + "' (expected " + expected + ")");
}

double parse_double(const std::string& key, const std::string& value) {
    double out = 0.0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, value, "a real number");
    return out;
}

std::uint64_t parse_count(const std::string& key, const std::string& value) {
    std::uint64_t out = 0;
    const char* end = value.data() + value.size();
    auto [ptr, ec] = std::from_chars(value.data(), end, out);
    if (ec != std::errc() || ptr != end) bad_value(key, value, "a non-negative integer");
    return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1" || value == "on" || value == "yes") return true;
    if (value == "false" || value == "0" || value == "off" || value == "no") return false;
    bad_value(key, value, "true or false");
}

Relaxation parse_relaxation(const std::string& key, const std::string& value) {
    if (value == "F") return Relaxation::F;
    if (value == "FCF") return Relaxation::FCF;
    bad_value(key, value, "F or FCF");
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

std::string join(const std::vector<std::string>& items) {
    std::string out;
    for (const auto& s : items) {
        if (!out.empty()) out += ',';
        out += s;
    }
    return out;
}

std::string bool_text(bool b) { return b ? "true" : "false"; }

}  // namespace

std::string format_double(double value) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    return buf;
}

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
    const std::string value = trim(raw);
    auto count = [&] { return static_cast<std::size_t>(parse_count(key, value)); };

    if (key == "backend") backend = value;
    else if (key == "lambda") lambda = parse_double(key, value);
    else if (key == "cubic") cubic = parse_double(key, value);
    else if (key == "amplitude") amplitude = parse_double(key, value);
    else if (key == "forcing") forcing = parse_double(key, value);
    else if (key == "diffusivity") diffusivity = parse_double(key, value);
    else if (key == "nx") nx = count();
    else if (key == "size") size = count();
    else if (key == "seed") seed = parse_count(key, value);
    else if (key == "fine_points") fine_points = count();
    else if (key == "period") period = parse_double(key, value);
    else if (key == "coarsen") coarsen = count();
    else if (key == "max_levels") max_levels = count();
    else if (key == "min_coarse") min_coarse = count();
    else if (key == "relaxation") relaxation = parse_relaxation(key, value);
    else if (key == "residual_tol") residual_tol = parse_double(key, value);
    else if (key == "tol_mode") {
        if (value == "absolute") tol_mode = ToleranceMode::absolute;
        else if (value == "relative") tol_mode = ToleranceMode::relative;
        else bad_value(key, value, "absolute or relative");
    } else if (key == "max_iterations") max_iterations = count();
    else if (key == "skip_first_down") skip_first_down = parse_bool(key, value);
    else if (key == "coarse_operator") {
        if (value == "rediscretized") coarse_operator = CoarseOperator::rediscretized;
        else if (value == "exact_power") coarse_operator = CoarseOperator::exact_power;
        else bad_value(key, value, "rediscretized or exact_power");
    } else if (key == "periodic") periodic = parse_bool(key, value);
    else if (key == "ic_tolerance") ic_tolerance = parse_double(key, value);
    else if (key == "strict_fifo") strict_fifo = parse_bool(key, value);
    else if (key == "mode") {
        if (value != "auto" && value != "serial" && value != "threaded") {
            bad_value(key, value, "auto, serial or threaded");
        }
        mode = value;
    } else if (key == "workers") workers = count();
    else if (key == "repeat") repeat = count();
    else if (key == "watchdog_ms") watchdog_ms = count();
    else if (key == "cycles") cycles = count();
    else if (key == "reference") reference = value;
    else if (key == "bench_workers" || key == "bench_coarsen") {
        std::vector<std::size_t> list;
        for (const auto& item : split_list(value)) list.push_back(static_cast<std::size_t>(parse_count(key, item)));
        if (list.empty()) bad_value(key, value, "a comma-separated list");
        (key == "bench_workers" ? bench_workers : bench_coarsen) = std::move(list);
    } else if (key == "bench_relaxations") {
        std::vector<Relaxation> list;
        for (const auto& item : split_list(value)) list.push_back(parse_relaxation(key, item));
        if (list.empty()) bad_value(key, value, "a comma-separated list");
        bench_relaxations = std::move(list);
    } else if (key == "out") out = value;
    else throw ConfigError("unknown config key '" + key + "'");
}

std::vector<std::pair<std::string, std::string>> ExperimentConfig::entries() const {
    auto counts = [](const std::vector<std::size_t>& v) {
        std::vector<std::string> s;
        for (auto x : v) s.push_back(std::to_string(x));
        return join(s);
    };
    std::vector<std::string> rel;
    for (auto r : bench_relaxations) rel.emplace_back(to_string(r));
    return {
        {"backend", backend},
        {"lambda", format_double(lambda)},
        {"cubic", format_double(cubic)},
        {"amplitude", format_double(amplitude)},
        {"forcing", format_double(forcing)},
        {"diffusivity", format_double(diffusivity)},
        {"nx", std::to_string(nx)},
        {"size", std::to_string(size)},
        {"seed", std::to_string(seed)},
        {"fine_points", std::to_string(fine_points)},
        {"period", format_double(period)},
        {"coarsen", std::to_string(coarsen)},
        {"max_levels", std::to_string(max_levels)},
        {"min_coarse", std::to_string(min_coarse)},
        {"relaxation", std::string(to_string(relaxation))},
        {"residual_tol", format_double(residual_tol)},
        {"tol_mode", std::string(to_string(tol_mode))},
        {"max_iterations", std::to_string(max_iterations)},
        {"skip_first_down", bool_text(skip_first_down)},
        {"coarse_operator", std::string(to_string(coarse_operator))},
        {"periodic", bool_text(periodic)},
        {"ic_tolerance", format_double(ic_tolerance)},
        {"strict_fifo", bool_text(strict_fifo)},
        {"mode", mode},
        {"workers", std::to_string(workers)},
        {"repeat", std::to_string(repeat)},
        {"watchdog_ms", std::to_string(watchdog_ms)},
        {"cycles", std::to_string(cycles)},
        {"reference", reference},
        {"bench_workers", counts(bench_workers)},
        {"bench_coarsen", counts(bench_coarsen)},
        {"bench_relaxations", join(rel)},
        {"out", out},
    };
}

void ExperimentConfig::validate() const {
    if (backend != "linear" && backend != "scalar" && backend != "random" && backend != "heat" &&
        backend != "nonlinear") {
        throw ConfigError("unknown backend '" + backend + "'");
    }
    if (backend == "heat" && nx == 0) throw ConfigError("nx must be at least 1");
    if (backend == "random" && size == 0) throw ConfigError("size must be at least 1");
    if (backend == "nonlinear" && (lambda < 0.0 || cubic < 0.0)) {
        throw ConfigError("nonlinear backend needs lambda >= 0 and cubic >= 0");
    }
    if (!(period > 0.0)) throw ConfigError("period must be positive");
    if (repeat == 0) throw ConfigError("repeat must be at least 1");
    if (cycles == 0) throw ConfigError("cycles must be at least 1");
    if (reference != "oracle") {
        if (reference.rfind("cycle:", 0) != 0) throw ConfigError("reference must be oracle or cycle:N");
        if (parse_count("reference", reference.substr(6)) == 0) {
            throw ConfigError("reference cycle count must be at least 1");
        }
    }
    solver().validate();
    periodic_config().validate();
    executor().validate();
    for (auto w : bench_workers) {
        if (w == 0) throw ConfigError("bench_workers entries must be at least 1");
    }
    hierarchy();
}

SolverConfig ExperimentConfig::solver() const {
    SolverConfig s;
    s.relaxation = relaxation;
    s.coarsen = coarsen;
    s.max_levels = max_levels;
    s.min_coarse = min_coarse;
    s.residual_tol = residual_tol;
    s.tol_mode = tol_mode;
    s.max_iterations = max_iterations;
    s.skip_first_down = skip_first_down;
    s.coarse_operator = coarse_operator;
    return s;
}

PeriodicConfig ExperimentConfig::periodic_config() const {
    PeriodicConfig p;
    p.enabled = periodic;
    p.ic_tolerance = ic_tolerance;
    p.strict_fifo = strict_fifo;
    return p;
}

ExecutorConfig ExperimentConfig::executor() const {
    ExecutorConfig e;
    e.workers = workers;
    if (mode == "serial") e.mode = ExecutionMode::serial;
    else if (mode == "threaded") e.mode = ExecutionMode::threaded;
    else e.mode = workers > 1 ? ExecutionMode::threaded : ExecutionMode::serial;
    e.watchdog = std::chrono::milliseconds(watchdog_ms);
    return e;
}

Hierarchy ExperimentConfig::hierarchy() const { return hierarchy(coarsen); }

Hierarchy ExperimentConfig::hierarchy(std::size_t coarsening) const {
    SolverConfig s = solver();
    s.coarsen = coarsening;
    return hierarchy_for(s, fine_points, period);
}

std::unique_ptr<Application> ExperimentConfig::make_app() const {
    if (backend == "linear") return std::make_unique<LinearOdeApp>(LinearOdeApp::default_system(period));
    if (backend == "scalar") return std::make_unique<LinearOdeApp>(LinearOdeApp::scalar(lambda, period, forcing));
    if (backend == "random") return std::make_unique<LinearOdeApp>(LinearOdeApp::random(size, seed, period));
    if (backend == "heat") return std::make_unique<Heat1dApp>(nx, diffusivity, amplitude, period);
    if (backend == "nonlinear") return std::make_unique<NonlinearOdeApp>(lambda, cubic, amplitude, period);
    throw ConfigError("unknown backend '" + backend + "'");
}

std::pair<std::string, std::string> split_assignment(const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
    auto key = trim(assignment.substr(0, eq));
    if (key.empty()) throw ConfigError("empty key in '" + assignment + "'");
    return {key, trim(assignment.substr(eq + 1))};
}

namespace {

void apply_lines(const std::string& text, const std::string& origin,
                 const std::function<void(const std::string&, const std::string&)>& apply) {
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        try {
            auto [key, value] = split_assignment(line);
            apply(key, value);
        } catch (const ConfigError& e) {
            throw ConfigError(origin + ":" + std::to_string(number) + ": " + e.what());
        }
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

void apply_text(ExperimentConfig& config, const std::string& text, const std::string& origin) {
    apply_lines(text, origin, [&](const std::string& k, const std::string& v) { config.set(k, v); });
}

void apply_file(ExperimentConfig& config, const std::filesystem::path& path) {
    apply_text(config, read_file(path), path.string());
}

ExperimentConfig load_meta(const std::filesystem::path& path) {
    ExperimentConfig config;
    apply_lines(read_file(path), path.string(), [&](const std::string& k, const std::string& v) {
        if (k.rfind("result.", 0) != 0) config.set(k, v);
    });
    return config;
}

}  // namespace tpmgrit::cli
