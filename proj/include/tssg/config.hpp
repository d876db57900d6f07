#pragma once

// JSON experiment configuration: loading with field-path and line
// diagnostics, and the fully resolved form used for manifests.

#include "tssg/errors.hpp"
#include "tssg/monte_carlo.hpp"
#include "tssg/seeds.hpp"

#include "json.hpp"

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tssg {

using Json = nlohmann::ordered_json;

/// Configuration problem tied to a field path ("scenario.targets[1].start")
/// and, when known, a 1-based line of the source text (0 otherwise).
class ConfigError : public InvalidArgument {
public:
    ConfigError(std::string field, int line, const std::string& message)
        : InvalidArgument(format(field, line, message)), field_(std::move(field)), line_(line) {}

    [[nodiscard]] const std::string& field() const { return field_; }
    [[nodiscard]] int line() const { return line_; }

private:
    static std::string format(const std::string& field, int line, const std::string& message) {
        std::string out = "config";
        if (!field.empty()) {
            out += " field '" + field + "'";
        }
        if (line > 0) {
            out += " (line " + std::to_string(line) + ")";
        }
        return out + ": " + message;
    }

    std::string field_;
    int line_;
};

namespace detail {

inline std::string join_key(const std::string& parent, std::string_view key) {
    return parent.empty() ? std::string(key) : parent + "." + std::string(key);
}

inline std::string join_index(const std::string& parent, std::size_t i) {
    return parent + "[" + std::to_string(i) + "]";
}

// Maps field paths of well-formed JSON text to the line where each key or
// array element starts.
class KeyLines {
public:
    KeyLines() = default;

    explicit KeyLines(std::string_view text) {
        struct Frame {
            bool array;
            std::string path;
            std::size_t index = 0;
            bool want_key = true;
            std::string key;
        };
        std::vector<Frame> stack;
        int line = 1;
        const auto value_path = [&]() -> std::string {
            if (stack.empty()) {
                return {};
            }
            const Frame& f = stack.back();
            return f.array ? join_index(f.path, f.index) : join_key(f.path, f.key);
        };
        const auto mark_element = [&]() {
            if (!stack.empty() && stack.back().array) {
                lines_.emplace(value_path(), line);
            }
        };
        for (std::size_t i = 0; i < text.size(); ++i) {
            const char c = text[i];
            if (c == '\n') {
                ++line;
            } else if (c == '"') {
                std::string s;
                for (++i; i < text.size() && text[i] != '"'; ++i) {
                    if (text[i] == '\\' && i + 1 < text.size()) {
                        ++i;
                    }
                    s += text[i];
                }
                if (!stack.empty() && !stack.back().array && stack.back().want_key) {
                    stack.back().key = s;
                    stack.back().want_key = false;
                    lines_.emplace(value_path(), line);
                } else {
                    mark_element();
                }
            } else if (c == ',') {
                if (!stack.empty()) {
                    if (stack.back().array) {
                        ++stack.back().index;
                    } else {
                        stack.back().want_key = true;
                    }
                }
            } else if (c == '{' || c == '[') {
                mark_element();
                stack.push_back(Frame{c == '[', value_path()});
            } else if (c == '}' || c == ']') {
                if (!stack.empty()) {
                    stack.pop_back();
                }
            } else if (c != ':' && c != ' ' && c != '\t' && c != '\r') {
                mark_element();
                while (i + 1 < text.size() && std::string_view(",}] \t\r\n").find(text[i + 1]) ==
                                                  std::string_view::npos) {
                    ++i;
                }
            }
        }
    }

    /// Line of `path`, or of its closest recorded ancestor.
    [[nodiscard]] int line_of(std::string path) const {
        while (true) {
            if (const auto it = lines_.find(path); it != lines_.end()) {
                return it->second;
            }
            const auto cut = path.find_last_of(".[");
            if (cut == std::string::npos) {
                return 0;
            }
            path.resize(cut);
        }
    }

private:
    std::map<std::string, int> lines_;
};

// A JSON value together with its field path, for typed reads that fail
// with located diagnostics.
class Node {
public:
    Node(const Json& j, std::string path, const KeyLines& lines)
        : j_(&j), path_(std::move(path)), lines_(&lines) {}

    [[noreturn]] void fail(const std::string& message) const {
        throw ConfigError(path_, lines_->line_of(path_), message);
    }

    [[nodiscard]] const std::string& path() const { return path_; }
    [[nodiscard]] const Json& json() const { return *j_; }

    [[nodiscard]] bool has(std::string_view key) const {
        return j_->is_object() && j_->contains(key);
    }

    [[nodiscard]] Node at(std::string_view key) const {
        if (!j_->is_object()) {
            fail("expected an object");
        }
        const auto it = j_->find(key);
        if (it == j_->end()) {
            throw ConfigError(join_key(path_, key), lines_->line_of(path_),
                              "required field is missing");
        }
        return {*it, join_key(path_, key), *lines_};
    }

    [[nodiscard]] std::optional<Node> get(std::string_view key) const {
        if (!j_->is_object()) {
            fail("expected an object");
        }
        const auto it = j_->find(key);
        if (it == j_->end() || it->is_null()) {
            return std::nullopt;
        }
        return Node(*it, join_key(path_, key), *lines_);
    }

    /// Rejects keys outside `keys`, which catches misspelled options.
    void allow(std::initializer_list<std::string_view> keys) const {
        if (!j_->is_object()) {
            fail("expected an object");
        }
        for (const auto& item : j_->items()) {
            bool known = false;
            for (const auto k : keys) {
                known = known || item.key() == k;
            }
            if (!known) {
                Node(item.value(), join_key(path_, item.key()), *lines_).fail("unknown field");
            }
        }
    }

    [[nodiscard]] std::size_t size() const {
        if (!j_->is_array()) {
            fail("expected an array");
        }
        return j_->size();
    }

    [[nodiscard]] Node operator[](std::size_t i) const {
        return {(*j_)[i], join_index(path_, i), *lines_};
    }

    [[nodiscard]] double number() const {
        if (!j_->is_number()) {
            fail("expected a number");
        }
        return j_->get<double>();
    }

    [[nodiscard]] int integer() const {
        if (!j_->is_number_integer()) {
            fail("expected an integer");
        }
        const auto v = j_->get<std::int64_t>();
        if (v < INT32_MIN || v > INT32_MAX) {
            fail("integer out of range");
        }
        return static_cast<int>(v);
    }

    [[nodiscard]] std::uint64_t unsigned_integer() const {
        if (!j_->is_number_unsigned()) {
            fail("expected a non-negative integer");
        }
        return j_->get<std::uint64_t>();
    }

    [[nodiscard]] bool boolean() const {
        if (!j_->is_boolean()) {
            fail("expected true or false");
        }
        return j_->get<bool>();
    }

    [[nodiscard]] std::string string() const {
        if (!j_->is_string()) {
            fail("expected a string");
        }
        return j_->get<std::string>();
    }

    [[nodiscard]] Vec2 point() const {
        if (size() != 2) {
            fail("expected a point [x, y]");
        }
        return {(*this)[0].number(), (*this)[1].number()};
    }

    template <class E>
    [[nodiscard]] E choice(std::initializer_list<std::pair<std::string_view, E>> options) const {
        const std::string s = string();
        std::string names;
        for (const auto& [name, value] : options) {
            if (s == name) {
                return value;
            }
            names += (names.empty() ? "" : ", ") + std::string(name);
        }
        fail("unknown value '" + s + "' (expected one of: " + names + ")");
    }

private:
    const Json* j_;
    std::string path_;
    const KeyLines* lines_;
};

inline void read_number(const Node& n, std::string_view key, double& out) {
    if (auto v = n.get(key)) {
        out = v->number();
    }
}

inline void read_int(const Node& n, std::string_view key, int& out) {
    if (auto v = n.get(key)) {
        out = v->integer();
    }
}

inline void read_bool(const Node& n, std::string_view key, bool& out) {
    if (auto v = n.get(key)) {
        out = v->boolean();
    }
}

// Re-raises a validate() failure against the section it came from.
template <class F>
void validated(const Node& n, F&& check) {
    try {
        check();
    } catch (const ConfigError&) {
        throw;
    } catch (const InvalidArgument& e) {
        n.fail(e.what());
    }
}

inline MovementKernel parse_kernel(const Node& n) {
    if (n.json().is_string()) {
        return n.choice<MovementKernel>({{"north_east", MovementKernel::north_east()},
                                         {"identity", MovementKernel::identity()}});
    }
    MovementKernel k;
    for (std::size_t i = 0; i < n.size(); ++i) {
        const Node e = n[i];
        e.allow({"d_row", "d_col", "probability"});
        k.entries.push_back({e.at("d_row").integer(), e.at("d_col").integer(),
                             e.at("probability").number()});
    }
    validated(n, [&] { k.validate(); });
    return k;
}

inline ScenarioConfig parse_scenario(const Node& n) {
    n.allow({"region", "grid", "sensors", "propagation", "kernel", "targets", "noise_var",
             "process_noise", "duration", "sampling_time"});
    ScenarioConfig c;
    if (auto r = n.get("region")) {
        r->allow({"width", "height"});
        read_number(*r, "width", c.region_width);
        read_number(*r, "height", c.region_height);
    }
    const Node grid = n.at("grid");
    grid.allow({"nx", "ny"});
    c.nx = grid.at("nx").integer();
    c.ny = grid.at("ny").integer();
    const Node sensors = n.at("sensors");
    sensors.allow({"count", "positions"});
    if (auto pos = sensors.get("positions")) {
        for (std::size_t i = 0; i < pos->size(); ++i) {
            c.sensor_positions.push_back((*pos)[i].point());
        }
        c.sensor_count = static_cast<int>(c.sensor_positions.size());
        if (auto cnt = sensors.get("count"); cnt && cnt->integer() != c.sensor_count) {
            cnt->fail("does not match the number of listed positions");
        }
    } else {
        c.sensor_count = sensors.at("count").integer();
    }
    if (auto p = n.get("propagation")) {
        p->allow({"d_half"});
        read_number(*p, "d_half", c.d_half);
    }
    if (auto k = n.get("kernel")) {
        c.kernel = parse_kernel(*k);
    }
    const Node targets = n.at("targets");
    for (std::size_t i = 0; i < targets.size(); ++i) {
        const Node t = targets[i];
        t.allow({"start", "strength", "birth", "death"});
        TargetSpec s;
        s.start = t.at("start").point();
        read_number(t, "strength", s.strength);
        read_int(t, "birth", s.birth);
        if (auto d = t.get("death")) {
            s.death = d->integer();
        }
        c.targets.push_back(s);
    }
    read_number(n, "noise_var", c.noise_var);
    read_number(n, "process_noise", c.process_noise);
    c.duration = n.at("duration").integer();
    read_number(n, "sampling_time", c.sampling_time);
    return c;
}

inline SolverOptions parse_solver(const Node& n) {
    n.allow({"mode", "step", "max_iters", "tolerance", "diagonal_step"});
    SolverOptions s;
    if (auto m = n.get("mode")) {
        s.mode = m->choice<GpMode>({{"jacobi", GpMode::Jacobi}, {"gauss_seidel", GpMode::GaussSeidel}});
    }
    if (auto st = n.get("step")) {
        s.step = st->number();
    }
    read_int(n, "max_iters", s.max_iters);
    read_number(n, "tolerance", s.tolerance);
    read_bool(n, "diagonal_step", s.diagonal_step);
    validated(n, [&] { s.validate(); });
    return s;
}

inline TrackerSpec parse_tracker(const Node& n, std::optional<double>& model_noise_var) {
    n.allow({"kind", "alpha", "covariance", "iekf", "hmm", "solver", "init_beta", "noise_var"});
    TrackerSpec t;
    t.kind = n.at("kind").choice<TrackerKind>({{"agnostic", TrackerKind::Agnostic},
                                               {"sparse_kf", TrackerKind::SparseKF},
                                               {"iekf", TrackerKind::IEKF},
                                               {"hmm", TrackerKind::HMM}});
    read_number(n, "alpha", t.alpha);
    if (auto c = n.get("covariance")) {
        t.covariance = c->choice<CovarianceMode>(
            {{"standard", CovarianceMode::Standard}, {"enhanced", CovarianceMode::Enhanced}});
    }
    if (auto i = n.get("iekf")) {
        i->allow({"rho", "mu", "sigma", "delta", "sigma_p", "iterations", "projected", "metric",
                  "early_exit"});
        if (auto r = i->get("rho")) {
            t.sparsity.kind = r->choice<RhoKind>({{"l1", RhoKind::L1},
                                                  {"logarithm", RhoKind::Logarithm},
                                                  {"inverse_gaussian", RhoKind::InverseGaussian}});
        }
        read_number(*i, "mu", t.sparsity.mu);
        read_number(*i, "sigma", t.sparsity.sigma);
        read_number(*i, "delta", t.sparsity.delta);
        read_number(*i, "sigma_p", t.sparsity.sigma_p);
        read_int(*i, "iterations", t.iekf_iterations);
        read_bool(*i, "projected", t.projected);
        if (auto m = i->get("metric")) {
            t.iekf.metric = m->choice<ProjectionMetric>(
                {{"hessian", ProjectionMetric::Hessian}, {"covariance", ProjectionMetric::Covariance}});
        }
        read_number(*i, "early_exit", t.iekf.early_exit);
    }
    if (auto h = n.get("hmm")) {
        h->allow({"strength", "estimate"});
        read_number(*h, "strength", t.hmm_strength);
        if (auto e = h->get("estimate")) {
            t.hmm_map = e->choice<bool>({{"mmse", false}, {"map", true}});
        }
    }
    if (auto s = n.get("solver")) {
        t.solver = parse_solver(*s);
    }
    read_number(n, "init_beta", t.init_beta);
    if (auto v = n.get("noise_var")) {
        model_noise_var = v->number();
    }
    return t;
}

inline PipelineOptions parse_pipeline(const Node& n) {
    n.allow({"count_mode", "eps_frac", "restarts", "k_max", "gate", "pregate", "jitter",
             "associate", "weighted_clustering"});
    PipelineOptions p;
    if (auto c = n.get("count_mode")) {
        p.count_mode = c->choice<CountMode>({{"known", CountMode::Known}, {"unknown", CountMode::Unknown}});
    }
    read_number(n, "eps_frac", p.eps_frac);
    read_int(n, "restarts", p.restarts);
    read_int(n, "k_max", p.k_max);
    read_number(n, "gate", p.gate);
    read_bool(n, "pregate", p.pregate);
    read_number(n, "jitter", p.jitter);
    read_bool(n, "associate", p.associate);
    read_bool(n, "weighted_clustering", p.weighted_clustering);
    validated(n, [&] { p.validate(); });
    return p;
}

inline int line_at_byte(std::string_view text, std::size_t byte) {
    int line = 1;
    for (std::size_t i = 0; i < text.size() && i + 1 < byte; ++i) {
        line += text[i] == '\n' ? 1 : 0;
    }
    return line;
}

}  // namespace detail

/// Parses an experiment configuration from JSON text. Required fields:
/// seed, scenario.{grid, sensors, targets, duration} and tracker.kind;
/// everything else falls back to the documented defaults.
inline ExperimentSpec parse_config(std::string_view text) {
    Json root;
    try {
        root = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw ConfigError("", detail::line_at_byte(text, e.byte), "malformed JSON");
    }
    const detail::KeyLines lines(text);
    const detail::Node top(root, "", lines);
    top.allow({"scenario", "tracker", "pipeline", "monte_carlo", "seed"});
    ExperimentSpec spec;
    const detail::Node scenario = top.at("scenario");
    spec.scenario = detail::parse_scenario(scenario);
    spec.scenario.master_seed = top.at("seed").unsigned_integer();
    if (auto mc = top.get("monte_carlo")) {
        mc->allow({"runs", "mode", "threads"});
        detail::read_int(*mc, "runs", spec.scenario.runs);
        if (auto m = mc->get("mode")) {
            spec.scenario.mc_mode = m->choice<MonteCarloMode>(
                {{"noise_only", MonteCarloMode::NoiseOnly}, {"full", MonteCarloMode::Full}});
        }
        detail::read_int(*mc, "threads", spec.threads);
        if (spec.threads < 0) {
            mc->at("threads").fail("must be non-negative");
        }
    }
    detail::validated(scenario, [&] { spec.scenario.validate(); });
    const detail::Node tracker = top.at("tracker");
    spec.tracker = detail::parse_tracker(tracker, spec.model_noise_var);
    detail::validated(tracker, [&] { spec.tracker.validate(); });
    if (spec.model_noise_var && !(*spec.model_noise_var > 0.0)) {
        tracker.at("noise_var").fail("must be positive");
    }
    if (auto p = top.get("pipeline")) {
        spec.pipeline = detail::parse_pipeline(*p);
    }
    return spec;
}

inline ExperimentSpec load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ConfigError("", 0, "cannot read '" + path + "'");
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

/// Every setting of `spec` with defaults filled in; parse_config accepts
/// this form and reproduces the same spec.
inline Json resolved_config(const ExperimentSpec& spec) {
    const ScenarioConfig& s = spec.scenario;
    Json scenario;
    scenario["region"] = {{"width", s.region_width}, {"height", s.region_height}};
    scenario["grid"] = {{"nx", s.nx}, {"ny", s.ny}};
    if (s.sensor_positions.empty()) {
        scenario["sensors"] = {{"count", s.sensor_count}};
    } else {
        Json pos = Json::array();
        for (const auto& p : s.sensor_positions) {
            pos.push_back({p.x(), p.y()});
        }
        scenario["sensors"] = {{"positions", pos}};
    }
    scenario["propagation"] = {{"d_half", s.d_half}};
    Json kernel = Json::array();
    for (const auto& e : s.kernel.entries) {
        kernel.push_back({{"d_row", e.d_row}, {"d_col", e.d_col}, {"probability", e.probability}});
    }
    scenario["kernel"] = kernel;
    Json targets = Json::array();
    for (const auto& t : s.targets) {
        Json j = {{"start", {t.start.x(), t.start.y()}}, {"strength", t.strength}, {"birth", t.birth}};
        j["death"] = t.death ? Json(*t.death) : Json(nullptr);
        targets.push_back(j);
    }
    scenario["targets"] = targets;
    scenario["noise_var"] = s.noise_var;
    scenario["process_noise"] = s.process_noise;
    scenario["duration"] = s.duration;
    scenario["sampling_time"] = s.sampling_time;

    const TrackerSpec& t = spec.tracker;
    const auto solver_json = [](const SolverOptions& o) {
        Json j;
        j["mode"] = o.mode == GpMode::Jacobi ? "jacobi" : "gauss_seidel";
        j["step"] = o.step ? Json(*o.step) : Json(nullptr);
        j["max_iters"] = o.max_iters;
        j["tolerance"] = o.tolerance;
        j["diagonal_step"] = o.diagonal_step;
        return j;
    };
    const char* rho_name = t.sparsity.kind == RhoKind::L1          ? "l1"
                           : t.sparsity.kind == RhoKind::Logarithm ? "logarithm"
                                                                   : "inverse_gaussian";
    Json tracker;
    tracker["kind"] = std::string(to_string(t.kind));
    tracker["alpha"] = t.alpha;
    tracker["covariance"] = t.covariance == CovarianceMode::Standard ? "standard" : "enhanced";
    tracker["iekf"] = {{"rho", rho_name},
                       {"mu", t.sparsity.mu},
                       {"sigma", t.sparsity.sigma},
                       {"delta", t.sparsity.delta},
                       {"sigma_p", t.sparsity.sigma_p},
                       {"iterations", t.iekf_iterations},
                       {"projected", t.projected},
                       {"metric", t.iekf.metric == ProjectionMetric::Hessian ? "hessian" : "covariance"},
                       {"early_exit", t.iekf.early_exit}};
    tracker["hmm"] = {{"strength", t.hmm_strength}, {"estimate", t.hmm_map ? "map" : "mmse"}};
    tracker["solver"] = solver_json(t.solver);
    tracker["init_beta"] = t.init_beta;
    tracker["noise_var"] = spec.tracker_noise_var();

    const PipelineOptions& p = spec.pipeline;
    Json pipeline;
    pipeline["count_mode"] = p.count_mode == CountMode::Known ? "known" : "unknown";
    pipeline["eps_frac"] = p.eps_frac;
    pipeline["restarts"] = p.restarts;
    pipeline["k_max"] = p.k_max;
    pipeline["gate"] = p.gate;
    pipeline["pregate"] = p.pregate;
    pipeline["jitter"] = p.jitter;
    pipeline["associate"] = p.associate;
    pipeline["weighted_clustering"] = p.weighted_clustering;

    Json out;
    out["scenario"] = scenario;
    out["tracker"] = tracker;
    out["pipeline"] = pipeline;
    out["monte_carlo"] = {{"runs", s.runs},
                          {"mode", s.mc_mode == MonteCarloMode::NoiseOnly ? "noise_only" : "full"},
                          {"threads", spec.threads}};
    out["seed"] = s.master_seed;
    return out;
}

/// FNV-1a of the compact resolved configuration (followed by `extra`, e.g.
/// sweep settings), as 16 hex digits. Worker thread count is left out since
/// it never changes results.
inline std::string manifest_hash(const ExperimentSpec& spec, std::string_view extra = {}) {
    Json j = resolved_config(spec);
    j["monte_carlo"].erase("threads");
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(j.dump() + std::string(extra))));
    return buf;
}

}  // namespace tssg
