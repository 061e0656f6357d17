#ifndef DWGCS_BENCH_HPP
#define DWGCS_BENCH_HPP

#include "dwgcs/baselines.hpp"
#include "dwgcs/core.hpp"
#include "dwgcs/datagen.hpp"
#include "dwgcs/kernel.hpp"
#include "dwgcs/mrc.hpp"
#include "dwgcs/weights.hpp"

#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <locale>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace dwgcs::bench {

inline constexpr const char* kVersion = "0.1.0";

class ConfigError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

enum class Method { NoAdapt, Reweighted, Robust, FlatteningPower, FlatteningMixture, Kmm, DwgcsZeroOne, DwgcsLog };

inline const std::vector<std::pair<Method, std::string>>& method_names()
{
    static const std::vector<std::pair<Method, std::string>> names = {
        {Method::NoAdapt, "no-adapt"},
        {Method::Reweighted, "reweighted"},
        {Method::Robust, "robust"},
        {Method::FlatteningPower, "flattening-power"},
        {Method::FlatteningMixture, "flattening-mixture"},
        {Method::Kmm, "kmm"},
        {Method::DwgcsZeroOne, "dwgcs-01"},
        {Method::DwgcsLog, "dwgcs-log"},
    };
    return names;
}

inline std::string to_string(Method m)
{
    for (const auto& [k, v] : method_names())
        if (k == m)
            return v;
    return "?";
}

inline Method method_from_string(const std::string& s)
{
    for (const auto& [k, v] : method_names())
        if (v == s)
            return k;
    throw ConfigError("unknown method '" + s + "'");
}

inline bool is_dwgcs(Method m) { return m == Method::DwgcsZeroOne || m == Method::DwgcsLog; }

// ---------------------------------------------------------------------------
// Configuration

struct ScenarioSpec {
    enum class Kind { Synthetic, Biased };
    std::string id;
    Kind kind = Kind::Synthetic;
    // synthetic
    double delta = 0.05;
    std::optional<double> train_weight1;
    std::optional<double> test_weight1;
    // biased sampling
    std::string csv;
    std::string label_column = "label";
    SplitAxis axis = SplitAxis::Pca1;
    int feature = 0;
    double delta_tr = 0.7;
    double delta_te = 0.3;
    std::optional<int> n;
    std::optional<int> t;
};

enum class DwgcsWeights { Auto, Exact, DwKmm };

struct RunConfig {
    std::vector<ScenarioSpec> scenarios;
    std::vector<Method> methods;
    int repetitions = 100;
    std::uint64_t seed = 0;
    std::optional<int> n;
    std::optional<int> t;
    std::vector<double> d_grid = default_d_grid();
    /// Empty means quadratic for synthetic scenarios and identity otherwise.
    std::optional<FeatureKind> features;
    int max_iter = 10000;
    double gamma = 0.5;
    double lr_l2 = 1e-3;
    double ratio_cap = 1000.0;
    double kmm_B = 1000.0;
    std::optional<double> sigma;
    int knn = 50;
    DwgcsWeights dwgcs_weights = DwgcsWeights::Auto;
    std::string output = "results";
    // bound verification
    bool bounds = false;
    std::size_t mc_draws = 100000;
    bool inflate_lambda = true;
    double bound_delta = 0.1;
    bool smallest_risk = false;
    int smallest_risk_iter = 2000;

    void validate() const
    {
        if (repetitions < 1)
            throw ConfigError("repetitions must be >= 1");
        if (methods.empty())
            throw ConfigError("methods must be nonempty");
        if (scenarios.empty())
            throw ConfigError("no scenarios configured");
        if (d_grid.empty() || *std::min_element(d_grid.begin(), d_grid.end()) < 1.0)
            throw ConfigError("d_grid values must be >= 1");
        if (max_iter < 1)
            throw ConfigError("max_iter must be positive");
        if (!(gamma >= 0.0 && gamma <= 1.0))
            throw ConfigError("gamma must lie in [0, 1]");
        if (mc_draws < 2)
            throw ConfigError("mc_draws must be >= 2");
        std::vector<std::string> ids;
        for (const auto& s : scenarios) {
            if (std::find(ids.begin(), ids.end(), s.id) != ids.end())
                throw ConfigError("duplicate scenario '" + s.id + "'");
            ids.push_back(s.id);
        }
        for (std::size_t i = 0; i < methods.size(); ++i)
            for (std::size_t j = i + 1; j < methods.size(); ++j)
                if (methods[i] == methods[j])
                    throw ConfigError("duplicate method '" + to_string(methods[i]) + "'");
    }
};

namespace detail {

    struct ConfigValue {
        std::vector<std::string> items;
        bool list = false;
        int line = 0;
    };

    using Section = std::map<std::string, ConfigValue>;

    inline std::string strip(const std::string& s)
    {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos)
            return {};
        return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
    }

    inline std::string unquote(const std::string& s, int line)
    {
        if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'')) {
            if (s.back() != s.front())
                throw ConfigError("line " + std::to_string(line) + ": unterminated string");
            return s.substr(1, s.size() - 2);
        }
        return s;
    }

    inline std::string drop_comment(const std::string& line)
    {
        char quote = 0;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quote) {
                if (c == quote)
                    quote = 0;
            } else if (c == '"' || c == '\'') {
                quote = c;
            } else if (c == '#') {
                return line.substr(0, i);
            }
        }
        return line;
    }

    inline ConfigValue parse_value(const std::string& raw, int line)
    {
        ConfigValue v;
        v.line = line;
        std::string s = strip(raw);
        if (s.empty())
            throw ConfigError("line " + std::to_string(line) + ": missing value");
        if (s.front() == '[') {
            if (s.back() != ']')
                throw ConfigError("line " + std::to_string(line) + ": unterminated list");
            v.list = true;
            s = s.substr(1, s.size() - 2);
        }
        if (v.list || s.find(',') != std::string::npos) {
            v.list = true;
            std::stringstream ss(s);
            std::string item;
            while (std::getline(ss, item, ',')) {
                item = strip(item);
                if (!item.empty())
                    v.items.push_back(unquote(item, line));
            }
        } else {
            v.items.push_back(unquote(s, line));
        }
        return v;
    }

    /// Flat sections of key = value lines. Returns sections in file order.
    inline std::vector<std::pair<std::string, Section>> parse_sections(const std::string& text)
    {
        std::vector<std::pair<std::string, Section>> out;
        out.emplace_back("", Section{});
        std::istringstream in(text);
        std::string line;
        int number = 0;
        while (std::getline(in, line)) {
            ++number;
            line = strip(drop_comment(line));
            if (line.empty())
                continue;
            if (line.front() == '[') {
                if (line.back() != ']')
                    throw ConfigError("line " + std::to_string(number) + ": malformed section header");
                const std::string name = strip(line.substr(1, line.size() - 2));
                if (name.empty())
                    throw ConfigError("line " + std::to_string(number) + ": empty section name");
                for (const auto& [existing, _] : out)
                    if (existing == name)
                        throw ConfigError("line " + std::to_string(number) + ": duplicate section [" + name + "]");
                out.emplace_back(name, Section{});
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos)
                throw ConfigError("line " + std::to_string(number) + ": expected key = value");
            const std::string key = strip(line.substr(0, eq));
            if (key.empty())
                throw ConfigError("line " + std::to_string(number) + ": empty key");
            auto& section = out.back().second;
            if (section.count(key))
                throw ConfigError("line " + std::to_string(number) + ": duplicate key '" + key + "'");
            section[key] = parse_value(line.substr(eq + 1), number);
        }
        return out;
    }

    class SectionReader {
    public:
        SectionReader(std::string name, Section section) : name_(std::move(name)), section_(std::move(section)) {}

        bool has(const std::string& key) const { return section_.count(key) > 0; }

        std::string str(const std::string& key) const { return scalar(key); }

        double real(const std::string& key) const
        {
            return to_real(scalar(key), key, section_.at(key).line);
        }

        long long integer(const std::string& key) const
        {
            const std::string s = scalar(key);
            std::size_t used = 0;
            long long v = 0;
            try {
                v = std::stoll(s, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != s.size() || s.empty())
                throw error(key, "expected an integer, found '" + s + "'");
            return v;
        }

        bool boolean(const std::string& key) const
        {
            const std::string s = scalar(key);
            if (s == "true")
                return true;
            if (s == "false")
                return false;
            throw error(key, "expected true or false, found '" + s + "'");
        }

        std::vector<std::string> strings(const std::string& key) const
        {
            used_.push_back(key);
            return section_.at(key).items;
        }

        std::vector<double> reals(const std::string& key) const
        {
            std::vector<double> out;
            for (const auto& s : strings(key))
                out.push_back(to_real(s, key, section_.at(key).line));
            return out;
        }

        void reject_unknown() const
        {
            for (const auto& [key, value] : section_)
                if (std::find(used_.begin(), used_.end(), key) == used_.end())
                    throw ConfigError("line " + std::to_string(value.line) + ": unknown key '" + key + "' in " +
                                      (name_.empty() ? std::string("top level") : "[" + name_ + "]"));
        }

        ConfigError error(const std::string& key, const std::string& what) const
        {
            return ConfigError("line " + std::to_string(section_.at(key).line) + ": " + key + ": " + what);
        }

    private:
        std::string scalar(const std::string& key) const
        {
            used_.push_back(key);
            const auto& v = section_.at(key);
            if (v.list || v.items.size() != 1)
                throw error(key, "expected a single value");
            return v.items.front();
        }

        double to_real(const std::string& s, const std::string& key, int) const
        {
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(s, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (used != s.size() || s.empty() || !std::isfinite(v))
                throw error(key, "expected a number, found '" + s + "'");
            return v;
        }

        std::string name_;
        Section section_;
        mutable std::vector<std::string> used_;
    };

    inline FeatureKind feature_kind(const std::string& s)
    {
        if (s == "quadratic")
            return FeatureKind::QuadraticOneHot;
        if (s == "identity" || s == "linear")
            return FeatureKind::IdentityOneHot;
        throw ConfigError("features: expected quadratic or identity, found '" + s + "'");
    }

    inline void read_run_keys(const SectionReader& r, RunConfig& cfg)
    {
        if (r.has("seed"))
            cfg.seed = static_cast<std::uint64_t>(r.integer("seed"));
        if (r.has("repetitions"))
            cfg.repetitions = static_cast<int>(r.integer("repetitions"));
        if (r.has("methods")) {
            cfg.methods.clear();
            for (const auto& m : r.strings("methods"))
                cfg.methods.push_back(method_from_string(m));
        }
        if (r.has("n"))
            cfg.n = static_cast<int>(r.integer("n"));
        if (r.has("t"))
            cfg.t = static_cast<int>(r.integer("t"));
        if (r.has("d_grid")) {
            const auto items = r.strings("d_grid");
            if (items.size() == 1 && items.front() == "default")
                cfg.d_grid = default_d_grid();
            else
                cfg.d_grid = r.reals("d_grid");
        }
        if (r.has("features")) {
            const auto f = r.str("features");
            cfg.features = f == "auto" ? std::nullopt : std::optional<FeatureKind>(feature_kind(f));
        }
        if (r.has("max_iter"))
            cfg.max_iter = static_cast<int>(r.integer("max_iter"));
        if (r.has("gamma"))
            cfg.gamma = r.real("gamma");
        if (r.has("lr_l2"))
            cfg.lr_l2 = r.real("lr_l2");
        if (r.has("ratio_cap"))
            cfg.ratio_cap = r.real("ratio_cap");
        if (r.has("kmm_B"))
            cfg.kmm_B = r.real("kmm_B");
        if (r.has("sigma")) {
            const auto s = r.str("sigma");
            cfg.sigma = s == "heuristic" ? std::nullopt : std::optional<double>(r.real("sigma"));
        }
        if (r.has("knn"))
            cfg.knn = static_cast<int>(r.integer("knn"));
        if (r.has("dwgcs_weights")) {
            const auto s = r.str("dwgcs_weights");
            if (s == "auto")
                cfg.dwgcs_weights = DwgcsWeights::Auto;
            else if (s == "exact")
                cfg.dwgcs_weights = DwgcsWeights::Exact;
            else if (s == "dw-kmm")
                cfg.dwgcs_weights = DwgcsWeights::DwKmm;
            else
                throw r.error("dwgcs_weights", "expected auto, exact or dw-kmm");
        }
        if (r.has("output"))
            cfg.output = r.str("output");
        if (r.has("bounds"))
            cfg.bounds = r.boolean("bounds");
        if (r.has("mc_draws"))
            cfg.mc_draws = static_cast<std::size_t>(r.integer("mc_draws"));
        if (r.has("inflate_lambda"))
            cfg.inflate_lambda = r.boolean("inflate_lambda");
        if (r.has("bound_delta"))
            cfg.bound_delta = r.real("bound_delta");
        if (r.has("smallest_risk"))
            cfg.smallest_risk = r.boolean("smallest_risk");
        if (r.has("smallest_risk_iter"))
            cfg.smallest_risk_iter = static_cast<int>(r.integer("smallest_risk_iter"));
    }

    inline ScenarioSpec read_scenario(const std::string& id, const SectionReader& r, const std::filesystem::path& base)
    {
        ScenarioSpec s;
        s.id = id;
        if (!r.has("type"))
            throw ConfigError("[scenario." + id + "]: missing type");
        const auto type = r.str("type");
        if (type == "synthetic") {
            s.kind = ScenarioSpec::Kind::Synthetic;
            if (r.has("delta"))
                s.delta = r.real("delta");
            if (r.has("train_weight1"))
                s.train_weight1 = r.real("train_weight1");
            if (r.has("test_weight1"))
                s.test_weight1 = r.real("test_weight1");
        } else if (type == "biased") {
            s.kind = ScenarioSpec::Kind::Biased;
            if (!r.has("csv"))
                throw ConfigError("[scenario." + id + "]: missing csv");
            const std::filesystem::path p = r.str("csv");
            s.csv = (p.is_absolute() ? p : base / p).lexically_normal().string();
            if (r.has("label"))
                s.label_column = r.str("label");
            if (r.has("axis")) {
                const auto a = r.str("axis");
                if (a == "pca")
                    s.axis = SplitAxis::Pca1;
                else if (a == "feature")
                    s.axis = SplitAxis::Feature;
                else
                    throw r.error("axis", "expected pca or feature");
            }
            if (r.has("feature"))
                s.feature = static_cast<int>(r.integer("feature"));
            if (r.has("delta_tr"))
                s.delta_tr = r.real("delta_tr");
            if (r.has("delta_te"))
                s.delta_te = r.real("delta_te");
        } else {
            throw r.error("type", "expected synthetic or biased");
        }
        if (r.has("n"))
            s.n = static_cast<int>(r.integer("n"));
        if (r.has("t"))
            s.t = static_cast<int>(r.integer("t"));
        r.reject_unknown();
        return s;
    }

} // namespace detail

/// Parses the TOML-like run configuration. Top-level keys (or a [run]
/// section) set run options; each [scenario.<id>] section adds a scenario.
/// Relative csv paths resolve against `base_dir`.
inline RunConfig parse_config(const std::string& text, const std::filesystem::path& base_dir = ".")
{
    RunConfig cfg;
    cfg.methods = {Method::NoAdapt, Method::DwgcsZeroOne};
    for (auto& [name, section] : detail::parse_sections(text)) {
        detail::SectionReader r(name, section);
        if (name.empty() || name == "run") {
            detail::read_run_keys(r, cfg);
            r.reject_unknown();
        } else if (name.rfind("scenario.", 0) == 0 && name.size() > 9) {
            cfg.scenarios.push_back(detail::read_scenario(name.substr(9), r, base_dir));
        } else {
            throw ConfigError("unknown section [" + name + "]");
        }
    }
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str(), std::filesystem::path(path).parent_path());
}

// ---------------------------------------------------------------------------
// Scenario generation

inline std::uint64_t fnv1a(const std::string& s)
{
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

/// seed XOR repetition index.
inline std::uint64_t repetition_seed(std::uint64_t seed, int rep) { return seed ^ static_cast<std::uint64_t>(rep); }

/// Data seed of one scenario in one repetition; every method sees the same data.
inline std::uint64_t data_seed(std::uint64_t seed, const std::string& scenario, int rep)
{
    return derive_seed(repetition_seed(seed, rep), fnv1a(scenario));
}

/// Loaded pools and resolved sizes, shared read-only by all workers.
struct PreparedScenario {
    ScenarioSpec spec;
    std::vector<LabeledSample> pool;
    int n_classes = 2;
    int n = 100;
    int t = 100;
};

inline PreparedScenario prepare(const ScenarioSpec& spec, const RunConfig& cfg)
{
    PreparedScenario p;
    p.spec = spec;
    if (spec.kind == ScenarioSpec::Kind::Synthetic) {
        p.n = spec.n.value_or(cfg.n.value_or(100));
        p.t = spec.t.value_or(cfg.t.value_or(100));
        return p;
    }
    if (!std::filesystem::exists(spec.csv))
        throw ConfigError("scenario " + spec.id + ": file not found: " + spec.csv);
    const auto data = load_csv(spec.csv, spec.label_column);
    p.pool = normalize(data.samples).samples;
    p.n_classes = data.n_classes;
    const int fallback = std::min(300, static_cast<int>(p.pool.size()) / 3);
    p.n = spec.n.value_or(cfg.n.value_or(fallback));
    p.t = spec.t.value_or(cfg.t.value_or(fallback));
    if (spec.axis == SplitAxis::Feature && (spec.feature < 0 || spec.feature >= p.pool.front().x.size()))
        throw ConfigError("scenario " + spec.id + ": feature index out of range");
    return p;
}

inline SyntheticConfig synthetic_config(const PreparedScenario& p, std::uint64_t seed)
{
    SyntheticConfig c;
    c.delta = p.spec.delta;
    c.train_weight1 = p.spec.train_weight1;
    c.test_weight1 = p.spec.test_weight1;
    c.n = p.n;
    c.t = p.t;
    c.seed = seed;
    return c;
}

inline ShiftScenario generate(const PreparedScenario& p, std::uint64_t seed)
{
    if (p.spec.kind == ScenarioSpec::Kind::Synthetic)
        return gen_synthetic(synthetic_config(p, seed));
    BiasedSamplingConfig c;
    c.axis = p.spec.axis;
    c.feature = p.spec.feature;
    c.delta_tr = p.spec.delta_tr;
    c.delta_te = p.spec.delta_te;
    c.n = p.n;
    c.t = p.t;
    c.seed = seed;
    return biased_split(p.pool, c, p.n_classes);
}

// ---------------------------------------------------------------------------
// Methods

struct GridPoint {
    double D = 1.0;
    double minimax_risk = 0.0;
    double error = 0.0;
};

struct MethodOutcome {
    double error = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> minimax_risk;
    std::optional<double> D;
    std::vector<GridPoint> grid;
    std::optional<MrcModel> model;
    /// alpha(x) of the selected weights, when the marginals are known.
    Density alpha_fn;
};

struct MethodContext {
    const RunConfig& cfg;
    const ShiftScenario& scenario;
    FeatureMap map;
    std::vector<Vector> train_x;
    /// Known or estimated marginals (estimated: logistic discriminator ratio).
    MarginalModel marginals;
    bool exact_marginals = false;
    std::uint64_t seed = 0;
    /// Lazily computed kernel bandwidth.
    mutable std::optional<double> sigma;

    double kernel_sigma() const
    {
        if (cfg.sigma)
            return *cfg.sigma;
        if (!sigma)
            sigma = bandwidth_heuristic(joint_instances(train_x, scenario.dataset.test_instances), cfg.knn);
        return *sigma;
    }

    double B() const { return exact_marginals ? marginals.B : cfg.kmm_B; }
};

inline FeatureMap feature_map_for(const RunConfig& cfg, const PreparedScenario& p, const Dataset& d)
{
    const FeatureKind kind = cfg.features.value_or(
        p.spec.kind == ScenarioSpec::Kind::Synthetic ? FeatureKind::QuadraticOneHot : FeatureKind::IdentityOneHot);
    return FeatureMap(kind, d.dim, d.n_classes);
}

inline MethodContext make_context(const RunConfig& cfg, const PreparedScenario& p, const ShiftScenario& s,
                                  std::uint64_t seed)
{
    MethodContext ctx{cfg, s, feature_map_for(cfg, p, s.dataset), s.dataset.train_instances(), {}, false, seed, {}};
    if (s.marginals) {
        ctx.marginals = *s.marginals;
        ctx.exact_marginals = true;
    } else {
        const auto ratio = fit_ratio_classifier(ctx.train_x, s.dataset.test_instances);
        ctx.marginals = MarginalModel::from_ratio(ratio, cfg.ratio_cap);
    }
    return ctx;
}

inline MrcSettings mrc_settings(const RunConfig& cfg)
{
    MrcSettings s;
    s.solver.max_iter = cfg.max_iter;
    return s;
}

inline double test_error(const std::vector<Label>& predictions, const Dataset& d)
{
    return error_rate(predictions, d.test_labels);
}

inline double logistic_error(const LogisticModel& model, const Dataset& d)
{
    std::vector<Label> pred;
    pred.reserve(d.t());
    for (const auto& x : d.test_instances)
        pred.push_back(model.predict(x));
    return test_error(pred, d);
}

inline bool use_exact_dwgcs(const MethodContext& ctx)
{
    switch (ctx.cfg.dwgcs_weights) {
    case DwgcsWeights::Exact:
        if (!ctx.exact_marginals)
            throw InvalidInput("dwgcs: exact weights need known marginals");
        return true;
    case DwgcsWeights::DwKmm:
        return false;
    default:
        return ctx.exact_marginals;
    }
}

/// DW-GCS over the D grid: exact double weights when the marginals are known,
/// DW-KMM weights otherwise; D minimizes the minimax risk.
inline DSelection dwgcs_selection(const MethodContext& ctx, LossKind loss, const MrcSettings& settings)
{
    const auto& d = ctx.scenario.dataset;
    if (use_exact_dwgcs(ctx)) {
        const MarginalModel m = ctx.marginals;
        const auto& test_x = d.test_instances;
        const auto& train_x = ctx.train_x;
        return select_D(
            d.train, test_x, ctx.cfg.d_grid, loss, ctx.map,
            [&](double D) {
                auto w = exact_double_weights(m, m.B / std::sqrt(D), train_x, test_x);
                w.D = D;
                w.B = m.B;
                return w;
            },
            settings);
    }
    DwKmmConfig base;
    base.B = ctx.B();
    base.kernel = RbfKernel(ctx.kernel_sigma());
    return select_D(d.train, d.test_instances, ctx.cfg.d_grid, loss, ctx.map, base, settings);
}

inline MethodOutcome run_method(Method method, const MethodContext& ctx)
{
    const auto& d = ctx.scenario.dataset;
    const auto& cfg = ctx.cfg;
    MethodOutcome out;
    LogisticSettings lr;
    lr.l2 = cfg.lr_l2;
    switch (method) {
    case Method::NoAdapt: {
        WeightPair w;
        w.beta = Vector::Ones(static_cast<Eigen::Index>(d.n()));
        w.alpha = Vector::Ones(static_cast<Eigen::Index>(d.t()));
        w.alpha_fn = [](const Vector&) { return 1.0; };
        auto model = fit(d.train, d.test_instances, w, LossKind::ZeroOne, ctx.map, mrc_settings(cfg));
        out.error = test_error(predict_labels(model, d.test_instances), d);
        out.minimax_risk = model.minimax_risk;
        out.alpha_fn = w.alpha_fn;
        out.model = std::move(model);
        break;
    }
    case Method::Reweighted: {
        const auto w = reweighted_weights(ctx.marginals, ctx.train_x, d.test_instances, cfg.ratio_cap);
        out.error = logistic_error(fit_reweighted_lr(d.train, w.beta, ctx.map, lr), d);
        break;
    }
    case Method::Robust: {
        const auto w = robust_weights(ctx.marginals, ctx.train_x, d.test_instances);
        Vector alpha_train(static_cast<Eigen::Index>(d.n()));
        for (std::size_t i = 0; i < d.n(); ++i)
            alpha_train[static_cast<Eigen::Index>(i)] = w.alpha_fn(ctx.train_x[i]);
        RobustSettings rs;
        rs.l2 = cfg.lr_l2;
        rs.seed = derive_seed(ctx.seed, 17);
        out.error = logistic_error(fit_robust(d.train, alpha_train, ctx.map, rs), d);
        break;
    }
    case Method::FlatteningPower:
    case Method::FlatteningMixture: {
        const auto variant = method == Method::FlatteningPower ? Flattening::Power : Flattening::Mixture;
        const auto w = flattening_weights(ctx.marginals, cfg.gamma, variant, ctx.train_x);
        out.error = logistic_error(fit_reweighted_lr(d.train, w.beta, ctx.map, lr), d);
        break;
    }
    case Method::Kmm: {
        DwKmmConfig kc;
        kc.B = ctx.B();
        kc.kernel = RbfKernel(ctx.kernel_sigma());
        const auto sol = kmm(ctx.train_x, d.test_instances, kc);
        out.error = logistic_error(fit_reweighted_lr(d.train, sol.weights.beta, ctx.map, lr), d);
        break;
    }
    case Method::DwgcsZeroOne:
    case Method::DwgcsLog: {
        const LossKind loss = method == Method::DwgcsZeroOne ? LossKind::ZeroOne : LossKind::Log;
        auto sel = dwgcs_selection(ctx, loss, mrc_settings(cfg));
        for (std::size_t i = 0; i < sel.models.size(); ++i)
            out.grid.push_back({cfg.d_grid[i], sel.risks[i],
                                test_error(predict_labels(sel.models[i], d.test_instances), d)});
        out.error = out.grid[sel.index].error;
        out.minimax_risk = sel.model.minimax_risk;
        out.D = sel.D;
        if (ctx.exact_marginals) {
            const MarginalModel m = ctx.marginals;
            const double C = m.B / std::sqrt(sel.D);
            out.alpha_fn = [m, C](const Vector& x) { return dwgcs::detail::alpha_value(m.p_tr(x), m.p_te(x), C); };
        }
        out.model = std::move(sel.model);
        break;
    }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Runs

struct ResultRow {
    std::string scenario;
    std::string method;
    int repetition = 0;
    std::uint64_t seed = 0;
    /// "ok" or "failed: <message>".
    std::string status = "ok";
    double error = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> minimax_risk;
    std::optional<double> D;

    bool ok() const { return status == "ok"; }
};

struct GridRow {
    std::string scenario;
    std::string method;
    int repetition = 0;
    double D = 1.0;
    double minimax_risk = 0.0;
    double error = 0.0;
    bool selected = false;
};

struct TimingRow {
    std::string scenario;
    std::string method;
    int repetition = 0;
    double seconds = 0.0;
};

struct BoundRow {
    std::string scenario;
    std::string method;
    int repetition = 0;
    double D = 1.0;
    double risk = 0.0;
    double risk_se = 0.0;
    double minimax_risk = 0.0;
    double population_minimax_risk = 0.0;
    double population_se = 0.0;
    double bound_first = 0.0;
    bool lambda_covers = false;
    bool first_violated = false;
    /// risk <= population minimax risk + 3 standard errors of the risk.
    bool holds = false;
    std::optional<double> bound_second;
    std::optional<double> bound_corollary;
    std::optional<bool> second_violated;
    std::optional<bool> corollary_violated;
    std::string status = "ok";
};

struct RunResult {
    std::vector<ResultRow> rows;
    std::vector<GridRow> grid;
    std::vector<TimingRow> timings;
    std::vector<BoundRow> bounds;
    std::vector<PreparedScenario> scenarios;
    int workers = 1;

    bool any_failure() const
    {
        for (const auto& r : rows)
            if (!r.ok())
                return true;
        for (const auto& b : bounds)
            if (b.status != "ok")
                return true;
        return false;
    }
};

inline int workers_from_env(int fallback = 1)
{
    const char* v = std::getenv("DWGCS_WORKERS");
    if (!v || !*v)
        return fallback;
    char* end = nullptr;
    const long w = std::strtol(v, &end, 10);
    if (*end != '\0' || w < 1 || w > 1024)
        throw ConfigError(std::string("DWGCS_WORKERS must be a positive integer, found '") + v + "'");
    return static_cast<int>(w);
}

/// Runs `task(i)` for i in [0, count) on `workers` threads.
template <class F>
void parallel_for(std::size_t count, int workers, F task)
{
    std::atomic<std::size_t> next{0};
    auto loop = [&] {
        for (std::size_t i = next++; i < count; i = next++)
            task(i);
    };
    const int extra = std::max(0, std::min(workers, static_cast<int>(count)) - 1);
    std::vector<std::thread> threads;
    for (int w = 0; w < extra; ++w)
        threads.emplace_back(loop);
    loop();
    for (auto& th : threads)
        th.join();
}

/// Bound verification for one fitted DW-GCS model on a synthetic scenario.
/// lambda is optionally inflated to max(lambda_LP, |tau - E Phi_alpha|) with
/// E estimated from an independent set of testing draws.
inline BoundRow verify_one(const RunConfig& cfg, const PreparedScenario& p, const MethodContext& ctx,
                           const MethodOutcome& outcome, Method method, int rep, std::uint64_t seed)
{
    BoundRow b;
    b.scenario = p.spec.id;
    b.method = to_string(method);
    b.repetition = rep;
    if (!outcome.model || !outcome.alpha_fn || !ctx.exact_marginals) {
        b.status = "skipped: bounds need a DW-GCS model with known marginals";
        return b;
    }
    const auto scfg = synthetic_config(p, seed);
    MrcModel model = *outcome.model;
    b.D = model.D;
    const auto& d = ctx.scenario.dataset;
    if (cfg.inflate_lambda) {
        const auto lambda_draws = sample_test_distribution(scfg, cfg.mc_draws, derive_seed(seed, 101));
        const Vector e = expected_feature(lambda_draws, outcome.alpha_fn, ctx.map);
        MrcSettings s = mrc_settings(cfg);
        s.lambda = model.spec.lambda.cwiseMax((model.spec.tau - e).cwiseAbs());
        const Vector alpha = model.spec.alpha_values;
        auto refit = dwgcs::detail::fit_on(ctx.map, model.loss, d.test_instances, alpha,
                                    Vector::Constant(alpha.size(), 1.0 / static_cast<double>(alpha.size())),
                                    model.spec.tau, s, model.D);
        model = std::move(refit);
    }
    const auto draws = sample_test_distribution(scfg, cfg.mc_draws, derive_seed(seed, 202));
    BoundSettings bs;
    bs.delta = cfg.bound_delta;
    bs.n = d.n();
    bs.B = ctx.marginals.B;
    bs.smallest_risk = cfg.smallest_risk;
    bs.smallest_risk_solver.max_iter = cfg.smallest_risk_iter;
    const auto rep_out = bound_report(model, draws, outcome.alpha_fn, bs);
    b.risk = rep_out.risk.value;
    b.risk_se = rep_out.risk.std_error;
    b.minimax_risk = rep_out.minimax_risk;
    b.population_minimax_risk = rep_out.population_minimax_risk.value;
    b.population_se = rep_out.population_minimax_risk.std_error;
    b.bound_first = rep_out.bound_first;
    b.lambda_covers = rep_out.lambda_covers;
    b.first_violated = rep_out.first_violated;
    b.holds = b.risk <= b.population_minimax_risk + 3.0 * b.risk_se;
    if (rep_out.smallest) {
        b.bound_second = rep_out.bound_second;
        b.bound_corollary = rep_out.bound_corollary;
        b.second_violated = rep_out.second_violated;
        b.corollary_violated = rep_out.corollary_violated;
    }
    return b;
}

/// Runs every scenario x repetition x method. Output rows are ordered by
/// (scenario, method, repetition) in configuration order, independent of the
/// worker count.
inline RunResult run(const RunConfig& cfg, int workers = 1, bool with_bounds = false)
{
    cfg.validate();
    RunResult result;
    result.workers = workers;
    for (const auto& s : cfg.scenarios)
        result.scenarios.push_back(prepare(s, cfg));

    const std::size_t reps = static_cast<std::size_t>(cfg.repetitions);
    const std::size_t tasks = result.scenarios.size() * reps;
    const std::size_t nm = cfg.methods.size();
    std::vector<ResultRow> rows(tasks * nm);
    std::vector<TimingRow> timings(tasks * nm);
    std::vector<std::vector<GridRow>> grids(tasks * nm);
    std::vector<std::vector<BoundRow>> bounds(tasks * nm);

    parallel_for(tasks, workers, [&](std::size_t task) {
        const std::size_t si = task / reps;
        const int rep = static_cast<int>(task % reps);
        const auto& p = result.scenarios[si];
        const std::uint64_t seed = data_seed(cfg.seed, p.spec.id, rep);
        std::optional<ShiftScenario> scenario;
        std::optional<MethodContext> ctx;
        std::string setup_error;
        try {
            scenario = generate(p, seed);
            ctx.emplace(make_context(cfg, p, *scenario, seed));
        } catch (const std::exception& e) {
            setup_error = e.what();
        }
        for (std::size_t mi = 0; mi < nm; ++mi) {
            // Canonical slot: scenario, then method, then repetition.
            const std::size_t slot = (si * nm + mi) * reps + static_cast<std::size_t>(rep);
            const Method method = cfg.methods[mi];
            ResultRow row;
            row.scenario = p.spec.id;
            row.method = to_string(method);
            row.repetition = rep;
            row.seed = seed;
            const auto start = std::chrono::steady_clock::now();
            if (!setup_error.empty()) {
                row.status = "failed: " + setup_error;
            } else {
                try {
                    auto out = run_method(method, *ctx);
                    row.error = out.error;
                    row.minimax_risk = out.minimax_risk;
                    row.D = out.D;
                    for (const auto& g : out.grid)
                        grids[slot].push_back({p.spec.id, row.method, rep, g.D, g.minimax_risk, g.error,
                                               out.D && g.D == *out.D});
                    if (with_bounds && is_dwgcs(method) && p.spec.kind == ScenarioSpec::Kind::Synthetic) {
                        try {
                            bounds[slot].push_back(verify_one(cfg, p, *ctx, out, method, rep, seed));
                        } catch (const std::exception& e) {
                            BoundRow b;
                            b.scenario = p.spec.id;
                            b.method = row.method;
                            b.repetition = rep;
                            b.status = std::string("failed: ") + e.what();
                            bounds[slot].push_back(b);
                        }
                    }
                } catch (const std::exception& e) {
                    row.status = std::string("failed: ") + e.what();
                }
            }
            timings[slot] = {p.spec.id, row.method, rep,
                             std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count()};
            rows[slot] = std::move(row);
        }
    });

    result.rows = std::move(rows);
    result.timings = std::move(timings);
    for (auto& g : grids)
        result.grid.insert(result.grid.end(), g.begin(), g.end());
    for (auto& b : bounds)
        result.bounds.insert(result.bounds.end(), b.begin(), b.end());
    return result;
}

// ---------------------------------------------------------------------------
// Reports

/// Linear interpolation between order statistics (type 7).
inline double quantile(std::vector<double> v, double q)
{
    if (v.empty())
        throw InvalidInput("quantile: empty input");
    if (!(q >= 0.0 && q <= 1.0))
        throw InvalidInput("quantile: q must lie in [0, 1]");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

struct SummaryRow {
    std::string scenario;
    std::string method;
    int count = 0;
    int failures = 0;
    double mean_error = std::numeric_limits<double>::quiet_NaN();
    double std_error = std::numeric_limits<double>::quiet_NaN();
    std::optional<double> mean_minimax_risk;
    std::optional<double> mean_D;
};

struct BoxRow {
    std::string scenario;
    std::string method;
    int count = 0;
    double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};

namespace detail {

    /// Groups in first-appearance order.
    inline std::vector<std::pair<std::pair<std::string, std::string>, std::vector<const ResultRow*>>>
    group_rows(const std::vector<ResultRow>& rows)
    {
        std::vector<std::pair<std::pair<std::string, std::string>, std::vector<const ResultRow*>>> groups;
        for (const auto& r : rows) {
            auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
                return g.first.first == r.scenario && g.first.second == r.method;
            });
            if (it == groups.end()) {
                groups.push_back({{r.scenario, r.method}, {}});
                it = std::prev(groups.end());
            }
            it->second.push_back(&r);
        }
        return groups;
    }

    inline double mean(const std::vector<double>& v)
    {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s / static_cast<double>(v.size());
    }

} // namespace detail

/// Mean and sample standard deviation per (scenario, method) over the
/// successful rows.
inline std::vector<SummaryRow> summarize(const std::vector<ResultRow>& rows)
{
    std::vector<SummaryRow> out;
    for (const auto& [key, group] : detail::group_rows(rows)) {
        SummaryRow s;
        s.scenario = key.first;
        s.method = key.second;
        std::vector<double> errors, risks, ds;
        for (const auto* r : group) {
            if (!r->ok()) {
                ++s.failures;
                continue;
            }
            errors.push_back(r->error);
            if (r->minimax_risk)
                risks.push_back(*r->minimax_risk);
            if (r->D)
                ds.push_back(*r->D);
        }
        s.count = static_cast<int>(errors.size());
        if (!errors.empty()) {
            s.mean_error = detail::mean(errors);
            double ss = 0.0;
            for (double e : errors)
                ss += (e - s.mean_error) * (e - s.mean_error);
            s.std_error = errors.size() > 1 ? std::sqrt(ss / static_cast<double>(errors.size() - 1)) : 0.0;
        }
        if (!risks.empty())
            s.mean_minimax_risk = detail::mean(risks);
        if (!ds.empty())
            s.mean_D = detail::mean(ds);
        out.push_back(s);
    }
    return out;
}

inline std::vector<BoxRow> boxplot(const std::vector<ResultRow>& rows)
{
    std::vector<BoxRow> out;
    for (const auto& [key, group] : detail::group_rows(rows)) {
        std::vector<double> errors;
        for (const auto* r : group)
            if (r->ok())
                errors.push_back(r->error);
        if (errors.empty())
            continue;
        out.push_back({key.first, key.second, static_cast<int>(errors.size()), quantile(errors, 0.0),
                       quantile(errors, 0.25), quantile(errors, 0.5), quantile(errors, 0.75), quantile(errors, 1.0)});
    }
    return out;
}

inline std::string format_number(double v)
{
    if (std::isnan(v))
        return "";
    std::ostringstream os;
    os.imbue(std::locale::classic());
    os << std::setprecision(17) << v;
    return os.str();
}

inline std::string format_optional(const std::optional<double>& v) { return v ? format_number(*v) : ""; }

namespace detail {

    inline std::string csv_cell(const std::string& s)
    {
        if (s.find_first_of(",\"\n") == std::string::npos)
            return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"')
                out += '"';
            out += c == '\n' ? ' ' : c;
        }
        return out + "\"";
    }

    inline std::vector<std::string> parse_csv_row(const std::string& line)
    {
        std::vector<std::string> cells;
        std::string cur;
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            const char c = line[i];
            if (quoted) {
                if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                    cur += '"';
                    ++i;
                } else if (c == '"') {
                    quoted = false;
                } else {
                    cur += c;
                }
            } else if (c == '"') {
                quoted = true;
            } else if (c == ',') {
                cells.push_back(cur);
                cur.clear();
            } else {
                cur += c;
            }
        }
        cells.push_back(cur);
        return cells;
    }

    inline std::optional<double> parse_optional(const std::string& s)
    {
        if (s.empty())
            return std::nullopt;
        std::istringstream is(s);
        is.imbue(std::locale::classic());
        double v = 0.0;
        is >> v;
        if (!is || !is.eof())
            throw InvalidInput("results.csv: bad number '" + s + "'");
        return v;
    }

    inline void write_file(const std::filesystem::path& path, const std::string& text)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw InvalidInput("cannot write " + path.string());
        out << text;
    }

} // namespace detail

inline const char* kResultsHeader = "scenario,method,repetition,seed,status,error,minimax_risk,D";

inline std::string results_csv(const std::vector<ResultRow>& rows)
{
    std::ostringstream os;
    os << kResultsHeader << '\n';
    for (const auto& r : rows)
        os << detail::csv_cell(r.scenario) << ',' << r.method << ',' << r.repetition << ',' << r.seed << ','
           << detail::csv_cell(r.status) << ',' << format_number(r.error) << ',' << format_optional(r.minimax_risk)
           << ',' << format_optional(r.D) << '\n';
    return os.str();
}

inline std::vector<ResultRow> parse_results_csv(const std::string& text)
{
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line != kResultsHeader)
        throw InvalidInput("results.csv: unexpected header");
    std::vector<ResultRow> rows;
    int number = 1;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty())
            continue;
        const auto cells = detail::parse_csv_row(line);
        if (cells.size() != 8)
            throw InvalidInput("results.csv line " + std::to_string(number) + ": expected 8 cells");
        ResultRow r;
        r.scenario = cells[0];
        r.method = cells[1];
        r.repetition = std::stoi(cells[2]);
        r.seed = std::stoull(cells[3]);
        r.status = cells[4];
        r.error = detail::parse_optional(cells[5]).value_or(std::numeric_limits<double>::quiet_NaN());
        r.minimax_risk = detail::parse_optional(cells[6]);
        r.D = detail::parse_optional(cells[7]);
        rows.push_back(r);
    }
    return rows;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows)
{
    std::ostringstream os;
    os << "scenario,method,count,failures,mean_error,std_error,mean_minimax_risk,mean_D\n";
    for (const auto& s : rows)
        os << detail::csv_cell(s.scenario) << ',' << s.method << ',' << s.count << ',' << s.failures << ','
           << format_number(s.mean_error) << ',' << format_number(s.std_error) << ','
           << format_optional(s.mean_minimax_risk) << ',' << format_optional(s.mean_D) << '\n';
    return os.str();
}

inline std::string boxplot_csv(const std::vector<BoxRow>& rows)
{
    std::ostringstream os;
    os << "# error quantiles per (scenario, method); type-7 definition: sorted errors v[0..n-1], "
          "h = (n - 1) q, Q(q) = v[floor h] + (h - floor h) (v[floor h + 1] - v[floor h])\n";
    os << "scenario,method,count,min,q1,median,q3,max\n";
    for (const auto& b : rows)
        os << detail::csv_cell(b.scenario) << ',' << b.method << ',' << b.count << ',' << format_number(b.min)
           << ',' << format_number(b.q1) << ',' << format_number(b.median) << ',' << format_number(b.q3) << ','
           << format_number(b.max) << '\n';
    return os.str();
}

inline std::string grid_csv(const std::vector<GridRow>& rows)
{
    std::ostringstream os;
    os << "scenario,method,repetition,D,minimax_risk,error,selected\n";
    for (const auto& g : rows)
        os << detail::csv_cell(g.scenario) << ',' << g.method << ',' << g.repetition << ',' << format_number(g.D)
           << ',' << format_number(g.minimax_risk) << ',' << format_number(g.error) << ',' << (g.selected ? 1 : 0)
           << '\n';
    return os.str();
}

inline std::string timings_csv(const std::vector<TimingRow>& rows)
{
    std::ostringstream os;
    os << "scenario,method,repetition,seconds\n";
    for (const auto& r : rows)
        os << detail::csv_cell(r.scenario) << ',' << r.method << ',' << r.repetition << ','
           << format_number(r.seconds) << '\n';
    return os.str();
}

inline nlohmann::ordered_json bounds_json(const std::vector<BoundRow>& rows, const RunConfig& cfg)
{
    nlohmann::ordered_json j;
    j["mc_draws"] = cfg.mc_draws;
    j["inflate_lambda"] = cfg.inflate_lambda;
    j["delta"] = cfg.bound_delta;
    j["check"] = "risk <= population minimax risk at mu* + 3 standard errors of the risk";
    int holds = 0, total = 0;
    auto& list = j["reports"] = nlohmann::ordered_json::array();
    for (const auto& b : rows) {
        nlohmann::ordered_json r;
        r["scenario"] = b.scenario;
        r["method"] = b.method;
        r["repetition"] = b.repetition;
        r["status"] = b.status;
        if (b.status == "ok") {
            r["D"] = b.D;
            r["risk"] = b.risk;
            r["risk_se"] = b.risk_se;
            r["minimax_risk"] = b.minimax_risk;
            r["population_minimax_risk"] = b.population_minimax_risk;
            r["population_se"] = b.population_se;
            r["bound_first"] = b.bound_first;
            r["lambda_covers"] = b.lambda_covers;
            r["first_violated"] = b.first_violated;
            r["holds"] = b.holds;
            if (b.bound_second) {
                r["bound_second"] = *b.bound_second;
                r["second_violated"] = *b.second_violated;
                r["bound_corollary"] = *b.bound_corollary;
                r["corollary_violated"] = *b.corollary_violated;
            }
            holds += b.holds ? 1 : 0;
            ++total;
        }
        list.push_back(r);
    }
    j["holds"] = holds;
    j["total"] = total;
    return j;
}

inline nlohmann::ordered_json manifest_json(const RunConfig& cfg, const RunResult& result)
{
    nlohmann::ordered_json j;
    j["version"] = kVersion;
    j["seed"] = cfg.seed;
    j["repetitions"] = cfg.repetitions;
    j["seed_rule"] = "data seed = derive_seed(seed xor repetition, fnv1a(scenario id))";
    j["workers"] = result.workers;
    std::vector<std::string> methods;
    for (auto m : cfg.methods)
        methods.push_back(to_string(m));
    j["methods"] = methods;
    j["d_grid"] = cfg.d_grid;
    j["max_iter"] = cfg.max_iter;
    j["gamma"] = cfg.gamma;
    j["lr_l2"] = cfg.lr_l2;
    j["ratio_cap"] = cfg.ratio_cap;
    j["kmm_B"] = cfg.kmm_B;
    j["sigma"] = cfg.sigma ? nlohmann::ordered_json(*cfg.sigma) : nlohmann::ordered_json("heuristic");
    j["knn"] = cfg.knn;
    auto& sc = j["scenarios"] = nlohmann::ordered_json::array();
    for (const auto& p : result.scenarios) {
        nlohmann::ordered_json s;
        s["id"] = p.spec.id;
        s["n"] = p.n;
        s["t"] = p.t;
        s["features"] = p.spec.kind == ScenarioSpec::Kind::Synthetic
                            ? (cfg.features.value_or(FeatureKind::QuadraticOneHot) == FeatureKind::QuadraticOneHot
                                   ? "quadratic"
                                   : "identity")
                            : (cfg.features.value_or(FeatureKind::IdentityOneHot) == FeatureKind::QuadraticOneHot
                                   ? "quadratic"
                                   : "identity");
        if (p.spec.kind == ScenarioSpec::Kind::Synthetic) {
            s["type"] = "synthetic";
            s["delta"] = p.spec.delta;
            const auto c = synthetic_config(p, 0);
            s["train_weight1"] = c.w_tr();
            s["test_weight1"] = c.w_te();
            s["B"] = synthetic_marginals(c).B;
        } else {
            s["type"] = "biased";
            s["csv"] = p.spec.csv;
            s["pool"] = p.pool.size();
            s["axis"] = p.spec.axis == SplitAxis::Pca1 ? "pca" : "feature";
            s["feature"] = p.spec.feature;
            s["delta_tr"] = p.spec.delta_tr;
            s["delta_te"] = p.spec.delta_te;
            if (!p.spec.n && !cfg.n)
                s["caveat"] = "n = t = min(300, pool / 3) default; sizes are not given for these scenarios";
        }
        sc.push_back(s);
    }
    std::vector<std::uint64_t> seeds;
    for (int r = 0; r < cfg.repetitions; ++r)
        seeds.push_back(repetition_seed(cfg.seed, r));
    j["repetition_seeds"] = seeds;
    return j;
}

/// Writes results.csv, summary.csv, boxplot.csv, dgrid.csv, timings.csv,
/// run_manifest.json and, when bound rows exist, bounds.json.
inline void emit_reports(const RunResult& result, const RunConfig& cfg, const std::filesystem::path& outdir)
{
    if (result.rows.empty())
        throw InvalidInput("emit_reports: no rows");
    std::filesystem::create_directories(outdir);
    detail::write_file(outdir / "results.csv", results_csv(result.rows));
    detail::write_file(outdir / "summary.csv", summary_csv(summarize(result.rows)));
    detail::write_file(outdir / "boxplot.csv", boxplot_csv(boxplot(result.rows)));
    detail::write_file(outdir / "dgrid.csv", grid_csv(result.grid));
    detail::write_file(outdir / "timings.csv", timings_csv(result.timings));
    detail::write_file(outdir / "run_manifest.json", manifest_json(cfg, result).dump(2) + "\n");
    if (!result.bounds.empty())
        detail::write_file(outdir / "bounds.json", bounds_json(result.bounds, cfg).dump(2) + "\n");
}

} // namespace dwgcs::bench

#endif
