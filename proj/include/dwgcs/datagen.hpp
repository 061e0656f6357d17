#ifndef DWGCS_DATAGEN_HPP
#define DWGCS_DATAGEN_HPP

#include "dwgcs/core.hpp"
#include "dwgcs/weights.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace dwgcs {

inline std::uint64_t splitmix64(std::uint64_t& state)
{
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Independent seed for a named sub-stream of `seed`.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream)
{
    std::uint64_t s = seed ^ (0xd1b54a32d192ed03ULL * (stream + 1));
    splitmix64(s);
    return splitmix64(s);
}

/// mt19937_64 with hand-rolled uniform/normal/index draws. The standard
/// distribution classes are implementation-defined, so they are avoided to
/// keep streams identical across toolchains.
class Rng {
public:
    explicit Rng(std::uint64_t seed)
    {
        std::uint64_t s = seed;
        engine_.seed(splitmix64(s));
    }

    std::uint64_t next() { return engine_(); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n)
    {
        if (n == 0)
            throw InvalidInput("rng: empty range");
        const std::uint64_t bound = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % bound;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return static_cast<std::size_t>(v % bound);
    }

    template <class T>
    void shuffle(std::vector<T>& v)
    {
        for (std::size_t i = v.size(); i > 1; --i)
            std::swap(v[i - 1], v[index(i)]);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// Two-component Gaussian mixture family with m1 = (-1.5, 0), m2 = (1.5, 0),
/// covariance I/4. Training puts weight 0.5 - delta on the first component,
/// testing 1 - delta.
struct SyntheticConfig {
    double delta = 0.05;
    int n = 100;
    int t = 100;
    std::uint64_t seed = 0;
    /// Overrides for the first-component weights (e.g. equal weights for a
    /// scenario without shift).
    std::optional<double> train_weight1;
    std::optional<double> test_weight1;

    double w_tr() const { return train_weight1 ? *train_weight1 : 0.5 - delta; }
    double w_te() const { return test_weight1 ? *test_weight1 : 1.0 - delta; }

    void validate() const
    {
        if (!(delta > 0.0 && delta <= 0.5) && !(train_weight1 && test_weight1))
            throw InvalidInput("synthetic: delta must lie in (0, 0.5]");
        for (double w : {w_tr(), w_te()})
            if (!(w >= 0.0 && w <= 1.0))
                throw InvalidInput("synthetic: mixture weights must lie in [0, 1]");
        if (n < 1 || t < 1)
            throw InvalidInput("synthetic: n and t must be positive");
    }
};

namespace synthetic {

inline const Vector& mean1()
{
    static const Vector m = (Vector(2) << -1.5, 0.0).finished();
    return m;
}

inline const Vector& mean2()
{
    static const Vector m = (Vector(2) << 1.5, 0.0).finished();
    return m;
}

inline constexpr double kVariance = 0.25;

inline double gaussian(const Vector& x, const Vector& m)
{
    return std::exp(-(x - m).squaredNorm() / (2.0 * kVariance)) / (2.0 * std::numbers::pi * kVariance);
}

inline double mixture_density(double w1, const Vector& x)
{
    return w1 * gaussian(x, mean1()) + (1.0 - w1) * gaussian(x, mean2());
}

inline Label label(const Vector& x) { return x[0] * x[1] >= 0.0 ? 1 : 2; }

inline Vector draw(double w1, Rng& rng)
{
    const bool first = rng.uniform() < w1;
    const double sd = std::sqrt(kVariance);
    Vector x(2);
    x[0] = rng.normal() * sd;
    x[1] = rng.normal() * sd;
    return x + (first ? mean1() : mean2());
}

/// sup_x p_te / p_tr. The ratio is monotone in N1(x)/N2(x), which ranges
/// over (0, inf), so the supremum is attained in one of the two limits.
inline double sup_ratio(double w_tr, double w_te)
{
    auto limit = [](double num, double den) {
        if (den <= 0.0)
            return num > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        return num / den;
    };
    return std::max(limit(w_te, w_tr), limit(1.0 - w_te, 1.0 - w_tr));
}

} // namespace synthetic

struct ShiftScenario {
    Dataset dataset;
    std::optional<MarginalModel> marginals;
    std::string provenance;
};

inline constexpr double kRatioCap = 1000.0;

inline MarginalModel synthetic_marginals(const SyntheticConfig& cfg)
{
    const double a = cfg.w_tr();
    const double b = cfg.w_te();
    MarginalModel m;
    m.p_tr = [a](const Vector& x) { return synthetic::mixture_density(a, x); };
    m.p_te = [b](const Vector& x) { return synthetic::mixture_density(b, x); };
    m.B = std::min(synthetic::sup_ratio(a, b), kRatioCap);
    return m;
}

/// n labeled samples from p_tr and t instances (with held-out labels) from
/// p_te. Bit-reproducible for a given seed.
inline ShiftScenario gen_synthetic(const SyntheticConfig& cfg)
{
    cfg.validate();
    Rng rng(cfg.seed);
    ShiftScenario s;
    s.dataset.dim = 2;
    s.dataset.n_classes = 2;
    for (int i = 0; i < cfg.n; ++i) {
        Vector x = synthetic::draw(cfg.w_tr(), rng);
        const Label y = synthetic::label(x);
        s.dataset.train.push_back({std::move(x), y});
    }
    for (int j = 0; j < cfg.t; ++j) {
        Vector x = synthetic::draw(cfg.w_te(), rng);
        s.dataset.test_labels.push_back(synthetic::label(x));
        s.dataset.test_instances.push_back(std::move(x));
    }
    s.marginals = synthetic_marginals(cfg);
    std::ostringstream os;
    os << "synthetic delta=" << cfg.delta << " w_tr=" << cfg.w_tr() << " w_te=" << cfg.w_te() << " seed=" << cfg.seed;
    s.provenance = os.str();
    return s;
}

/// Labeled draws from the testing distribution (for Monte Carlo estimates).
inline std::vector<LabeledSample> sample_test_distribution(const SyntheticConfig& cfg, std::size_t count,
                                                           std::uint64_t seed)
{
    Rng rng(seed);
    std::vector<LabeledSample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        Vector x = synthetic::draw(cfg.w_te(), rng);
        const Label y = synthetic::label(x);
        out.push_back({std::move(x), y});
    }
    return out;
}

struct CsvData {
    std::vector<LabeledSample> samples;
    std::vector<std::string> feature_names;
    /// Original label strings; label y corresponds to label_values[y - 1].
    std::vector<std::string> label_values;
    int n_classes = 0;
    int dim() const { return static_cast<int>(feature_names.size()); }
};

class CsvError : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line)
{
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ','))
        out.push_back(cell);
    if (!line.empty() && line.back() == ',')
        out.emplace_back();
    return out;
}

inline std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos)
        return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

} // namespace detail

/// Reads a header-first CSV. Every column other than `label_column` is a
/// numeric feature. Distinct labels are sorted (numerically when all are
/// numbers) and mapped to 1..k.
inline CsvData load_csv(const std::string& path, const std::string& label_column)
{
    std::ifstream in(path);
    if (!in)
        throw CsvError("csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line))
        throw CsvError("csv: " + path + " is empty");
    std::vector<std::string> header = detail::split_csv_line(line);
    for (auto& h : header)
        h = detail::trim(h);
    const auto label_it = std::find(header.begin(), header.end(), label_column);
    if (label_it == header.end())
        throw CsvError("csv: " + path + " has no column '" + label_column + "'");
    const auto label_idx = static_cast<std::size_t>(label_it - header.begin());

    CsvData data;
    for (std::size_t c = 0; c < header.size(); ++c)
        if (c != label_idx)
            data.feature_names.push_back(header[c]);

    std::vector<std::string> raw_labels;
    std::vector<Vector> xs;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (detail::trim(line).empty())
            continue;
        const auto cells = detail::split_csv_line(line);
        if (cells.size() != header.size())
            throw CsvError("csv: " + path + " row " + std::to_string(row) + ": expected " +
                           std::to_string(header.size()) + " columns, found " + std::to_string(cells.size()));
        Vector x(static_cast<Eigen::Index>(header.size() - 1));
        Eigen::Index pos = 0;
        for (std::size_t c = 0; c < cells.size(); ++c) {
            const std::string cell = detail::trim(cells[c]);
            if (c == label_idx) {
                if (cell.empty())
                    throw CsvError("csv: " + path + " row " + std::to_string(row) + " column '" + header[c] +
                                   "': missing label");
                raw_labels.push_back(cell);
                continue;
            }
            std::size_t used = 0;
            double v = 0.0;
            try {
                v = std::stod(cell, &used);
            } catch (const std::exception&) {
                used = 0;
            }
            if (cell.empty() || used != cell.size() || !std::isfinite(v))
                throw CsvError("csv: " + path + " row " + std::to_string(row) + " column '" + header[c] +
                               "': cannot parse '" + cell + "'");
            x[pos++] = v;
        }
        xs.push_back(std::move(x));
    }
    if (xs.empty())
        throw CsvError("csv: " + path + " has no data rows");

    bool numeric = true;
    for (const auto& s : raw_labels) {
        std::size_t used = 0;
        try {
            std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        numeric = numeric && used == s.size();
    }
    std::vector<std::string> distinct(raw_labels);
    std::sort(distinct.begin(), distinct.end(), [numeric](const std::string& a, const std::string& b) {
        return numeric ? std::stod(a) < std::stod(b) : a < b;
    });
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::map<std::string, Label> index;
    for (std::size_t i = 0; i < distinct.size(); ++i)
        index[distinct[i]] = static_cast<Label>(i + 1);
    data.label_values = distinct;
    data.n_classes = static_cast<int>(distinct.size());
    for (std::size_t i = 0; i < xs.size(); ++i)
        data.samples.push_back({std::move(xs[i]), index[raw_labels[i]]});
    return data;
}

struct Normalization {
    std::vector<LabeledSample> samples;
    Vector mean;
    Vector std;
    /// Coordinates with zero spread, left centred but unscaled.
    std::vector<int> constant_columns;
};

/// Zero mean, unit (population) variance per coordinate.
inline Normalization normalize(const std::vector<LabeledSample>& samples)
{
    if (samples.empty())
        throw InvalidInput("normalize: no samples");
    const Eigen::Index d = samples.front().x.size();
    const double count = static_cast<double>(samples.size());
    Normalization out;
    out.mean = Vector::Zero(d);
    for (const auto& s : samples)
        out.mean += s.x;
    out.mean /= count;
    out.std = Vector::Zero(d);
    for (const auto& s : samples)
        out.std += (s.x - out.mean).cwiseAbs2();
    out.std = (out.std / count).cwiseSqrt();
    for (Eigen::Index c = 0; c < d; ++c)
        if (!(out.std[c] > 0.0)) {
            out.constant_columns.push_back(static_cast<int>(c));
            out.std[c] = 1.0;
        }
    out.samples.reserve(samples.size());
    for (const auto& s : samples)
        out.samples.push_back({((s.x - out.mean).array() / out.std.array()).matrix(), s.y});
    return out;
}

/// Leading eigenvector of the sample covariance by power iteration, with the
/// sign chosen so the largest-magnitude entry is positive.
inline Vector pca_first_component(const std::vector<Vector>& instances, double tol = 1e-9, int max_iter = 100000)
{
    if (instances.size() < 2)
        throw InvalidInput("pca: need at least two instances");
    const Eigen::Index d = instances.front().size();
    Vector mean = Vector::Zero(d);
    for (const auto& x : instances)
        mean += x;
    mean /= static_cast<double>(instances.size());
    Matrix cov = Matrix::Zero(d, d);
    for (const auto& x : instances) {
        const Vector c = x - mean;
        cov.noalias() += c * c.transpose();
    }
    cov /= static_cast<double>(instances.size() - 1);

    Vector v(d);
    for (Eigen::Index i = 0; i < d; ++i)
        v[i] = 1.0 + 0.1 * static_cast<double>(i);
    v.normalize();
    for (int it = 0; it < max_iter; ++it) {
        Vector w = cov * v;
        const double norm = w.norm();
        if (!(norm > 0.0))
            throw NumericalError("pca: zero covariance");
        w /= norm;
        const double change = (w - v).norm();
        v = w;
        if (change < tol)
            break;
    }
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0)
        v = -v;
    return v;
}

/// Feature indices ranked by |Pearson correlation with the label|, ties by
/// index; the first `top_k` are returned.
inline std::vector<int> pearson_select(const std::vector<LabeledSample>& samples, int top_k)
{
    if (samples.empty())
        throw InvalidInput("pearson: no samples");
    const Eigen::Index d = samples.front().x.size();
    const double count = static_cast<double>(samples.size());
    double my = 0.0;
    Vector mx = Vector::Zero(d);
    for (const auto& s : samples) {
        mx += s.x;
        my += s.y;
    }
    mx /= count;
    my /= count;
    Vector sxy = Vector::Zero(d);
    Vector sxx = Vector::Zero(d);
    double syy = 0.0;
    for (const auto& s : samples) {
        const Vector c = s.x - mx;
        const double cy = s.y - my;
        sxy += c * cy;
        sxx += c.cwiseAbs2();
        syy += cy * cy;
    }
    std::vector<double> score(static_cast<std::size_t>(d), 0.0);
    for (Eigen::Index i = 0; i < d; ++i)
        if (sxx[i] > 0.0 && syy > 0.0)
            score[static_cast<std::size_t>(i)] = std::abs(sxy[i] / std::sqrt(sxx[i] * syy));
    std::vector<int> idx(static_cast<std::size_t>(d));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
        return score[static_cast<std::size_t>(a)] > score[static_cast<std::size_t>(b)];
    });
    idx.resize(static_cast<std::size_t>(std::clamp<Eigen::Index>(top_k, 0, d)));
    return idx;
}

enum class SplitAxis { Feature, Pca1 };

struct BiasedSamplingConfig {
    SplitAxis axis = SplitAxis::Pca1;
    int feature = 0;
    double delta_tr = 0.7;
    double delta_te = 0.3;
    int n = 100;
    int t = 100;
    std::uint64_t seed = 0;

    void validate() const
    {
        for (double d : {delta_tr, delta_te})
            if (!(d > 0.0 && d <= 1.0))
                throw InvalidInput("biased sampling: probabilities must lie in (0, 1]");
        if (n < 1 || t < 1)
            throw InvalidInput("biased sampling: n and t must be positive");
    }
};

class InsufficientData : public InvalidInput {
public:
    using InvalidInput::InvalidInput;
};

inline double median(std::vector<double> v)
{
    if (v.empty())
        throw InvalidInput("median: empty input");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

/// Axis value per pool sample: the chosen feature or the projection on the
/// first principal component of the pool.
inline std::vector<double> split_axis_values(const std::vector<LabeledSample>& pool, const BiasedSamplingConfig& cfg)
{
    std::vector<double> out(pool.size());
    if (cfg.axis == SplitAxis::Feature) {
        for (std::size_t i = 0; i < pool.size(); ++i) {
            if (cfg.feature < 0 || cfg.feature >= pool[i].x.size())
                throw InvalidInput("biased sampling: feature index out of range");
            out[i] = pool[i].x[cfg.feature];
        }
        return out;
    }
    std::vector<Vector> xs;
    xs.reserve(pool.size());
    for (const auto& s : pool)
        xs.push_back(s.x);
    const Vector pc = pca_first_component(xs);
    for (std::size_t i = 0; i < pool.size(); ++i)
        out[i] = pc.dot(pool[i].x);
    return out;
}

/// Rejection sampling without replacement. Each draw picks a remaining pool
/// item uniformly and keeps it with probability delta if its axis value is
/// above the pool median, 1 - delta otherwise; rejected items stay in the
/// pool. Training and testing draws alternate until both sets are full.
inline ShiftScenario biased_split(const std::vector<LabeledSample>& pool, const BiasedSamplingConfig& cfg,
                                  int n_classes)
{
    cfg.validate();
    if (pool.empty())
        throw InsufficientData("biased sampling: empty pool");
    const auto axis = split_axis_values(pool, cfg);
    const double threshold = median(axis);
    std::vector<bool> above(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        above[i] = axis[i] > threshold;

    Rng rng(cfg.seed);
    std::vector<std::size_t> remaining(pool.size());
    std::iota(remaining.begin(), remaining.end(), 0);
    std::vector<std::size_t> train_idx;
    std::vector<std::size_t> test_idx;

    auto accept_prob = [&](std::size_t i, double delta) { return above[i] ? delta : 1.0 - delta; };
    auto draw_one = [&](double delta, std::vector<std::size_t>& into) {
        bool any = false;
        for (std::size_t i : remaining)
            any = any || accept_prob(i, delta) > 0.0;
        if (!any)
            throw InsufficientData("biased sampling: pool exhausted");
        while (true) {
            const std::size_t pos = rng.index(remaining.size());
            const std::size_t i = remaining[pos];
            if (rng.uniform() < accept_prob(i, delta)) {
                into.push_back(i);
                remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pos));
                return;
            }
        }
    };

    while (train_idx.size() < static_cast<std::size_t>(cfg.n) || test_idx.size() < static_cast<std::size_t>(cfg.t)) {
        if (train_idx.size() < static_cast<std::size_t>(cfg.n))
            draw_one(cfg.delta_tr, train_idx);
        if (test_idx.size() < static_cast<std::size_t>(cfg.t))
            draw_one(cfg.delta_te, test_idx);
    }

    ShiftScenario s;
    s.dataset.dim = static_cast<int>(pool.front().x.size());
    s.dataset.n_classes = n_classes;
    for (std::size_t i : train_idx)
        s.dataset.train.push_back(pool[i]);
    for (std::size_t i : test_idx) {
        s.dataset.test_instances.push_back(pool[i].x);
        s.dataset.test_labels.push_back(pool[i].y);
    }
    std::ostringstream os;
    os << "biased axis=" << (cfg.axis == SplitAxis::Pca1 ? std::string("pca1") : "feature" + std::to_string(cfg.feature))
       << " delta_tr=" << cfg.delta_tr << " delta_te=" << cfg.delta_te << " n=" << cfg.n << " t=" << cfg.t
       << " seed=" << cfg.seed;
    s.provenance = os.str();
    return s;
}

/// Whether each pool sample's axis value lies above the pool median.
inline std::vector<bool> above_median(const std::vector<LabeledSample>& pool, const BiasedSamplingConfig& cfg)
{
    const auto axis = split_axis_values(pool, cfg);
    const double threshold = median(axis);
    std::vector<bool> out(pool.size());
    for (std::size_t i = 0; i < pool.size(); ++i)
        out[i] = axis[i] > threshold;
    return out;
}

} // namespace dwgcs

#endif
