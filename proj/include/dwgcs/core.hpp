#ifndef DWGCS_CORE_HPP
#define DWGCS_CORE_HPP

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace dwgcs {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Labels are 1-based: a problem with k classes uses labels 1..k.
using Label = int;

class InvalidInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct LabeledSample {
    Vector x;
    Label y = 1;
};

/// Training samples plus unlabeled testing instances. `test_labels` is only
/// consulted for evaluation.
struct Dataset {
    std::vector<LabeledSample> train;
    std::vector<Vector> test_instances;
    std::vector<Label> test_labels;
    int n_classes = 2;
    int dim = 0;

    std::size_t n() const { return train.size(); }
    std::size_t t() const { return test_instances.size(); }

    std::vector<Vector> train_instances() const
    {
        std::vector<Vector> xs;
        xs.reserve(train.size());
        for (const auto& s : train)
            xs.push_back(s.x);
        return xs;
    }

    void validate() const
    {
        if (train.empty())
            throw InvalidInput("dataset: no training samples");
        auto check_x = [&](const Vector& x) {
            if (x.size() != dim)
                throw InvalidInput("dataset: instance dimension mismatch");
            if (!x.allFinite())
                throw InvalidInput("dataset: non-finite instance component");
        };
        for (const auto& s : train) {
            check_x(s.x);
            if (s.y < 1 || s.y > n_classes)
                throw InvalidInput("dataset: training label out of range");
        }
        for (const auto& x : test_instances)
            check_x(x);
        for (Label y : test_labels)
            if (y < 1 || y > n_classes)
                throw InvalidInput("dataset: test label out of range");
        if (!test_labels.empty() && test_labels.size() != test_instances.size())
            throw InvalidInput("dataset: test label count mismatch");
    }
};

enum class FeatureKind { IdentityOneHot, QuadraticOneHot };

/// Joint feature map Phi(x, y) = e_y (x) psi(x), where psi is the instance map
/// (identity or all monomials up to degree two) followed by a constant 1.
class FeatureMap {
public:
    FeatureMap(FeatureKind kind, int dim_instance, int n_classes)
        : kind_(kind), dim_(dim_instance), classes_(n_classes)
    {
        if (dim_instance < 1 || n_classes < 2)
            throw InvalidInput("feature map: need d >= 1 and k >= 2");
    }

    FeatureKind kind() const { return kind_; }
    int dim_instance() const { return dim_; }
    int n_classes() const { return classes_; }

    /// Length of psi(x).
    int block_size() const
    {
        if (kind_ == FeatureKind::IdentityOneHot)
            return dim_ + 1;
        return dim_ + dim_ * (dim_ + 1) / 2 + 1;
    }

    /// Output dimension m = k * block_size().
    int size() const { return classes_ * block_size(); }

    Vector instance_map(const Vector& x) const
    {
        if (x.size() != dim_)
            throw InvalidInput("feature map: instance dimension mismatch");
        Vector psi(block_size());
        int pos = 0;
        for (int i = 0; i < dim_; ++i)
            psi[pos++] = x[i];
        if (kind_ == FeatureKind::QuadraticOneHot) {
            for (int i = 0; i < dim_; ++i)
                for (int j = i; j < dim_; ++j)
                    psi[pos++] = x[i] * x[j];
        }
        psi[pos] = 1.0;
        return psi;
    }

    /// Rows are psi(x_j) for each instance.
    Matrix instance_matrix(const std::vector<Vector>& xs) const
    {
        Matrix out(static_cast<Eigen::Index>(xs.size()), block_size());
        for (std::size_t j = 0; j < xs.size(); ++j)
            out.row(static_cast<Eigen::Index>(j)) = instance_map(xs[j]).transpose();
        return out;
    }

    Vector operator()(const Vector& x, Label y) const
    {
        if (y < 1 || y > classes_)
            throw InvalidInput("feature map: label out of range");
        const int b = block_size();
        Vector phi = Vector::Zero(size());
        phi.segment((y - 1) * b, b) = instance_map(x);
        return phi;
    }

    std::string descriptor() const
    {
        return std::string(kind_ == FeatureKind::IdentityOneHot ? "identity" : "quadratic") + ":" +
               std::to_string(dim_) + ":" + std::to_string(classes_);
    }

    static FeatureMap from_descriptor(const std::string& text)
    {
        auto a = text.find(':');
        auto b = text.find(':', a == std::string::npos ? a : a + 1);
        if (a == std::string::npos || b == std::string::npos)
            throw InvalidInput("feature map descriptor: " + text);
        const std::string kind = text.substr(0, a);
        FeatureKind fk;
        if (kind == "identity")
            fk = FeatureKind::IdentityOneHot;
        else if (kind == "quadratic")
            fk = FeatureKind::QuadraticOneHot;
        else
            throw InvalidInput("feature map descriptor: unknown kind " + kind);
        return FeatureMap(fk, std::stoi(text.substr(a + 1, b - a - 1)), std::stoi(text.substr(b + 1)));
    }

private:
    FeatureKind kind_;
    int dim_;
    int classes_;
};

inline Vector feature(const FeatureMap& map, const Vector& x, Label y) { return map(x, y); }

/// A randomized classification rule: maps an instance and its test weight
/// alpha(x) to a probability vector over labels 1..k.
using Rule = std::function<Vector(const Vector& x, double alpha)>;

enum class LossKind { ZeroOne, Log };

inline const char* to_string(LossKind kind) { return kind == LossKind::ZeroOne ? "zero-one" : "log"; }

inline LossKind loss_from_string(const std::string& s)
{
    if (s == "zero-one" || s == "01" || s == "0-1")
        return LossKind::ZeroOne;
    if (s == "log")
        return LossKind::Log;
    throw InvalidInput("unknown loss kind: " + s);
}

/// Cap applied to -log(0).
inline constexpr double kLogLossCap = 1e6;

struct LossValue {
    double value = 0.0;
    bool saturated = false;
};

inline LossValue loss(LossKind kind, const Vector& probs, Label y)
{
    if (y < 1 || y > probs.size())
        throw InvalidInput("loss: label out of range");
    const double p = probs[y - 1];
    if (kind == LossKind::ZeroOne)
        return {1.0 - p, false};
    if (p <= 0.0)
        return {kLogLossCap, true};
    const double v = -std::log(p);
    if (v > kLogLossCap)
        return {kLogLossCap, true};
    return {std::max(0.0, v), false};
}

inline double error_rate(const std::vector<Label>& predictions, const std::vector<Label>& truth)
{
    if (predictions.size() != truth.size() || predictions.empty())
        throw InvalidInput("error_rate: length mismatch or empty input");
    std::size_t wrong = 0;
    for (std::size_t i = 0; i < truth.size(); ++i)
        wrong += predictions[i] != truth[i];
    return static_cast<double>(wrong) / static_cast<double>(truth.size());
}

} // namespace dwgcs

#endif
