#ifndef DWGCS_KERNEL_HPP
#define DWGCS_KERNEL_HPP

#include "dwgcs/core.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace dwgcs {

/// Gaussian kernel k(x, z) = exp(-|x - z|^2 / (2 sigma^2)). k(x, x) = 1, so the
/// RKHS constant kappa is 1.
class RbfKernel {
public:
    explicit RbfKernel(double sigma = 1.0) : sigma_(sigma)
    {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw InvalidInput("rbf kernel: sigma must be positive");
    }

    double sigma() const { return sigma_; }
    static constexpr double kappa() { return 1.0; }

    double operator()(const Vector& x, const Vector& z) const
    {
        if (x.size() != z.size())
            throw InvalidInput("rbf kernel: dimension mismatch");
        return std::exp(-(x - z).squaredNorm() / (2.0 * sigma_ * sigma_));
    }

private:
    double sigma_;
};

inline double eval(const RbfKernel& kernel, const Vector& x, const Vector& z) { return kernel(x, z); }

/// Dense |a| x |b| Gram matrix. Each entry is computed independently, so the
/// result does not depend on evaluation order.
inline Matrix gram(const RbfKernel& kernel, const std::vector<Vector>& a, const std::vector<Vector>& b)
{
    Matrix out(static_cast<Eigen::Index>(a.size()), static_cast<Eigen::Index>(b.size()));
    const bool same = &a == &b;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        for (std::size_t j = 0; j < b.size(); ++j) {
            const auto c = static_cast<Eigen::Index>(j);
            if (same && j < i)
                out(r, c) = out(c, r);
            else
                out(r, c) = kernel(a[i], b[j]);
        }
    }
    return out;
}

/// Mean distance from each point to its min(k_nn, count - 1)-th nearest
/// neighbour over the pooled instances.
inline double bandwidth_heuristic(const std::vector<Vector>& instances, int k_nn = 50)
{
    const std::size_t count = instances.size();
    if (count < 2)
        throw InvalidInput("bandwidth heuristic: need at least two instances");
    if (k_nn < 1)
        throw InvalidInput("bandwidth heuristic: k_nn must be positive");
    const std::size_t rank = std::min<std::size_t>(static_cast<std::size_t>(k_nn), count - 1);

    std::vector<double> dist(count - 1);
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t pos = 0;
        for (std::size_t j = 0; j < count; ++j) {
            if (j == i)
                continue;
            if (instances[j].size() != instances[i].size())
                throw InvalidInput("bandwidth heuristic: dimension mismatch");
            dist[pos++] = (instances[i] - instances[j]).norm();
        }
        std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(rank - 1), dist.end());
        total += dist[rank - 1];
    }
    const double sigma = total / static_cast<double>(count);
    if (!(sigma > 0.0))
        throw InvalidInput("bandwidth heuristic: all instances coincide at the selected neighbour rank");
    return sigma;
}

} // namespace dwgcs

#endif
