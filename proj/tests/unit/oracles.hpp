#pragma once

// Reference computations used to check the library. Each one is written
// from the defining formula with no shared code path.

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

/// N . log(theta phi) from dense counts.
inline double multinomial_loglik(const std::vector<double>& counts, const Eigen::VectorXd& theta,
                                 const Eigen::MatrixXd& phi)
{
    double ll = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        if (counts[i] == 0.0)
            continue;
        double p = 0.0;
        for (Eigen::Index l = 0; l < theta.size(); ++l)
            p += theta(l) * phi(l, static_cast<Eigen::Index>(i));
        if (p <= 0.0)
            return -std::numeric_limits<double>::infinity();
        ll += counts[i] * std::log(p);
    }
    return ll;
}

/// Exhaustive search over the simplex grid {step multiples}, k = 2 or 3.
inline Eigen::VectorXd grid_search_mle(const std::vector<double>& counts, const Eigen::MatrixXd& phi, double step)
{
    const auto k = phi.rows();
    const int n = static_cast<int>(std::lround(1.0 / step));
    Eigen::VectorXd best = Eigen::VectorXd::Constant(k, 1.0 / static_cast<double>(k));
    double best_ll = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd t(k);
    auto consider = [&] {
        const double ll = multinomial_loglik(counts, t, phi);
        if (ll > best_ll) {
            best_ll = ll;
            best = t;
        }
    };
    if (k == 2) {
        for (int a = 0; a <= n; ++a) {
            t << a * step, (n - a) * step;
            consider();
        }
    } else {
        for (int a = 0; a <= n; ++a)
            for (int b = 0; a + b <= n; ++b) {
                t << a * step, b * step, (n - a - b) * step;
                consider();
            }
    }
    return best;
}

/// log P(O) by summing over every hidden path (k^n terms).
inline double brute_force_hmm_loglik(const std::vector<int>& obs, const Eigen::MatrixXd& phi,
                                     const Eigen::MatrixXd& trans, const Eigen::VectorXd& pi)
{
    const int k = static_cast<int>(phi.rows());
    const std::size_t n = obs.size();
    std::vector<int> path(n, 0);
    double total = 0.0;
    while (true) {
        double p = pi(path[0]) * phi(path[0], obs[0]);
        for (std::size_t t = 1; t < n; ++t)
            p *= trans(path[t - 1], path[t]) * phi(path[t], obs[t]);
        total += p;
        std::size_t pos = 0;
        while (pos < n && ++path[pos] == k)
            path[pos++] = 0;
        if (pos == n)
            break;
    }
    return std::log(total);
}

/// Unscaled forward recursion.
inline double naive_forward_loglik(const std::vector<int>& obs, const Eigen::MatrixXd& phi,
                                   const Eigen::MatrixXd& trans, const Eigen::VectorXd& pi)
{
    const auto k = phi.rows();
    Eigen::VectorXd a(k);
    for (Eigen::Index l = 0; l < k; ++l)
        a(l) = pi(l) * phi(l, obs[0]);
    for (std::size_t t = 1; t < obs.size(); ++t) {
        Eigen::VectorXd next = Eigen::VectorXd::Zero(k);
        for (Eigen::Index s = 0; s < k; ++s)
            for (Eigen::Index l = 0; l < k; ++l)
                next(s) += a(l) * trans(l, s);
        for (Eigen::Index s = 0; s < k; ++s)
            next(s) *= phi(s, obs[t]);
        a = next;
    }
    return std::log(a.sum());
}

inline Eigen::MatrixXd random_stochastic(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                                         double floor = 0.0)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Eigen::MatrixXd m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c)
            m(r, c) = floor + u(rng);
        m.row(r) /= m.row(r).sum();
    }
    return m;
}

/// Trapezoid AUC from the Mann-Whitney statistic: fraction of
/// (positive, negative) pairs ranked correctly, ties counting one half.
inline double concordance_auc(const std::vector<double>& scores, const std::vector<int>& labels)
{
    double good = 0.0;
    double pairs = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i)
        for (std::size_t j = 0; j < scores.size(); ++j)
            if (labels[i] == 1 && labels[j] == 0) {
                pairs += 1.0;
                good += scores[i] > scores[j] ? 1.0 : scores[i] == scores[j] ? 0.5 : 0.0;
            }
    return good / pairs;
}

/// Damped Newton maximiser; the caller supplies value, gradient and Hessian.
struct NewtonProblem {
    std::function<double(const Eigen::VectorXd&)> value;
    std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
    std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;  // of the value, negative definite
};

inline Eigen::VectorXd newton_maximise(const NewtonProblem& p, Eigen::VectorXd x, int max_iter = 500)
{
    double f = p.value(x);
    for (int it = 0; it < max_iter; ++it) {
        const Eigen::VectorXd g = p.gradient(x);
        const Eigen::MatrixXd h = p.hessian(x);
        const Eigen::VectorXd step = (-h).fullPivLu().solve(g);
        double t = 1.0;
        Eigen::VectorXd next = x + step;
        double fn = p.value(next);
        while (!(fn >= f) && t > 1e-14) {
            t *= 0.5;
            next = x + t * step;
            fn = p.value(next);
        }
        if (!(fn >= f))
            break;
        x = next;
        const double gain = fn - f;
        f = fn;
        if (gain < 1e-15 && step.norm() * t < 1e-12)
            break;
    }
    return x;
}

}  // namespace oracle
