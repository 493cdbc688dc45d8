#include "topicreg/random.hpp"

#include <numeric>

#include "topicreg/error.hpp"

namespace topicreg {

std::vector<double> sample_dirichlet(std::span<const double> concentration, Rng& rng)
{
    std::vector<double> draw(concentration.size());
    double total = 0.0;
    for (std::size_t i = 0; i < draw.size(); ++i) {
        require(concentration[i] > 0.0, "Dirichlet concentration must be positive");
        std::gamma_distribution<double> gamma(concentration[i], 1.0);
        draw[i] = gamma(rng);
        total += draw[i];
    }
    if (total <= 0.0) {
        // Every gamma underflowed (tiny concentrations): put the mass on the
        // component with the largest concentration-weighted coin.
        std::vector<double> weights(concentration.begin(), concentration.end());
        draw.assign(draw.size(), 0.0);
        draw[sample_discrete(weights, rng)] = 1.0;
        return draw;
    }
    for (double& x : draw)
        x /= total;
    return draw;
}

std::vector<double> sample_dirichlet(std::size_t dim, double concentration, Rng& rng)
{
    const std::vector<double> c(dim, concentration);
    return sample_dirichlet(c, rng);
}

std::size_t sample_discrete(std::span<const double> weights, Rng& rng)
{
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    require(total > 0.0, "discrete weights sum to zero");
    std::uniform_real_distribution<double> unif(0.0, total);
    double u = unif(rng);
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (u < weights[i])
            return i;
        u -= weights[i];
    }
    // Rounding left u at the top edge; return the last positive weight.
    for (std::size_t i = weights.size(); i-- > 0;)
        if (weights[i] > 0.0)
            return i;
    return weights.size() - 1;
}

}  // namespace topicreg
