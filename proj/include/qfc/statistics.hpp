#pragma once

#include <cstddef>
#include <span>

namespace qfc {

/// Monte Carlo summary of realized costs.
struct CostStatistics {
    std::size_t count = 0;
    double mean = 0.0;
    double stddev = 0.0; ///< sample (n - 1) standard deviation; 0 when count < 2
    double std_error = 0.0; ///< stddev / sqrt(count)
    double min = 0.0;
    double max = 0.0;

    static CostStatistics from_samples(std::span<const double> samples);
};

/// Streaming mean/variance accumulator. Merging is exact up to rounding and
/// independent of how samples were partitioned.
class RunningMoments {
public:
    void add(double x);
    void merge(const RunningMoments& other);

    std::size_t count() const { return n_; }
    double mean() const { return mean_; }
    double variance() const; ///< sample variance
    CostStatistics summary() const;

private:
    std::size_t n_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double min_ = 0.0;
    double max_ = 0.0;
};

} // namespace qfc
