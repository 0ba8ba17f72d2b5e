#include "qfc/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qfc {

void RunningMoments::add(double x)
{
    if (n_ == 0) {
        min_ = max_ = x;
    } else {
        min_ = std::min(min_, x);
        max_ = std::max(max_, x);
    }
    ++n_;
    const double delta = x - mean_;
    mean_ += delta / static_cast<double>(n_);
    m2_ += delta * (x - mean_);
}

void RunningMoments::merge(const RunningMoments& other)
{
    if (other.n_ == 0) {
        return;
    }
    if (n_ == 0) {
        *this = other;
        return;
    }
    const double na = static_cast<double>(n_);
    const double nb = static_cast<double>(other.n_);
    const double delta = other.mean_ - mean_;
    const double n = na + nb;
    mean_ += delta * nb / n;
    m2_ += other.m2_ + delta * delta * na * nb / n;
    n_ += other.n_;
    min_ = std::min(min_, other.min_);
    max_ = std::max(max_, other.max_);
}

double RunningMoments::variance() const
{
    return n_ < 2 ? 0.0 : m2_ / static_cast<double>(n_ - 1);
}

CostStatistics RunningMoments::summary() const
{
    CostStatistics s;
    s.count = n_;
    s.mean = mean_;
    s.stddev = std::sqrt(variance());
    s.std_error = n_ == 0 ? 0.0 : s.stddev / std::sqrt(static_cast<double>(n_));
    s.min = min_;
    s.max = max_;
    return s;
}

CostStatistics CostStatistics::from_samples(std::span<const double> samples)
{
    if (samples.empty()) {
        throw std::invalid_argument("no samples");
    }
    RunningMoments m;
    for (double x : samples) {
        m.add(x);
    }
    return m.summary();
}

} // namespace qfc
