#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace specgram {

// Standard normal CDF / quantile.
double normal_cdf(double x);
double normal_quantile(double p);  // inverse of normal_cdf, p in (0,1)

// Kolmogorov distance of a sample to the standard normal law.
// Takes the sample by value; sorts internally.
double ks_to_standard_normal(std::vector<double> sample);

// Deterministic pairwise summation (order-independent accuracy; the
// reduction tree is fixed so results do not depend on thread count).
double pairwise_sum(const double* x, std::size_t n);
double pairwise_sum(const std::vector<double>& x);

struct MeanVar {
    double mean;
    double var;       // unbiased (n-1) sample variance
    double se_mean;   // sd/sqrt(n)
};
MeanVar mean_var(const std::vector<double>& x);

// Number of worker threads to use: min(requested, hardware), where the
// request comes from the SPECGRAM_THREADS environment variable (default 1).
int thread_count();

// Static block partition of [0, n) across thread_count() threads.
// f(i) must be safe to run concurrently for distinct i; outputs should be
// written to preallocated per-index slots so numeric results are identical
// for every thread count.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& f);

}  // namespace specgram
