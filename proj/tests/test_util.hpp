#ifndef EVO_TEST_UTIL_HPP
#define EVO_TEST_UTIL_HPP

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace evo::testutil {

// Upper critical values of the chi-square distribution at p = 0.01.
inline double chi2_crit_p01(std::size_t df) {
    static const double table[] = {0.0,    6.635,  9.210,  11.345, 13.277, 15.086,
                                   16.812, 18.475, 20.090, 21.666, 23.209};
    if (df == 0 || df >= sizeof(table) / sizeof(table[0]))
        throw std::out_of_range("chi2_crit_p01: df out of table");
    return table[df];
}

/// Pearson chi-square statistic of observed counts vs uniform expectation.
inline double chi2_uniform(const std::vector<long>& counts, double total) {
    double expected = total / double(counts.size());
    double stat = 0.0;
    for (long c : counts) {
        double d = double(c) - expected;
        stat += d * d / expected;
    }
    return stat;
}

/// Chi-square statistic against arbitrary expected probabilities.
inline double chi2_stat(const std::vector<long>& counts, const std::vector<double>& probs,
                        double total) {
    double stat = 0.0;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        double expected = probs[i] * total;
        double d = double(counts[i]) - expected;
        stat += d * d / expected;
    }
    return stat;
}

}  // namespace evo::testutil

#endif
