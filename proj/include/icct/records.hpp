// records.hpp: measurement and result records shared by the estimators

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace icct {

/// Shot counts of one red/blue sideband pair at interrogation time t.
struct SidebandRecord {
    double t{0.0};  // seconds
    std::int64_t shots_red{0};
    std::int64_t excited_red{0};
    std::int64_t shots_blue{0};
    std::int64_t excited_blue{0};

    double f_red() const { return static_cast<double>(excited_red) / static_cast<double>(shots_red); }
    double f_blue() const { return static_cast<double>(excited_blue) / static_cast<double>(shots_blue); }
};

struct EstimateAtTime {
    std::size_t record_index{0};
    double t{0.0};
    double gt{0.0};
    double f_red{0.0};
    double f_blue{0.0};
    double ratio{0.0};        // f_r / (f_b - f_r)
    double nbar_raw{0.0};     // root of R_t(nbar) = ratio
    double bias{0.0};         // plug-in asymptotic bias
    double nbar_hat{0.0};     // nbar_raw - bias (or nbar_raw when uncorrected)
    double variance{0.0};
    std::int64_t shots_red{0};
    std::int64_t shots_blue{0};
};

struct DiscardedRecord {
    std::size_t record_index{0};
    double gt{0.0};
    std::string reason;
};

struct EstimateReport {
    std::vector<EstimateAtTime> per_time;  // included estimates only
    double nbar_final{0.0};
    double sigma_final{0.0};
    std::vector<DiscardedRecord> discarded;
    double cutoff_gt{0.0};
};

/// Binomial counts of one ion under the bichromatic drive.
struct BinomialRecord {
    double gt{0.0};
    std::int64_t shots{0};
    std::int64_t excited{0};
};

}  // namespace icct
