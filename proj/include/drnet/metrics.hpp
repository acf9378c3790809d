#pragma once

#include <string>
#include <vector>

namespace drnet {

struct MetricReport {
    double std_err = 0.0;  // sample (n-1) std of the signed error
    double mae = 0.0;
    double rmse = 0.0;
    double mer = 0.0;      // mean(|error|/gt), stored as a fraction
    double r = 0.0;        // Pearson correlation of pred vs gt
    int count = 0;
};

// Paired HR metrics. Requires equal lengths >= 2 and strictly positive
// ground-truth values.
MetricReport compute_metrics(const std::vector<double>& pred, const std::vector<double>& gt);

// "method,count,std,mae,rmse,mer_pct,r" line (with header).
std::string metrics_csv(const std::string& method, const MetricReport& m);

}  // namespace drnet
