#include "drnet/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "drnet/dsp.hpp"

namespace drnet {

MetricReport compute_metrics(const std::vector<double>& pred, const std::vector<double>& gt) {
    if (pred.size() != gt.size()) throw std::invalid_argument("compute_metrics: length mismatch");
    if (pred.size() < 2) throw std::invalid_argument("compute_metrics: need at least 2 pairs");
    const size_t n = pred.size();
    for (double g : gt) {
        if (g <= 0.0) throw std::invalid_argument("compute_metrics: ground-truth HR must be positive");
    }

    MetricReport m;
    m.count = static_cast<int>(n);
    double esum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double e = pred[i] - gt[i];
        esum += e;
        m.mae += std::fabs(e);
        m.rmse += e * e;
        m.mer += std::fabs(e) / gt[i];
    }
    const double emean = esum / static_cast<double>(n);
    m.mae /= static_cast<double>(n);
    m.rmse = std::sqrt(m.rmse / static_cast<double>(n));
    m.mer /= static_cast<double>(n);
    double var = 0.0;
    for (size_t i = 0; i < n; ++i) {
        const double d = pred[i] - gt[i] - emean;
        var += d * d;
    }
    m.std_err = std::sqrt(var / static_cast<double>(n - 1));
    m.r = pearson(pred, gt);
    return m;
}

std::string metrics_csv(const std::string& method, const MetricReport& m) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%s,%d,%.6f,%.6f,%.6f,%.6f,%.6f\n", method.c_str(), m.count,
                  m.std_err, m.mae, m.rmse, m.mer * 100.0, m.r);
    return std::string("method,count,std,mae,rmse,mer_pct,r\n") + buf;
}

}  // namespace drnet
