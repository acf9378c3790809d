#include "drnet/dsp.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "drnet/io_util.hpp"

namespace drnet {

namespace {

constexpr double kPi = std::numbers::pi;

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void BvpSignal::validate() const {
    if (fs <= 0.0) throw std::invalid_argument("BvpSignal: fs must be positive");
    if (hr_gt && (*hr_gt < 36.0 || *hr_gt > 180.0)) {
        throw std::invalid_argument("BvpSignal: hr_gt " + std::to_string(*hr_gt) +
                                    " outside [36,180] bpm");
    }
}

// --------------------------------------------------------------------------
// Butterworth bandpass design
// --------------------------------------------------------------------------

BandpassFilter butter_bandpass(int order, double low, double high, double fs) {
    if (order <= 0 || order % 2 != 0) {
        throw std::invalid_argument("butter_bandpass: order must be a positive multiple of 2");
    }
    if (!(0.0 < low && low < high && high < fs / 2.0)) {
        throw std::invalid_argument("butter_bandpass: band [" + std::to_string(low) + "," +
                                    std::to_string(high) + "] outside (0, fs/2)");
    }
    using cd = std::complex<double>;
    const int n_proto = order / 2;
    const double fs2 = 2.0 * fs;
    const double wl = fs2 * std::tan(kPi * low / fs);   // pre-warped edges, rad/s
    const double wh = fs2 * std::tan(kPi * high / fs);
    const double w0 = std::sqrt(wl * wh);
    const double bw = wh - wl;

    // Lowpass-to-bandpass transform: a prototype pole p yields the two roots
    // of s^2 - (p*bw)*s + w0^2 = 0. Sections are built from pole pairs whose
    // product and sum are real: either a bandpass pole with its conjugate
    // (from the conjugate prototype pole), or the real-root pair coming from
    // a real prototype pole when n_proto is odd.
    struct PolePair { cd s1, s2; };
    std::vector<PolePair> pairs;
    for (int k = 0; k < n_proto / 2; ++k) {
        const double theta = kPi / 2.0 + kPi * (2.0 * k + 1.0) / (2.0 * n_proto);
        const cd pb = cd(std::cos(theta), std::sin(theta)) * bw;
        const cd disc = std::sqrt(pb * pb - 4.0 * w0 * w0);
        for (const cd s : {(pb + disc) / 2.0, (pb - disc) / 2.0}) {
            pairs.push_back({s, std::conj(s)});
        }
    }
    if (n_proto % 2 == 1) {
        const cd pb(-bw, 0.0);
        const cd disc = std::sqrt(pb * pb - 4.0 * cd(w0 * w0, 0.0));
        pairs.push_back({(pb + disc) / 2.0, (pb - disc) / 2.0});
    }

    // Bilinear transform. Analog zeros: n_proto at s=0 -> z=1; the n_proto
    // zeros at infinity land at z=-1. Gain follows the zpk bilinear rule:
    // k_z = k_a * prod(fs2 - s_zero) / prod(fs2 - s_pole), k_a = bw^n_proto.
    cd denom_prod(1.0, 0.0);
    for (const auto& pp : pairs) denom_prod *= (fs2 - pp.s1) * (fs2 - pp.s2);
    const double gain = (std::pow(cd(bw * fs2, 0.0), n_proto) / denom_prod).real();

    BandpassFilter f;
    f.fs = fs;
    f.low = low;
    f.high = high;
    bool first = true;
    for (const auto& pp : pairs) {
        const cd z1 = (fs2 + pp.s1) / (fs2 - pp.s1);
        const cd z2 = (fs2 + pp.s2) / (fs2 - pp.s2);
        Biquad s{};
        // numerator (z-1)(z+1) = z^2 - 1 per section; overall gain into the first
        s.b0 = first ? gain : 1.0;
        s.b1 = 0.0;
        s.b2 = -s.b0;
        s.a1 = -(z1 + z2).real();
        s.a2 = (z1 * z2).real();
        f.sections.push_back(s);
        first = false;
    }
    if (!f.stable()) throw std::runtime_error("butter_bandpass: designed filter is unstable");
    return f;
}

double BandpassFilter::magnitude(double f) const {
    using cd = std::complex<double>;
    const cd z = std::polar(1.0, 2.0 * kPi * f / fs);
    const cd zi = 1.0 / z;
    cd h(1.0, 0.0);
    for (const Biquad& s : sections) {
        h *= (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
    }
    return std::abs(h);
}

bool BandpassFilter::stable() const {
    for (const Biquad& s : sections) {
        // roots of z^2 + a1 z + a2 inside unit circle (Jury criterion)
        if (!(std::fabs(s.a2) < 1.0 && std::fabs(s.a1) < 1.0 + s.a2)) return false;
    }
    return true;
}

// --------------------------------------------------------------------------
// Filtering
// --------------------------------------------------------------------------

namespace {

// Direct form II transposed cascade with steady-state initial conditions
// scaled by the first input sample (matches sosfilt_zi semantics).
void cascade_filter_zi(const BandpassFilter& f, std::vector<double>& x) {
    if (x.empty()) return;
    const double x0 = x[0];
    double cum = 1.0;  // DC gain of the sections already applied
    for (const Biquad& s : f.sections) {
        const double denom = 1.0 + s.a1 + s.a2;
        const double zi1 = ((s.b1 - s.a1 * s.b0) + (s.b2 - s.a2 * s.b0)) / denom;
        const double zi2 = s.b2 - s.a2 * s.b0 - s.a2 * zi1;
        double z1 = zi1 * cum * x0;
        double z2 = zi2 * cum * x0;
        for (double& v : x) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
        cum *= (s.b0 + s.b1 + s.b2) / denom;
    }
}

}  // namespace

std::vector<double> filter_forward(const std::vector<double>& x, const BandpassFilter& f) {
    std::vector<double> y = x;
    for (const Biquad& s : f.sections) {
        double z1 = 0.0, z2 = 0.0;
        for (double& v : y) {
            const double in = v;
            const double out = s.b0 * in + z1;
            z1 = s.b1 * in - s.a1 * out + z2;
            z2 = s.b2 * in - s.a2 * out;
            v = out;
        }
    }
    return y;
}

BvpSignal filter_zero_phase(const BvpSignal& sig, const BandpassFilter& f) {
    const int order = static_cast<int>(f.sections.size()) * 2;
    const int padlen = 3 * order;
    const int n = sig.length();
    if (n <= 6 * order) {
        throw std::invalid_argument("filter_zero_phase: signal length " + std::to_string(n) +
                                    " must exceed 6*order = " + std::to_string(6 * order));
    }
    const auto& x = sig.samples;
    std::vector<double> ext;
    ext.reserve(static_cast<size_t>(n + 2 * padlen));
    for (int i = padlen; i >= 1; --i) ext.push_back(2.0 * x[0] - x[static_cast<size_t>(i)]);
    ext.insert(ext.end(), x.begin(), x.end());
    for (int i = 1; i <= padlen; ++i) {
        ext.push_back(2.0 * x[static_cast<size_t>(n - 1)] - x[static_cast<size_t>(n - 1 - i)]);
    }

    cascade_filter_zi(f, ext);
    std::reverse(ext.begin(), ext.end());
    cascade_filter_zi(f, ext);
    std::reverse(ext.begin(), ext.end());

    BvpSignal out;
    out.fs = sig.fs;
    out.hr_gt = sig.hr_gt;
    out.samples.assign(ext.begin() + padlen, ext.begin() + padlen + n);
    return out;
}

// --------------------------------------------------------------------------
// Natural cubic spline
// --------------------------------------------------------------------------

CubicSpline::CubicSpline(std::vector<double> t, std::vector<double> y)
    : t_(std::move(t)), y_(std::move(y)) {
    const size_t n = t_.size();
    if (n < 4) throw std::invalid_argument("CubicSpline: need at least 4 points");
    if (y_.size() != n) throw std::invalid_argument("CubicSpline: t/y length mismatch");
    for (size_t i = 1; i < n; ++i) {
        if (!(t_[i] > t_[i - 1])) {
            throw std::invalid_argument("CubicSpline: timestamps must be strictly increasing");
        }
    }
    // Natural boundary: second derivative zero at both ends. Thomas solve.
    m_.assign(n, 0.0);
    std::vector<double> diag(n, 0.0), rhs(n, 0.0), upper(n, 0.0);
    for (size_t i = 1; i + 1 < n; ++i) {
        const double h0 = t_[i] - t_[i - 1];
        const double h1 = t_[i + 1] - t_[i];
        diag[i] = 2.0 * (h0 + h1);
        upper[i] = h1;
        rhs[i] = 6.0 * ((y_[i + 1] - y_[i]) / h1 - (y_[i] - y_[i - 1]) / h0);
    }
    for (size_t i = 2; i + 1 < n; ++i) {
        const double h0 = t_[i] - t_[i - 1];  // lower coefficient of row i
        const double w = h0 / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    for (size_t i = n - 2; i >= 1; --i) {
        m_[i] = (rhs[i] - upper[i] * m_[i + 1]) / diag[i];
        if (i == 1) break;
    }
}

double CubicSpline::operator()(double x) const {
    const size_t n = t_.size();
    if (x <= t_.front()) x = t_.front();
    if (x >= t_.back()) x = t_.back();
    const auto it = std::upper_bound(t_.begin(), t_.end(), x);
    size_t i = static_cast<size_t>(std::distance(t_.begin(), it));
    if (i == 0) i = 1;
    if (i >= n) i = n - 1;
    const double h = t_[i] - t_[i - 1];
    const double a = (t_[i] - x) / h;
    const double b = (x - t_[i - 1]) / h;
    return a * y_[i - 1] + b * y_[i] +
           ((a * a * a - a) * m_[i - 1] + (b * b * b - b) * m_[i]) * h * h / 6.0;
}

BvpSignal resample_cubic(const BvpSignal& sig, double target_fs) {
    if (sig.length() < 4) throw std::invalid_argument("resample_cubic: need at least 4 samples");
    if (target_fs <= 0.0) throw std::invalid_argument("resample_cubic: target fs must be positive");
    const int n = sig.length();
    std::vector<double> t(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) t[static_cast<size_t>(i)] = static_cast<double>(i) / sig.fs;
    CubicSpline spline(t, sig.samples);
    const double t_last = t.back();
    const int m = static_cast<int>(std::floor(t_last * target_fs + 1e-9)) + 1;
    BvpSignal out;
    out.fs = target_fs;
    out.hr_gt = sig.hr_gt;
    out.samples.resize(static_cast<size_t>(m));
    for (int j = 0; j < m; ++j) {
        out.samples[static_cast<size_t>(j)] = spline(static_cast<double>(j) / target_fs);
    }
    return out;
}

// --------------------------------------------------------------------------
// Spectral estimation
// --------------------------------------------------------------------------

void fft_radix2(std::vector<double>& re, std::vector<double>& im) {
    const size_t n = re.size();
    if (im.size() != n || !is_pow2(static_cast<int>(n))) {
        throw std::invalid_argument("fft_radix2: length must be a power of two");
    }
    // bit reversal
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) {
            std::swap(re[i], re[j]);
            std::swap(im[i], im[j]);
        }
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = -2.0 * kPi / static_cast<double>(len);
        const double wr = std::cos(ang), wi = std::sin(ang);
        for (size_t i = 0; i < n; i += len) {
            double cr = 1.0, ci = 0.0;
            for (size_t k = 0; k < len / 2; ++k) {
                const size_t a = i + k, b = i + k + len / 2;
                const double tr = re[b] * cr - im[b] * ci;
                const double ti = re[b] * ci + im[b] * cr;
                re[b] = re[a] - tr;
                im[b] = im[a] - ti;
                re[a] += tr;
                im[a] += ti;
                const double ncr = cr * wr - ci * wi;
                ci = cr * wi + ci * wr;
                cr = ncr;
            }
        }
    }
}

PsdResult psd(const BvpSignal& sig, int nfft) {
    const int n = sig.length();
    if (n < 2) throw std::invalid_argument("psd: need at least 2 samples");
    if (nfft < n) throw std::invalid_argument("psd: nfft must be >= signal length");
    if (!is_pow2(nfft)) throw std::invalid_argument("psd: nfft must be a power of two");

    double mean = 0.0;
    for (double v : sig.samples) mean += v;
    mean /= n;

    std::vector<double> re(static_cast<size_t>(nfft), 0.0), im(static_cast<size_t>(nfft), 0.0);
    double win_energy = 0.0;
    for (int i = 0; i < n; ++i) {
        const double w = 0.5 - 0.5 * std::cos(2.0 * kPi * i / (n - 1));  // Hann
        re[static_cast<size_t>(i)] = (sig.samples[static_cast<size_t>(i)] - mean) * w;
        win_energy += w * w;
    }
    fft_radix2(re, im);

    PsdResult r;
    const int half = nfft / 2;
    r.freqs.resize(static_cast<size_t>(half) + 1);
    r.power.resize(static_cast<size_t>(half) + 1);
    const double scale = 1.0 / (sig.fs * win_energy);
    for (int k = 0; k <= half; ++k) {
        const double mag2 = re[static_cast<size_t>(k)] * re[static_cast<size_t>(k)] +
                            im[static_cast<size_t>(k)] * im[static_cast<size_t>(k)];
        double p = mag2 * scale;
        if (k != 0 && k != half) p *= 2.0;  // one-sided
        r.freqs[static_cast<size_t>(k)] = static_cast<double>(k) * sig.fs / nfft;
        r.power[static_cast<size_t>(k)] = p;
    }
    return r;
}

double estimate_hr(const BvpSignal& sig, double band_lo, double band_hi, int nfft) {
    const PsdResult r = psd(sig, nfft);
    int best = -1;
    for (size_t k = 0; k < r.freqs.size(); ++k) {
        if (r.freqs[k] < band_lo || r.freqs[k] > band_hi) continue;
        if (best < 0 || r.power[k] > r.power[static_cast<size_t>(best)]) best = static_cast<int>(k);
    }
    if (best < 0) throw std::invalid_argument("estimate_hr: no PSD bins inside the band");
    return 60.0 * r.freqs[static_cast<size_t>(best)];
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
    if (x.size() < 2) throw std::invalid_argument("pearson: need at least 2 samples");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson: constant input");
    return sxy / std::sqrt(sxx * syy);
}

// --------------------------------------------------------------------------
// BVP CSV
// --------------------------------------------------------------------------

BvpSignal load_bvp_csv(const std::string& path) {
    const std::string text = read_text_file(path);
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty bvp file " + path);
    // header: "# bvp v1, fs=<hz>"
    if (line.rfind("# bvp v1", 0) != 0) throw IoError(path + ": missing '# bvp v1' header");
    const size_t fs_pos = line.find("fs=");
    if (fs_pos == std::string::npos) throw IoError(path + ": header missing fs=");
    BvpSignal sig;
    sig.fs = parse_double(line.substr(fs_pos + 3), path + " fs");
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty()) continue;
        if (t.rfind("hr=", 0) == 0) {
            sig.hr_gt = parse_double(t.substr(3), path + " hr");
            break;
        }
        sig.samples.push_back(parse_double(t, path + " sample"));
    }
    sig.validate();
    return sig;
}

void save_bvp_csv(const std::string& path, const BvpSignal& sig) {
    sig.validate();
    std::ostringstream os;
    os << "# bvp v1, fs=" << fmt_double(sig.fs) << "\n";
    for (double v : sig.samples) os << fmt_double(v) << "\n";
    if (sig.hr_gt) os << "hr=" << fmt_double(*sig.hr_gt) << "\n";
    write_text_file(path, os.str());
}

}  // namespace drnet
