#include "s2fr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "s2fr/error.hpp"
#include "s2fr/plane.hpp"

namespace s2fr {

namespace {

void check_same_shape(const BandStack& a, const BandStack& b) {
    require(a.width() == b.width() && a.height() == b.height() && a.band_count() == b.band_count(),
            ErrorKind::Shape,
            "stacks differ in shape: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + "x" +
                std::to_string(a.band_count()) + " vs " + std::to_string(b.width()) + "x" +
                std::to_string(b.height()) + "x" + std::to_string(b.band_count()));
}

void check_window(int width, int height, int window) {
    require(window >= 2, ErrorKind::Config, "quality window must be at least 2");
    require(width >= window && height >= window, ErrorKind::Shape,
            "image " + std::to_string(width) + "x" + std::to_string(height) + " is smaller than the " +
                std::to_string(window) + "-pixel window");
}

int next_power_of_two(int n) {
    int p = 1;
    while (p < n) p *= 2;
    return p;
}

double squared_norm(std::span<const double> x) {
    double s = 0.0;
    for (double v : x) s += v * v;
    return s;
}

void laplacian(std::span<const float> in, int width, int height, std::vector<double>& out) {
    out.resize(in.size());
    for (int y = 0; y < height; ++y) {
        const int yu = reflect_index(y - 1, height), yd = reflect_index(y + 1, height);
        for (int x = 0; x < width; ++x) {
            const int xl = reflect_index(x - 1, width), xr = reflect_index(x + 1, width);
            const double c = in[static_cast<std::size_t>(y) * width + x];
            out[static_cast<std::size_t>(y) * width + x] =
                4.0 * c - in[static_cast<std::size_t>(yu) * width + x] - in[static_cast<std::size_t>(yd) * width + x] -
                in[static_cast<std::size_t>(y) * width + xl] - in[static_cast<std::size_t>(y) * width + xr];
        }
    }
}

}  // namespace

std::vector<double> hypercomplex_conjugate(std::span<const double> x) {
    std::vector<double> out(x.begin(), x.end());
    for (std::size_t i = 1; i < out.size(); ++i) out[i] = -out[i];
    return out;
}

std::vector<double> hypercomplex_multiply(std::span<const double> x, std::span<const double> y) {
    require(x.size() == y.size() && !x.empty() && (x.size() & (x.size() - 1)) == 0, ErrorKind::Shape,
            "hypercomplex operands need equal power-of-two length");
    const std::size_t n = x.size();
    if (n == 1) return {x[0] * y[0]};
    const std::size_t h = n / 2;
    const auto a = x.first(h), b = x.subspan(h);
    const auto c = y.first(h), d = y.subspan(h);
    const auto ac = hypercomplex_multiply(a, c);
    const auto dcb = hypercomplex_multiply(hypercomplex_conjugate(d), b);
    const auto da = hypercomplex_multiply(d, a);
    const auto bcc = hypercomplex_multiply(b, hypercomplex_conjugate(c));
    std::vector<double> out(n);
    for (std::size_t i = 0; i < h; ++i) {
        out[i] = ac[i] - dcb[i];
        out[h + i] = da[i] + bcc[i];
    }
    return out;
}

double q_index(std::span<const float> a, std::span<const float> b, int width, int height, int window) {
    require(a.size() == b.size() && a.size() == static_cast<std::size_t>(width) * height, ErrorKind::Shape,
            "Q inputs differ in size");
    check_window(width, height, window);
    const double n = static_cast<double>(window) * window;
    double sum = 0.0;
    int valid = 0;
    for (int y0 = 0; y0 + window <= height; y0 += window) {
        for (int x0 = 0; x0 + window <= width; x0 += window) {
            double sa = 0, sb = 0;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    sa += a[static_cast<std::size_t>(y) * width + x];
                    sb += b[static_cast<std::size_t>(y) * width + x];
                }
            const double ma = sa / n, mb = sb / n;
            double vaa = 0, vbb = 0, vab = 0;
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    const double da = a[static_cast<std::size_t>(y) * width + x] - ma;
                    const double db = b[static_cast<std::size_t>(y) * width + x] - mb;
                    vaa += da * da;
                    vbb += db * db;
                    vab += da * db;
                }
            vaa /= n;
            vbb /= n;
            vab /= n;
            const double var_sum = vaa + vbb, mean_sq = ma * ma + mb * mb;
            if (var_sum == 0.0 || mean_sq == 0.0) continue;
            // Correlation-contrast term times luminance term; both are exactly 1 for identical windows.
            sum += (2.0 * vab / var_sum) * (2.0 * ma * mb / mean_sq);
            ++valid;
        }
    }
    require(valid > 0, ErrorKind::Numeric, "Q undefined: every window has a zero denominator");
    return sum / valid;
}

double q2n(const BandStack& a, const BandStack& b, int window) {
    check_same_shape(a, b);
    const int width = a.width(), height = a.height();
    check_window(width, height, window);
    const int bands = a.band_count();
    const int dim = next_power_of_two(bands);
    const double n = static_cast<double>(window) * window;

    std::vector<std::span<const float>> pa, pb;
    for (int k = 0; k < bands; ++k) {
        pa.push_back(a.plane(k));
        pb.push_back(b.plane(k));
    }

    double sum = 0.0;
    int valid = 0;
    std::vector<double> za(dim), zb(dim);
    for (int y0 = 0; y0 + window <= height; y0 += window) {
        for (int x0 = 0; x0 + window <= width; x0 += window) {
            std::vector<double> ma(dim, 0.0), mb(dim, 0.0);
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * width + x;
                    for (int k = 0; k < bands; ++k) {
                        ma[k] += pa[k][i];
                        mb[k] += pb[k][i];
                    }
                }
            for (int k = 0; k < dim; ++k) {
                ma[k] /= n;
                mb[k] /= n;
            }
            double var_a = 0.0, var_b = 0.0;
            std::vector<double> cov(dim, 0.0);
            for (int y = y0; y < y0 + window; ++y)
                for (int x = x0; x < x0 + window; ++x) {
                    const std::size_t i = static_cast<std::size_t>(y) * width + x;
                    std::fill(za.begin(), za.end(), 0.0);
                    std::fill(zb.begin(), zb.end(), 0.0);
                    for (int k = 0; k < bands; ++k) {
                        za[k] = pa[k][i] - ma[k];
                        zb[k] = pb[k][i] - mb[k];
                    }
                    var_a += squared_norm(za);
                    var_b += squared_norm(zb);
                    const auto prod = hypercomplex_multiply(za, hypercomplex_conjugate(zb));
                    for (int k = 0; k < dim; ++k) cov[k] += prod[k];
                }
            var_a /= n;
            var_b /= n;
            for (double& v : cov) v /= n;
            const double mean_a2 = squared_norm(ma), mean_b2 = squared_norm(mb);
            const double var_sum = var_a + var_b, mean_sum = mean_a2 + mean_b2;
            if (var_sum == 0.0 || mean_sum == 0.0) continue;
            sum += (2.0 * std::sqrt(squared_norm(cov)) / var_sum) *
                   (2.0 * std::sqrt(mean_a2) * std::sqrt(mean_b2) / mean_sum);
            ++valid;
        }
    }
    require(valid > 0, ErrorKind::Numeric, "Q2n undefined: every window has a zero denominator");
    return sum / valid;
}

double sam(const BandStack& a, const BandStack& b) {
    check_same_shape(a, b);
    std::vector<std::span<const float>> pa, pb;
    for (int k = 0; k < a.band_count(); ++k) {
        pa.push_back(a.plane(k));
        pb.push_back(b.plane(k));
    }
    double sum = 0.0;
    std::size_t valid = 0;
    const int bands = a.band_count();
    for (std::size_t i = 0; i < a.pixels(); ++i) {
        double na = 0, nb = 0;
        for (int k = 0; k < bands; ++k) {
            na += static_cast<double>(pa[k][i]) * pa[k][i];
            nb += static_cast<double>(pb[k][i]) * pb[k][i];
        }
        if (na == 0.0 || nb == 0.0) continue;
        na = std::sqrt(na);
        nb = std::sqrt(nb);
        // 2 atan2(|u - v|, |u + v|) on unit vectors stays accurate near 0 and 180 degrees.
        double diff = 0, plus = 0;
        for (int k = 0; k < bands; ++k) {
            const double u = pa[k][i] / na, v = pb[k][i] / nb;
            diff += (u - v) * (u - v);
            plus += (u + v) * (u + v);
        }
        sum += 2.0 * std::atan2(std::sqrt(diff), std::sqrt(plus));
        ++valid;
    }
    require(valid > 0, ErrorKind::Numeric, "SAM undefined: all pixels have zero norm");
    return sum / static_cast<double>(valid) * 180.0 / std::numbers::pi;
}

double ergas(const BandStack& reference, const BandStack& prediction, int ratio) {
    check_same_shape(reference, prediction);
    require(ratio >= 1, ErrorKind::Config, "ratio must be a positive integer");
    double acc = 0.0;
    for (int k = 0; k < reference.band_count(); ++k) {
        const auto r = reference.plane(k), p = prediction.plane(k);
        double mean = 0.0, se = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            mean += r[i];
            const double d = static_cast<double>(r[i]) - p[i];
            se += d * d;
        }
        mean /= static_cast<double>(r.size());
        require(mean != 0.0, ErrorKind::Numeric,
                "zero-mean reference band " + std::string(band_name(reference.band(k))));
        acc += (se / static_cast<double>(r.size())) / (mean * mean);
    }
    return 100.0 / ratio * std::sqrt(acc / reference.band_count());
}

double scc(const BandStack& a, const BandStack& b) {
    check_same_shape(a, b);
    std::vector<double> la, lb;
    double sa = 0, sb = 0, saa = 0, sbb = 0, sab = 0;
    std::size_t count = 0;
    for (int k = 0; k < a.band_count(); ++k) {
        laplacian(a.plane(k), a.width(), a.height(), la);
        laplacian(b.plane(k), b.width(), b.height(), lb);
        for (std::size_t i = 0; i < la.size(); ++i) {
            sa += la[i];
            sb += lb[i];
        }
        count += la.size();
    }
    const double ma = sa / count, mb = sb / count;
    for (int k = 0; k < a.band_count(); ++k) {
        laplacian(a.plane(k), a.width(), a.height(), la);
        laplacian(b.plane(k), b.width(), b.height(), lb);
        for (std::size_t i = 0; i < la.size(); ++i) {
            const double da = la[i] - ma, db = lb[i] - mb;
            saa += da * da;
            sbb += db * db;
            sab += da * db;
        }
    }
    require(saa > 0.0 && sbb > 0.0, ErrorKind::Numeric, "SCC undefined: high-pass content has zero variance");
    return sab / std::sqrt(saa * sbb);
}

MetricsReport evaluate(const BandStack& prediction, const BandStack& reference, int ratio, int window) {
    check_same_shape(prediction, reference);
    MetricsReport r;
    r.window = window;
    r.ratio = ratio;
    double q = 0.0;
    for (int k = 0; k < reference.band_count(); ++k)
        q += q_index(reference.plane(k), prediction.plane(k), reference.width(), reference.height(), window);
    r.q = q / reference.band_count();
    r.q2n = q2n(reference, prediction, window);
    r.sam_deg = sam(reference, prediction);
    r.ergas = ergas(reference, prediction, ratio);
    r.scc = scc(reference, prediction);
    return r;
}

std::string report_csv_header() { return "q,q2n,sam_deg,ergas,scc"; }

std::string report_csv_row(const MetricsReport& r) {
    char buf[256];
    std::snprintf(buf, sizeof buf, "%.12g,%.12g,%.12g,%.12g,%.12g", r.q, r.q2n, r.sam_deg, r.ergas, r.scc);
    return buf;
}

MetricsReport parse_report_csv_row(const std::string& row) {
    MetricsReport r;
    std::istringstream in(row);
    std::string field;
    std::vector<double> values;
    while (std::getline(in, field, ',')) {
        try {
            values.push_back(std::stod(field));
        } catch (const std::exception&) {
            fail(ErrorKind::Io, "malformed report field '" + field + "'");
        }
    }
    require(values.size() == 5, ErrorKind::Io, "report row needs 5 fields, got " + std::to_string(values.size()));
    r.q = values[0];
    r.q2n = values[1];
    r.sam_deg = values[2];
    r.ergas = values[3];
    r.scc = values[4];
    return r;
}

std::string report_json(const MetricsReport& r) {
    nlohmann::json j{{"q", r.q}, {"q2n", r.q2n}, {"sam_deg", r.sam_deg}, {"ergas", r.ergas}, {"scc", r.scc}};
    return j.dump();
}

}  // namespace s2fr
