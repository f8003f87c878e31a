#pragma once

#include <span>
#include <string>
#include <vector>

#include "s2fr/raster.hpp"

namespace s2fr {

struct MetricsReport {
    double q = 0.0;
    double q2n = 0.0;
    double sam_deg = 0.0;
    double ergas = 0.0;
    double scc = 0.0;
    int window = 32;
    int ratio = 2;
};

/// Universal image quality index averaged over non-overlapping windows
/// (stride = window). Windows with a zero denominator are skipped.
double q_index(std::span<const float> a, std::span<const float> b, int width, int height, int window = 32);

/// Hypercomplex extension of Q; bands are zero-padded to the next power of two.
double q2n(const BandStack& a, const BandStack& b, int window = 32);

/// Mean spectral angle in degrees; pixels where either vector is zero are skipped.
double sam(const BandStack& a, const BandStack& b);

/// 100/R * sqrt(mean_b(RMSE_b^2 / mu_b^2)), mu_b the mean of reference band b.
double ergas(const BandStack& reference, const BandStack& prediction, int ratio = 2);

/// Pearson correlation between 3x3 Laplacian-filtered stacks, pooled over bands and pixels.
double scc(const BandStack& a, const BandStack& b);

MetricsReport evaluate(const BandStack& prediction, const BandStack& reference, int ratio = 2, int window = 32);

// Cayley-Dickson algebra on 2^n components: (a,b)(c,d) = (ac - d*b, da + bc*).
std::vector<double> hypercomplex_multiply(std::span<const double> x, std::span<const double> y);
std::vector<double> hypercomplex_conjugate(std::span<const double> x);

std::string report_csv_header();
std::string report_csv_row(const MetricsReport& report);
MetricsReport parse_report_csv_row(const std::string& row);
std::string report_json(const MetricsReport& report);

}  // namespace s2fr
