#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "s2fr/error.hpp"
#include "s2fr/mtf.hpp"
#include "test_util.hpp"

using namespace s2fr;

namespace {

BandStack single(int w, int h, std::vector<float> data, double gsd = 10.0) {
    return BandStack(w, h, {BandId::B2}, gsd, std::move(data));
}

}  // namespace

TEST_SUITE("mtf") {

TEST_CASE("sigma inverts the Gaussian frequency response") {
    CHECK(mtf_sigma(std::exp(-std::numbers::pi * std::numbers::pi / 8.0), 2) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK_THROWS_AS(mtf_sigma(0.0, 2), Error);
    CHECK_THROWS_AS(mtf_sigma(1.0, 2), Error);
    CHECK_THROWS_AS(design_mtf_kernel(0.3, 2, 40), Error);
}

TEST_CASE("kernel taps match an independently sampled Gaussian") {
    for (double g : {0.15, 0.275, 0.35}) {
        const MtfKernel k = design_mtf_kernel(g, 2, 41);
        const double sigma = 2.0 / std::numbers::pi * std::sqrt(2.0 * std::log(1.0 / g));
        const auto ref = oracle::gaussian_taps(sigma, 41);
        double sum = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(k.taps[i] == doctest::Approx(ref[i]).epsilon(1e-9).scale(1e-12));
            sum += k.taps[i];
        }
        CHECK(std::abs(sum - 1.0) < 1e-6);
        for (int dy = -20; dy <= 20; ++dy)
            for (int dx = -20; dx <= 20; ++dx) {
                CHECK(k.tap(dx, dy) == k.tap(-dx, dy));
                CHECK(k.tap(dx, dy) == k.tap(dx, -dy));
            }
    }
}

TEST_CASE("measured Nyquist gain matches the design value") {
    for (double g : {0.15, 0.275, 0.35}) {
        const MtfKernel k = design_mtf_kernel(g, 2, 41);
        const double measured = oracle::dtft_magnitude(k.taps, 41, 0.25, 0.0);
        CHECK(std::abs(measured - g) < 1e-2);
        CHECK(kernel_response(k, 0.25, 0.0) == doctest::Approx(measured).epsilon(1e-12));
        CHECK(kernel_response(k, 0.0, 0.0) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("kernel dump has one row per line") {
    const auto text = format_kernel(design_mtf_kernel(0.275, 2, 5));
    CHECK(std::count(text.begin(), text.end(), '\n') == 5);
}

TEST_CASE("per-band gains come from the settings") {
    MtfSettings s;
    s.gains[BandId::B11] = 0.2;
    const auto ks = make_kernels(kBands20, s);
    CHECK(ks[4].nyquist_gain == 0.2);
    CHECK(ks[0].nyquist_gain == 0.275);
    CHECK(ks[4].band == BandId::B11);
}

TEST_CASE("lowpass keeps constants and reproduces the kernel from an impulse") {
    const MtfKernel k = design_mtf_kernel(0.275, 2, 41);
    const auto c = lowpass(single(13, 9, std::vector<float>(117, 2.5f)), std::vector<MtfKernel>{k});
    for (float v : c.samples()) CHECK(v == doctest::Approx(2.5f).epsilon(1e-6));

    const int n = 61;
    std::vector<float> impulse(n * n, 0.0f);
    impulse[30 * n + 30] = 1.0f;
    const auto out = lowpass(single(n, n, impulse), std::vector<MtfKernel>{k});
    for (int dy = -20; dy <= 20; ++dy)
        for (int dx = -20; dx <= 20; ++dx)
            CHECK(out.at(0, 30 + dx, 30 + dy) == doctest::Approx(k.tap(dx, dy)).epsilon(1e-5).scale(1e-7));
}

TEST_CASE("lowpass matches direct convolution on random planes") {
    oracle::Random rng(21);
    for (int size : {7, 41}) {
        const MtfKernel k = design_mtf_kernel(0.275, 2, size);
        for (int trial = 0; trial < 4; ++trial) {
            const int w = rng.integer(3, 16), h = rng.integer(3, 16);
            auto plane = rng.plane(static_cast<std::size_t>(w) * h);
            const auto ref = oracle::convolve(plane, w, h, k.taps, size);
            const auto out = lowpass(single(w, h, plane), std::vector<MtfKernel>{k});
            for (std::size_t i = 0; i < ref.size(); ++i) CHECK(std::abs(out.samples()[i] - ref[i]) < 1e-5);
        }
    }
}

TEST_CASE("lowpass is linear") {
    oracle::Random rng(4);
    const MtfKernel k = design_mtf_kernel(0.275, 2, 41);
    const auto x = rng.plane(20 * 18), y = rng.plane(20 * 18);
    std::vector<float> mix(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) mix[i] = 2.0f * x[i] - 0.5f * y[i];
    const std::vector<MtfKernel> ks{k};
    const auto lx = lowpass(single(20, 18, x), ks), ly = lowpass(single(20, 18, y), ks),
               lm = lowpass(single(20, 18, mix), ks);
    for (std::size_t i = 0; i < mix.size(); ++i)
        CHECK(std::abs(lm.samples()[i] - (2.0f * lx.samples()[i] - 0.5f * ly.samples()[i])) < 1e-4);
}

TEST_CASE("kernel count must match band count") {
    oracle::Random rng(1);
    const auto s = testutil::random_stack(rng, 8, 8, testutil::bands10(), 10.0);
    CHECK_THROWS_AS(lowpass(s, make_kernels(std::vector<BandId>{BandId::B2}, {})), Error);
}

TEST_CASE("decimate examples") {
    std::vector<float> ramp(16);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) ramp[i * 4 + j] = static_cast<float>(4 * i + j);
    const auto d = decimate(single(4, 4, ramp), 2);
    CHECK(d.width() == 2);
    CHECK(d.gsd() == 20.0);
    CHECK(d.at(0, 0, 0) == 0.0f);
    CHECK(d.at(0, 1, 0) == 2.0f);
    CHECK(d.at(0, 0, 1) == 8.0f);
    CHECK(d.at(0, 1, 1) == 10.0f);
    const auto c = decimate(single(6, 4, std::vector<float>(24, 7.0f)), 2);
    CHECK(c.width() == 3);
    CHECK(c.height() == 2);
    for (float v : c.samples()) CHECK(v == 7.0f);
    CHECK_THROWS_AS(decimate(single(5, 4, std::vector<float>(20)), 2), Error);
}

TEST_CASE("upsample keeps constants, interpolates through the nodes and reproduces ramps") {
    const auto c = upsample(single(5, 3, std::vector<float>(15, -1.25f), 20.0), 2);
    CHECK(c.width() == 10);
    CHECK(c.height() == 6);
    CHECK(c.gsd() == 10.0);
    for (float v : c.samples()) CHECK(v == doctest::Approx(-1.25f).epsilon(1e-6));

    oracle::Random rng(8);
    const auto s = testutil::random_stack(rng, 9, 7, testutil::bands20(), 20.0);
    const auto back = decimate(upsample(s, 2), 2);
    for (std::size_t i = 0; i < s.samples().size(); ++i) CHECK(std::abs(back.samples()[i] - s.samples()[i]) < 1e-4);

    const int w = 12, h = 10;
    std::vector<float> lin(w * h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) lin[y * w + x] = static_cast<float>(0.3 * x - 0.7 * y + 2.0);
    const auto up = upsample(single(w, h, lin), 2);
    // Fine pixel (X, Y) sits at coarse coordinate (X/2, Y/2); stay two coarse pixels from the border.
    for (int y = 4; y < 2 * h - 6; ++y)
        for (int x = 4; x < 2 * w - 6; ++x)
            CHECK(std::abs(up.at(0, x, y) - (0.3 * x / 2.0 - 0.7 * y / 2.0 + 2.0)) < 1e-4);
}

TEST_CASE("cubic weights form a partition of unity") {
    CHECK(cubic_weight(0.0) == 1.0);
    CHECK(cubic_weight(1.0) == 0.0);
    CHECK(cubic_weight(2.0) == 0.0);
    for (double f : {0.1, 0.25, 0.5, 0.9})
        CHECK(cubic_weight(f + 1) + cubic_weight(f) + cubic_weight(1 - f) + cubic_weight(2 - f) ==
              doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("highpass complements lowpass") {
    const std::vector<MtfKernel> ks{design_mtf_kernel(0.275, 2, 41)};
    const auto zero = highpass(single(7, 7, std::vector<float>(49, 3.0f)), ks);
    for (float v : zero.samples()) CHECK(std::abs(v) < 1e-6);

    oracle::Random rng(12);
    const auto x = rng.plane(15 * 11);
    const auto hp = highpass(single(15, 11, x), ks);
    const auto lp = lowpass(single(15, 11, x), ks);
    for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(hp.samples()[i] == x[i] - lp.samples()[i]);
        CHECK(std::abs(hp.samples()[i] + lp.samples()[i] - x[i]) <= 1e-6f);
    }

    const int n = 45;
    std::vector<float> impulse(n * n, 0.0f);
    impulse[22 * n + 22] = 1.0f;
    const auto hi = highpass(single(n, n, impulse), ks);
    for (int dy = -20; dy <= 20; ++dy)
        for (int dx = -20; dx <= 20; ++dx) {
            const double expected = (dx == 0 && dy == 0 ? 1.0 : 0.0) - ks[0].tap(dx, dy);
            CHECK(std::abs(hi.at(0, 22 + dx, 22 + dy) - expected) < 1e-6);
        }
}

TEST_CASE("strided lowpass equals lowpass then decimate bit for bit") {
    oracle::Random rng(30);
    const MtfKernel k = design_mtf_kernel(0.275, 2, 41);
    const auto x = rng.plane(24 * 18);
    std::vector<float> full(x.size()), strided(12 * 9);
    lowpass_plane<float>(x, 24, 18, k, full);
    lowpass_plane<float>(x, 24, 18, k, strided, 2);
    for (int y = 0; y < 9; ++y)
        for (int xx = 0; xx < 12; ++xx) CHECK(strided[y * 12 + xx] == full[(2 * y) * 24 + 2 * xx]);
}

TEST_CASE("lowpass adjoint satisfies the inner-product identity") {
    oracle::Random rng(31);
    const MtfKernel k = design_mtf_kernel(0.3, 2, 41);
    for (int stride : {1, 2}) {
        const int w = 14, h = 10;
        const int ow = w / stride, oh = h / stride;
        std::vector<double> x(w * h), y(ow * oh), lx(ow * oh), aty(w * h);
        for (double& v : x) v = rng.uniform(-1, 1);
        for (double& v : y) v = rng.uniform(-1, 1);
        lowpass_plane<double>(x, w, h, k, lx, stride);
        lowpass_adjoint_plane<double>(y, w, h, k, aty, stride);
        double lhs = 0, rhs = 0;
        for (std::size_t i = 0; i < y.size(); ++i) lhs += lx[i] * y[i];
        for (std::size_t i = 0; i < x.size(); ++i) rhs += x[i] * aty[i];
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-12));
    }
}

TEST_CASE("wald downgrade") {
    const auto k10 = make_kernels(kBands10, {});
    const auto k20 = make_kernels(kBands20, {});
    BandStack s10(16, 16, testutil::bands10(), 10.0, std::vector<float>(16 * 16 * 4, 2.0f));
    BandStack s20(8, 8, testutil::bands20(), 20.0, std::vector<float>(8 * 8 * 6, 5.0f));
    const auto low = wald_downgrade(s10, s20, k10, k20);
    CHECK(low.stack10.width() == 8);
    CHECK(low.stack20.width() == 4);
    CHECK(low.stack10.gsd() == 20.0);
    CHECK(low.stack20.gsd() == 40.0);
    for (float v : low.stack10.samples()) CHECK(v == doctest::Approx(2.0f).epsilon(1e-6));
    for (float v : low.stack20.samples()) CHECK(v == doctest::Approx(5.0f).epsilon(1e-6));

    oracle::Random rng(40);
    const auto r10 = testutil::random_stack(rng, 24, 20, testutil::bands10(), 10.0);
    const auto r20 = testutil::random_stack(rng, 12, 10, testutil::bands20(), 20.0);
    const auto d = wald_downgrade(r10, r20, k10, k20);
    CHECK(d.stack10.identical(decimate(lowpass(r10, k10), 2)));
    CHECK(d.stack20.identical(decimate(lowpass(r20, k20), 2)));

    CHECK_THROWS_AS(wald_downgrade(r10, crop(r20, 0, 0, 10, 10), k10, k20), Error);
    const auto odd20 = testutil::random_stack(rng, 5, 5, testutil::bands20(), 20.0);
    const auto odd10 = testutil::random_stack(rng, 10, 10, testutil::bands10(), 10.0);
    CHECK_THROWS_AS(wald_downgrade(odd10, odd20, k10, k20), Error);
}

}
