#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "s2fr/detail_ref.hpp"
#include "s2fr/error.hpp"
#include "test_util.hpp"

using namespace s2fr;

namespace {

CorrelationField field_from(int w, int h, const std::vector<std::array<float, 4>>& values) {
    CorrelationField f;
    f.window_radius = 1;
    f.x = PixelField(w, h, 4);
    for (std::size_t i = 0; i < values.size(); ++i)
        for (int k = 0; k < 4; ++k) f.x.plane(k)[i] = values[i][k];
    return f;
}

BandStack replicate(const std::vector<float>& plane, int w, int h) {
    std::vector<float> data;
    for (int k = 0; k < 4; ++k) data.insert(data.end(), plane.begin(), plane.end());
    return BandStack(w, h, testutil::bands10(), 10.0, data);
}

const std::vector<MtfKernel>& kernels10() {
    static const auto k = make_kernels(kBands10, {});
    return k;
}

const std::vector<MtfKernel>& kernels20() {
    static const auto k = make_kernels(kBands20, {});
    return k;
}

}  // namespace

TEST_SUITE("detail_ref") {

TEST_CASE("self and anti correlation") {
    oracle::Random rng(2);
    const auto a = rng.plane(20 * 14);
    std::vector<float> neg(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) neg[i] = -a[i];
    for (float r : local_correlation(a, a, 20, 14, 2)) CHECK(std::abs(r - 1.0f) < 1e-6);
    for (float r : local_correlation(a, neg, 20, 14, 2)) CHECK(std::abs(r + 1.0f) < 1e-6);
}

TEST_CASE("flat windows give zero correlation") {
    oracle::Random rng(3);
    const auto a = rng.plane(10 * 10);
    const std::vector<float> flat(100, 4.0f);
    for (float r : local_correlation(a, flat, 10, 10, 1)) CHECK(r == 0.0f);
}

TEST_CASE("local correlation matches a brute-force window loop on every pixel") {
    oracle::Random rng(5);
    for (int trial = 0; trial < 6; ++trial) {
        const int w = rng.integer(3, 16), h = rng.integer(3, 16), r = rng.integer(1, 3);
        const auto a = rng.plane(w * h);
        auto b = rng.plane(w * h);
        // Partly correlated so values cover the whole range.
        for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.6f * a[i] + 0.4f * b[i];
        const auto got = local_correlation(a, b, w, h, r);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                CHECK(std::abs(got[y * w + x] - oracle::window_pearson(a, b, w, h, x, y, r)) < 1e-6);
    }
}

TEST_CASE("12x12 center pixel against the window oracle") {
    oracle::Random rng(12);
    const auto a = rng.plane(144), b = rng.plane(144);
    const auto got = local_correlation(a, b, 12, 12, 2);
    CHECK(std::abs(got[6 * 12 + 6] - oracle::window_pearson(a, b, 12, 12, 6, 6, 2)) < 1e-6);
}

TEST_CASE("correlation input validation") {
    const std::vector<float> a(16), b(15);
    CHECK_THROWS_AS(local_correlation(a, b, 4, 4, 1), Error);
    CHECK_THROWS_AS(local_correlation(a, a, 4, 4, 0), Error);
    oracle::Random rng(1);
    const auto s = testutil::random_stack(rng, 4, 4, testutil::bands10(), 10.0);
    CHECK_THROWS_AS(correlation_field(b, s, 1), Error);
}

TEST_CASE("correlation field examples") {
    oracle::Random rng(7);
    const int w = 14, h = 11;
    auto s = testutil::random_stack(rng, w, h, testutil::bands10(), 10.0);
    const auto target = testutil::to_vector(s.plane(2));
    const auto f = correlation_field(target, s, 2);
    CHECK(f.x.depth == 4);
    for (float v : f.x.plane(2)) CHECK(std::abs(v - 1.0f) < 1e-6);
    for (int k = 0; k < 4; ++k) {
        const auto direct = local_correlation(target, s.plane(k), w, h, 2);
        for (auto [x, y] : {std::pair{0, 0}, std::pair{7, 5}, std::pair{13, 10}})
            CHECK(f.x.at(x, y, k) == direct[y * w + x]);
    }

    const auto same = replicate(rng.plane(w * h), w, h);
    const auto other = rng.plane(w * h);
    const auto g = correlation_field(other, same, 2);
    for (std::size_t i = 0; i < g.x.pixels(); ++i)
        for (int k = 1; k < 4; ++k) CHECK(g.x.plane(k)[i] == g.x.plane(0)[i]);
}

TEST_CASE("softmax examples") {
    const auto f = field_from(1, 1, {{1.0f, 0.0f, 0.0f, 0.0f}});
    for (int k = 0; k < 4; ++k) CHECK(std::abs(softmax_weights(f, 0.0).w.plane(k)[0] - 0.25f) < 1e-6);

    const double e5 = std::exp(5.0);
    const auto w = softmax_weights(f, 5.0).w;
    CHECK(w.plane(0)[0] == doctest::Approx(e5 / (e5 + 3.0)).epsilon(1e-6));
    CHECK(w.plane(0)[0] == doctest::Approx(0.980187).epsilon(1e-6));
    for (int k = 1; k < 4; ++k) CHECK(w.plane(k)[0] == doctest::Approx(0.00660446).epsilon(1e-5));

    CHECK_THROWS_AS(softmax_weights(f, -1.0), Error);
}

TEST_CASE("softmax is shift invariant and stays on the simplex") {
    oracle::Random rng(9);
    std::vector<std::array<float, 4>> values(64), shifted(64);
    for (std::size_t i = 0; i < values.size(); ++i) {
        const float c = static_cast<float>(rng.uniform(-0.5, 0.5));
        for (int k = 0; k < 4; ++k) {
            values[i][k] = static_cast<float>(rng.uniform(-1, 1));
            shifted[i][k] = values[i][k] + c;
        }
    }
    const auto f = field_from(8, 8, values), g = field_from(8, 8, shifted);
    for (double gamma : {0.0, 1.0, 5.0, 20.0, 200.0}) {
        const auto a = softmax_weights(f, gamma).w, b = softmax_weights(g, gamma).w;
        for (std::size_t i = 0; i < 64; ++i) {
            double sum = 0.0;
            for (int k = 0; k < 4; ++k) {
                CHECK(a.plane(k)[i] > 0.0f);
                sum += a.plane(k)[i];
                if (gamma <= 20.0) CHECK(std::abs(a.plane(k)[i] - b.plane(k)[i]) < 1e-6);
            }
            CHECK(std::abs(sum - 1.0) < 1e-5);
        }
    }
}

TEST_CASE("argmax weight grows with gamma") {
    oracle::Random rng(10);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<float, 4> x{};
        for (float& v : x) v = static_cast<float>(rng.uniform(-1, 1));
        const int top = static_cast<int>(std::max_element(x.begin(), x.end()) - x.begin());
        const auto f = field_from(1, 1, {x});
        float previous = 0.0f;
        for (double gamma : {0.0, 1.0, 5.0, 20.0}) {
            const float w = softmax_weights(f, gamma).w.plane(top)[0];
            CHECK(w >= previous);
            previous = w;
        }
    }
}

TEST_CASE("identical 10-m bands give the band's own high-pass") {
    oracle::Random rng(11);
    const int w = 24, h = 20;
    const auto t = rng.plane(w * h);
    const auto bands = replicate(t, w, h);
    const auto band20 = rng.plane(w * h);
    const auto hp = highpass(BandStack(w, h, {BandId::B2}, 10.0, t), std::vector<MtfKernel>{kernels10()[0]});
    for (double gamma : {0.0, 1.0, 5.0, 20.0}) {
        DetailSettings s;
        s.gamma = gamma;
        const auto d = build_detail_reference(bands, band20, kernels10(), kernels20()[0], s);
        for (std::size_t i = 0; i < d.detail.size(); ++i) CHECK(std::abs(d.detail[i] - hp.samples()[i]) < 1e-5);
    }
}

TEST_CASE("constant 10-m bands give zero detail") {
    oracle::Random rng(13);
    BandStack bands(16, 16, testutil::bands10(), 10.0, std::vector<float>(16 * 16 * 4, 0.7f));
    const auto d = build_detail_reference(bands, rng.plane(256), kernels10(), kernels20()[0], {});
    for (float v : d.detail) CHECK(std::abs(v) < 1e-6);
}

TEST_CASE("detail equals the explicit weighted sum of high-passes") {
    oracle::Random rng(14);
    const int w = 18, h = 15;
    const auto bands = testutil::random_stack(rng, w, h, testutil::bands10(), 10.0);
    const auto band20 = rng.plane(w * h);
    DetailSettings s;
    s.keep_diagnostics = true;
    const auto d = build_detail_reference(bands, band20, kernels10(), kernels20()[1], s, BandId::B6);
    REQUIRE(d.weights.has_value());
    REQUIRE(d.correlation.has_value());
    CHECK(d.band == BandId::B6);
    const auto hp = highpass(bands, kernels10());
    for (std::size_t i = 0; i < d.detail.size(); ++i) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += static_cast<double>(d.weights->w.plane(k)[i]) * hp.plane(k)[i];
        CHECK(std::abs(d.detail[i] - acc) < 1e-6);
    }

    // Independent route: direct convolutions, windowed Pearson and a plain softmax.
    const int r = s.radius;
    const auto lp20 = oracle::convolve(band20, w, h, kernels20()[1].taps, kernels20()[1].size);
    const std::vector<float> lp20f(lp20.begin(), lp20.end());
    std::vector<std::vector<float>> lp10(4), hp10(4);
    for (int k = 0; k < 4; ++k) {
        const auto plane = testutil::to_vector(bands.plane(k));
        const auto lp = oracle::convolve(plane, w, h, kernels10()[k].taps, kernels10()[k].size);
        lp10[k].assign(lp.begin(), lp.end());
        for (std::size_t i = 0; i < plane.size(); ++i) hp10[k].push_back(static_cast<float>(plane[i] - lp[i]));
    }
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            double e[4], sum = 0.0;
            for (int k = 0; k < 4; ++k) {
                e[k] = std::exp(s.gamma * oracle::window_pearson(lp20f, lp10[k], w, h, x, y, r));
                sum += e[k];
            }
            double acc = 0.0;
            for (int k = 0; k < 4; ++k) acc += e[k] / sum * hp10[k][y * w + x];
            CHECK(std::abs(d.detail[y * w + x] - acc) < 1e-4);
        }
}

TEST_CASE("detail ignores a constant offset on any 10-m band") {
    oracle::Random rng(15);
    const int w = 20, h = 20;
    const auto bands = testutil::random_stack(rng, w, h, testutil::bands10(), 10.0);
    auto shifted = bands;
    for (float& v : shifted.plane(1)) v += 3.0f;
    const auto band20 = rng.plane(w * h);
    const auto a = build_detail_reference(bands, band20, kernels10(), kernels20()[0], {});
    const auto b = build_detail_reference(shifted, band20, kernels10(), kernels20()[0], {});
    for (std::size_t i = 0; i < a.detail.size(); ++i) CHECK(std::abs(a.detail[i] - b.detail[i]) < 1e-5);
}

TEST_CASE("one reference per 20-m band") {
    oracle::Random rng(16);
    const auto s10 = testutil::random_stack(rng, 32, 24, testutil::bands10(), 10.0);
    const auto s20 = testutil::random_stack(rng, 16, 12, testutil::bands20(), 20.0);
    const auto bundle = build_all_references(s10, s20, kernels10(), kernels20(), {});
    REQUIRE(bundle.entries.size() == 6);
    const auto up = upsample(s20, 2);
    for (int b = 0; b < 6; ++b) {
        CHECK(bundle.entries[b].band == kBands20[b]);
        CHECK(bundle.entries[b].detail.size() == 32u * 24u);
        const auto direct = build_detail_reference(s10, up.plane(b), kernels10(), kernels20()[b], {}, kBands20[b]);
        CHECK(direct.detail == bundle.entries[b].detail);
        for (float v : direct.detail) CHECK(std::isfinite(v));
    }
    const auto again = build_all_references(s10, s20, kernels10(), kernels20(), {});
    CHECK(again.as_stack().identical(bundle.as_stack()));
    CHECK(bundle.as_stack().width() == 32);
    CHECK(bundle.as_stack().band_count() == 6);

    CHECK_THROWS_AS(build_all_references(s10, crop(s20, 0, 0, 15, 12), kernels10(), kernels20(), {}), Error);
}

}
