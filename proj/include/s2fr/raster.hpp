#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace s2fr {

/// Sentinel-2 bands handled by the library, in canonical stack order.
enum class BandId : std::uint8_t { B2, B3, B4, B8, B5, B6, B7, B8A, B11, B12 };

inline constexpr std::array<BandId, 4> kBands10{BandId::B2, BandId::B3, BandId::B4, BandId::B8};
inline constexpr std::array<BandId, 6> kBands20{BandId::B5, BandId::B6,  BandId::B7,
                                                BandId::B8A, BandId::B11, BandId::B12};

std::string_view band_name(BandId band);
std::optional<BandId> parse_band(std::string_view name);
/// 10 m for B2/B3/B4/B8, 20 m for the rest.
double native_gsd(BandId band);

// Instrumentation for auditing which operators read a stack's pixels. Reads
// made while an AccessScope is alive on the reading thread are attributed to
// that scope's operator name; all other reads are attributed to "raw".
class AccessCounter {
public:
    void record(std::string_view op);
    long count(std::string_view op) const;
    long total() const;
    std::map<std::string, long> snapshot() const;

private:
    mutable std::mutex mutex_;
    std::map<std::string, long, std::less<>> counts_;
};

class AccessScope {
public:
    explicit AccessScope(std::string_view op);
    ~AccessScope();
    AccessScope(const AccessScope&) = delete;
    AccessScope& operator=(const AccessScope&) = delete;

    static std::string_view current();

private:
    std::string_view previous_;
};

/// Multi-band raster on a single grid. Samples are band-major planes, each
/// plane row-major. Bands are unique and kept in canonical BandId order.
class BandStack {
public:
    BandStack() = default;
    BandStack(int width, int height, std::vector<BandId> bands, double gsd);
    BandStack(int width, int height, std::vector<BandId> bands, double gsd, std::vector<float> data);

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int band_count() const noexcept { return static_cast<int>(bands_.size()); }
    std::size_t pixels() const noexcept { return static_cast<std::size_t>(width_) * height_; }
    double gsd() const noexcept { return gsd_; }
    const std::vector<BandId>& bands() const noexcept { return bands_; }
    BandId band(int b) const { return bands_.at(b); }
    std::optional<int> band_index(BandId band) const;

    std::span<const float> plane(int b) const;
    std::span<float> plane(int b);
    std::span<const float> samples() const;
    std::span<float> samples() { return data_; }

    float at(int b, int x, int y) const { return plane(b)[static_cast<std::size_t>(y) * width_ + x]; }

    void attach_observer(std::shared_ptr<AccessCounter> observer) { observer_ = std::move(observer); }

    /// Bitwise comparison of geometry, band list and samples.
    bool identical(const BandStack& other) const;

private:
    void note_read() const;

    int width_ = 0;
    int height_ = 0;
    double gsd_ = 0.0;
    std::vector<BandId> bands_;
    std::vector<float> data_;
    std::shared_ptr<AccessCounter> observer_;
};

/// Per-band statistics used to normalize a stack and restore outputs.
struct NormStats {
    std::vector<BandId> bands;
    std::vector<double> mean;
    std::vector<double> std;  // population standard deviation
};

struct NormalizedStack {
    BandStack stack;
    NormStats stats;
};

BandStack load_stack(const std::filesystem::path& path);
void save_stack(const BandStack& stack, const std::filesystem::path& path);

NormStats compute_stats(const BandStack& stack);
NormalizedStack normalize(const BandStack& stack);
BandStack apply_normalization(const BandStack& stack, const NormStats& stats);
BandStack denormalize(const BandStack& stack, const NormStats& stats);

BandStack crop(const BandStack& stack, int x0, int y0, int w, int h);
/// Picks the listed bands (any order given; result is canonical order).
BandStack select_bands(const BandStack& stack, std::span<const BandId> bands);
/// Concatenates two stacks on the same grid; band sets must be disjoint.
BandStack merge_bands(const BandStack& a, const BandStack& b);

/// 8-bit RGB preview of three bands with a per-band 2%-98% percentile stretch.
void write_preview_png(const BandStack& stack, std::array<int, 3> band_indices,
                       const std::filesystem::path& path);

}  // namespace s2fr
