#include "s2fr/raster.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <png.h>

#include <json.hpp>

#include "s2fr/error.hpp"

namespace s2fr {

namespace {

constexpr std::array<std::string_view, 10> kBandNames{"B2", "B3", "B4",  "B8",  "B5",
                                                      "B6", "B7", "B8A", "B11", "B12"};

thread_local std::string_view t_current_op;

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
    return std::filesystem::path(path.string() + ".json");
}

void check_bands(const std::vector<BandId>& bands) {
    require(!bands.empty(), ErrorKind::Shape, "stack needs at least one band");
    for (std::size_t i = 1; i < bands.size(); ++i) {
        require(bands[i - 1] < bands[i], ErrorKind::Shape,
                "bands must be unique and in canonical order (" + std::string(band_name(bands[i - 1])) +
                    " before " + std::string(band_name(bands[i])) + ")");
    }
}

std::uint32_t byteswap32(std::uint32_t v) {
    return (v >> 24) | ((v >> 8) & 0x0000ff00u) | ((v << 8) & 0x00ff0000u) | (v << 24);
}

void to_little_endian(std::span<float> values) {
    if constexpr (std::endian::native == std::endian::big) {
        for (float& f : values) f = std::bit_cast<float>(byteswap32(std::bit_cast<std::uint32_t>(f)));
    }
}

}  // namespace

std::string_view band_name(BandId band) { return kBandNames.at(static_cast<std::size_t>(band)); }

std::optional<BandId> parse_band(std::string_view name) {
    for (std::size_t i = 0; i < kBandNames.size(); ++i) {
        if (kBandNames[i] == name) return static_cast<BandId>(i);
    }
    return std::nullopt;
}

double native_gsd(BandId band) { return band < BandId::B5 ? 10.0 : 20.0; }

void AccessCounter::record(std::string_view op) {
    std::lock_guard lock(mutex_);
    auto it = counts_.find(op);
    if (it == counts_.end()) it = counts_.emplace(std::string(op), 0).first;
    ++it->second;
}

long AccessCounter::count(std::string_view op) const {
    std::lock_guard lock(mutex_);
    auto it = counts_.find(op);
    return it == counts_.end() ? 0 : it->second;
}

long AccessCounter::total() const {
    std::lock_guard lock(mutex_);
    long sum = 0;
    for (const auto& [op, n] : counts_) sum += n;
    return sum;
}

std::map<std::string, long> AccessCounter::snapshot() const {
    std::lock_guard lock(mutex_);
    return {counts_.begin(), counts_.end()};
}

AccessScope::AccessScope(std::string_view op) : previous_(t_current_op) { t_current_op = op; }
AccessScope::~AccessScope() { t_current_op = previous_; }
std::string_view AccessScope::current() { return t_current_op.empty() ? "raw" : t_current_op; }

BandStack::BandStack(int width, int height, std::vector<BandId> bands, double gsd)
    : BandStack(width, height, bands, gsd,
                std::vector<float>(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0) *
                                   bands.size())) {}

BandStack::BandStack(int width, int height, std::vector<BandId> bands, double gsd, std::vector<float> data)
    : width_(width), height_(height), gsd_(gsd), bands_(std::move(bands)), data_(std::move(data)) {
    require(width_ > 0 && height_ > 0, ErrorKind::Shape,
            "stack dimensions must be positive, got " + std::to_string(width_) + "x" + std::to_string(height_));
    require(gsd_ > 0.0 && std::isfinite(gsd_), ErrorKind::Shape, "gsd must be positive");
    check_bands(bands_);
    require(data_.size() == pixels() * bands_.size(), ErrorKind::Shape,
            "sample count " + std::to_string(data_.size()) + " does not match " + std::to_string(width_) + "x" +
                std::to_string(height_) + "x" + std::to_string(bands_.size()));
}

std::optional<int> BandStack::band_index(BandId band) const {
    auto it = std::find(bands_.begin(), bands_.end(), band);
    if (it == bands_.end()) return std::nullopt;
    return static_cast<int>(it - bands_.begin());
}

void BandStack::note_read() const {
    if (observer_) observer_->record(AccessScope::current());
}

std::span<const float> BandStack::plane(int b) const {
    require(b >= 0 && b < band_count(), ErrorKind::Shape, "band index out of range");
    note_read();
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(b) * pixels(), pixels());
}

std::span<float> BandStack::plane(int b) {
    require(b >= 0 && b < band_count(), ErrorKind::Shape, "band index out of range");
    return std::span<float>(data_).subspan(static_cast<std::size_t>(b) * pixels(), pixels());
}

std::span<const float> BandStack::samples() const {
    note_read();
    return data_;
}

bool BandStack::identical(const BandStack& other) const {
    return width_ == other.width_ && height_ == other.height_ && gsd_ == other.gsd_ && bands_ == other.bands_ &&
           data_.size() == other.data_.size() &&
           std::memcmp(data_.data(), other.data_.data(), data_.size() * sizeof(float)) == 0;
}

BandStack load_stack(const std::filesystem::path& path) {
    const auto header_path = sidecar_path(path);
    std::ifstream header_in(header_path);
    require(header_in.good(), ErrorKind::Io, "missing header " + header_path.string());

    nlohmann::json header;
    try {
        header_in >> header;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, "corrupt header " + header_path.string() + ": " + e.what());
    }

    int width = 0, height = 0;
    double gsd = 0.0;
    std::vector<std::string> names;
    try {
        width = header.at("width").get<int>();
        height = header.at("height").get<int>();
        gsd = header.at("gsd").get<double>();
        names = header.at("bands").get<std::vector<std::string>>();
        const auto dtype = header.value("dtype", std::string("f32"));
        require(dtype == "f32", ErrorKind::Io, "unsupported dtype '" + dtype + "'");
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorKind::Io, "corrupt header " + header_path.string() + ": " + e.what());
    }
    require(width > 0 && height > 0, ErrorKind::Io, "corrupt header: non-positive dimensions");
    require(gsd > 0.0, ErrorKind::Io, "corrupt header: non-positive gsd");
    require(!names.empty(), ErrorKind::Io, "corrupt header: empty band list");

    std::vector<BandId> bands;
    for (const auto& name : names) {
        auto id = parse_band(name);
        require(id.has_value(), ErrorKind::Io, "corrupt header: unknown band '" + name + "'");
        require(std::find(bands.begin(), bands.end(), *id) == bands.end(), ErrorKind::Io,
                "corrupt header: duplicate band '" + name + "'");
        bands.push_back(*id);
    }

    const std::size_t plane_size = static_cast<std::size_t>(width) * height;
    const std::size_t expected = plane_size * bands.size();

    std::ifstream in(path, std::ios::binary | std::ios::ate);
    require(in.good(), ErrorKind::Io, "cannot open payload " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    require(bytes >= expected * sizeof(float), ErrorKind::Io, "truncated payload in " + path.string());
    require(bytes == expected * sizeof(float), ErrorKind::Io,
            "payload size does not match header dimensions in " + path.string());
    in.seekg(0);
    std::vector<float> raw(expected);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(bytes));
    require(in.good(), ErrorKind::Io, "read failure on " + path.string());
    to_little_endian(raw);

    for (float v : raw) require(std::isfinite(v), ErrorKind::Numeric, "non-finite sample in " + path.string());

    // Canonical band order.
    std::vector<std::size_t> order(bands.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return bands[a] < bands[b]; });
    std::vector<BandId> sorted_bands;
    std::vector<float> data(expected);
    for (std::size_t i = 0; i < order.size(); ++i) {
        sorted_bands.push_back(bands[order[i]]);
        std::copy_n(raw.begin() + static_cast<std::ptrdiff_t>(order[i] * plane_size), plane_size,
                    data.begin() + static_cast<std::ptrdiff_t>(i * plane_size));
    }
    return BandStack(width, height, std::move(sorted_bands), gsd, std::move(data));
}

void save_stack(const BandStack& stack, const std::filesystem::path& path) {
    nlohmann::json header;
    header["width"] = stack.width();
    header["height"] = stack.height();
    header["gsd"] = stack.gsd();
    header["bands"] = nlohmann::json::array();
    for (BandId b : stack.bands()) header["bands"].push_back(std::string(band_name(b)));
    header["dtype"] = "f32";

    std::vector<float> payload(stack.samples().begin(), stack.samples().end());
    to_little_endian(payload);
    {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        require(out.good(), ErrorKind::Io, "cannot write " + path.string());
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size() * sizeof(float)));
        require(out.good(), ErrorKind::Io, "write failure on " + path.string());
    }
    std::ofstream hout(sidecar_path(path), std::ios::trunc);
    require(hout.good(), ErrorKind::Io, "cannot write " + sidecar_path(path).string());
    hout << header.dump(2) << '\n';
    require(hout.good(), ErrorKind::Io, "write failure on " + sidecar_path(path).string());
}

NormStats compute_stats(const BandStack& stack) {
    NormStats stats;
    stats.bands = stack.bands();
    for (int b = 0; b < stack.band_count(); ++b) {
        auto p = stack.plane(b);
        double sum = 0.0;
        for (float v : p) sum += v;
        const double mean = sum / static_cast<double>(p.size());
        double ss = 0.0;
        for (float v : p) ss += (v - mean) * (v - mean);
        const double sd = std::sqrt(ss / static_cast<double>(p.size()));
        if (!(sd > 1e-12 * std::max(1.0, std::abs(mean)))) {
            fail(ErrorKind::Numeric, "zero variance in band " + std::string(band_name(stack.band(b))));
        }
        stats.mean.push_back(mean);
        stats.std.push_back(sd);
    }
    return stats;
}

BandStack apply_normalization(const BandStack& stack, const NormStats& stats) {
    require(static_cast<std::size_t>(stack.band_count()) == stats.mean.size(), ErrorKind::Shape,
            "band count does not match normalization statistics");
    BandStack out(stack.width(), stack.height(), stack.bands(), stack.gsd());
    for (int b = 0; b < stack.band_count(); ++b) {
        auto in = stack.plane(b);
        auto o = out.plane(b);
        const double mean = stats.mean[b], sd = stats.std[b];
        for (std::size_t i = 0; i < in.size(); ++i) o[i] = static_cast<float>((in[i] - mean) / sd);
    }
    return out;
}

NormalizedStack normalize(const BandStack& stack) {
    NormStats stats = compute_stats(stack);
    return {apply_normalization(stack, stats), std::move(stats)};
}

BandStack denormalize(const BandStack& stack, const NormStats& stats) {
    require(static_cast<std::size_t>(stack.band_count()) == stats.mean.size() &&
                stats.mean.size() == stats.std.size(),
            ErrorKind::Shape, "band count does not match normalization statistics");
    BandStack out(stack.width(), stack.height(), stack.bands(), stack.gsd());
    for (int b = 0; b < stack.band_count(); ++b) {
        auto in = stack.plane(b);
        auto o = out.plane(b);
        const double mean = stats.mean[b], sd = stats.std[b];
        for (std::size_t i = 0; i < in.size(); ++i) o[i] = static_cast<float>(in[i] * sd + mean);
    }
    return out;
}

BandStack crop(const BandStack& stack, int x0, int y0, int w, int h) {
    require(w > 0 && h > 0 && x0 >= 0 && y0 >= 0 && x0 + w <= stack.width() && y0 + h <= stack.height(),
            ErrorKind::Shape,
            "crop window (" + std::to_string(x0) + "," + std::to_string(y0) + "," + std::to_string(w) + "," +
                std::to_string(h) + ") outside " + std::to_string(stack.width()) + "x" +
                std::to_string(stack.height()));
    BandStack out(w, h, stack.bands(), stack.gsd());
    for (int b = 0; b < stack.band_count(); ++b) {
        auto in = stack.plane(b);
        auto o = out.plane(b);
        for (int y = 0; y < h; ++y) {
            auto row = in.subspan(static_cast<std::size_t>(y0 + y) * stack.width() + x0, w);
            std::copy(row.begin(), row.end(), o.begin() + static_cast<std::ptrdiff_t>(y) * w);
        }
    }
    return out;
}

BandStack select_bands(const BandStack& stack, std::span<const BandId> bands) {
    std::vector<BandId> sorted(bands.begin(), bands.end());
    std::sort(sorted.begin(), sorted.end());
    BandStack out(stack.width(), stack.height(), sorted, stack.gsd());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
        auto idx = stack.band_index(sorted[i]);
        require(idx.has_value(), ErrorKind::Shape, "band " + std::string(band_name(sorted[i])) + " not in stack");
        auto in = stack.plane(*idx);
        std::copy(in.begin(), in.end(), out.plane(static_cast<int>(i)).begin());
    }
    return out;
}

BandStack merge_bands(const BandStack& a, const BandStack& b) {
    require(a.width() == b.width() && a.height() == b.height() && a.gsd() == b.gsd(), ErrorKind::Shape,
            "cannot merge stacks on different grids");
    std::vector<BandId> bands = a.bands();
    bands.insert(bands.end(), b.bands().begin(), b.bands().end());
    std::sort(bands.begin(), bands.end());
    BandStack out(a.width(), a.height(), bands, a.gsd());
    for (std::size_t i = 0; i < bands.size(); ++i) {
        const BandStack& src = a.band_index(bands[i]) ? a : b;
        auto in = src.plane(*src.band_index(bands[i]));
        std::copy(in.begin(), in.end(), out.plane(static_cast<int>(i)).begin());
    }
    return out;
}

void write_preview_png(const BandStack& stack, std::array<int, 3> band_indices,
                       const std::filesystem::path& path) {
    const std::size_t n = stack.pixels();
    std::vector<std::uint8_t> rgb(n * 3);
    for (int c = 0; c < 3; ++c) {
        auto p = stack.plane(band_indices[c]);
        std::vector<float> sorted(p.begin(), p.end());
        std::sort(sorted.begin(), sorted.end());
        const float lo = sorted[static_cast<std::size_t>(0.02 * static_cast<double>(n - 1))];
        const float hi = sorted[static_cast<std::size_t>(0.98 * static_cast<double>(n - 1))];
        const double scale = hi > lo ? 255.0 / (hi - lo) : 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = std::clamp((p[i] - lo) * scale, 0.0, 255.0);
            rgb[i * 3 + c] = static_cast<std::uint8_t>(std::lround(v));
        }
    }

    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(stack.width());
    image.height = static_cast<png_uint_32>(stack.height());
    image.format = PNG_FORMAT_RGB;
    const bool ok = png_image_write_to_file(&image, path.c_str(), 0, rgb.data(), 0, nullptr) != 0;
    if (!ok) {
        const std::string reason = image.message;
        png_image_free(&image);
        fail(ErrorKind::Io, "cannot write preview " + path.string() + ": " + reason);
    }
}

}  // namespace s2fr
