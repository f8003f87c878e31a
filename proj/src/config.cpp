#include "s2fr/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "s2fr/error.hpp"

namespace s2fr {

namespace {

using nlohmann::json;

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

// Reads keys from one JSON object and rejects whatever was not consumed.
class Section {
public:
    Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
        require(doc.is_object(), ErrorKind::Config, (path_.empty() ? "document" : path_) + ": expected an object");
    }

    const json* child(const std::string& key) {
        seen_.insert(key);
        const auto it = doc_.find(key);
        return it == doc_.end() ? nullptr : &*it;
    }

    void read(const std::string& key, int& dst) {
        if (const json* v = child(key)) {
            require(v->is_number_integer(), ErrorKind::Config, join(path_, key) + ": expected an integer");
            dst = v->get<int>();
        }
    }

    void read(const std::string& key, std::uint64_t& dst) {
        if (const json* v = child(key)) {
            require(v->is_number_unsigned() || (v->is_number_integer() && v->get<long long>() >= 0),
                    ErrorKind::Config, join(path_, key) + ": expected a non-negative integer");
            dst = v->get<std::uint64_t>();
        }
    }

    void read(const std::string& key, double& dst) {
        if (const json* v = child(key)) {
            require(v->is_number(), ErrorKind::Config, join(path_, key) + ": expected a number");
            dst = v->get<double>();
        }
    }

    void read(const std::string& key, std::string& dst) {
        if (const json* v = child(key)) {
            require(v->is_string(), ErrorKind::Config, join(path_, key) + ": expected a string");
            dst = v->get<std::string>();
        }
    }

    void finish() const {
        for (const auto& [key, value] : doc_.items())
            require(seen_.count(key) > 0, ErrorKind::Config, "unknown key '" + join(path_, key) + "'");
    }

    const std::string& path() const { return path_; }

private:
    const json& doc_;
    std::string path_;
    std::set<std::string> seen_;
};

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
    ExperimentConfig cfg;
    TrainConfig& t = cfg.train;
    Section root(doc, "");

    if (const json* mtf = root.child("mtf")) {
        Section s(*mtf, "mtf");
        s.read("kernel_size", t.mtf.kernel_size);
        s.read("default_gain", t.mtf.default_gain);
        if (const json* gains = s.child("gains")) {
            require(gains->is_object(), ErrorKind::Config, "mtf.gains: expected an object");
            for (const auto& [name, value] : gains->items()) {
                const auto band = parse_band(name);
                require(band.has_value(), ErrorKind::Config, "unknown key 'mtf.gains." + name + "'");
                require(value.is_number(), ErrorKind::Config, "mtf.gains." + name + ": expected a number");
                t.mtf.gains[*band] = value.get<double>();
            }
        }
        s.finish();
    }
    root.read("ratio", t.mtf.ratio);

    if (const json* detail = root.child("detail")) {
        Section s(*detail, "detail");
        s.read("gamma", t.detail.gamma);
        s.read("radius", t.detail.radius);
        s.finish();
    }

    if (const json* loss = root.child("loss")) {
        Section s(*loss, "loss");
        s.read("beta", t.loss.beta);
        std::string norm(norm_name(t.loss.norm));
        s.read("norm", norm);
        const auto parsed = parse_norm(norm);
        require(parsed.has_value(), ErrorKind::Config, "loss.norm: expected \"l1\" or \"l2\", got \"" + norm + "\"");
        t.loss.norm = *parsed;
        s.finish();
    }

    if (const json* train = root.child("train")) {
        Section s(*train, "train");
        std::string scheme(scheme_name(t.scheme));
        s.read("scheme", scheme);
        const auto parsed = parse_scheme(scheme);
        require(parsed.has_value(), ErrorKind::Config,
                "train.scheme: expected baseline, reversed or proposed, got \"" + scheme + "\"");
        t.scheme = *parsed;
        s.read("iterations", t.iterations);
        s.read("lr", t.lr);
        s.read("tile", t.tile);
        s.read("seed", t.seed);
        s.read("log_every", t.log_every);
        s.read("batch", t.batch);
        s.finish();
    }

    if (const json* metrics = root.child("metrics")) {
        Section s(*metrics, "metrics");
        s.read("window", cfg.metrics_window);
        s.finish();
    }

    if (const json* io = root.child("io")) {
        Section s(*io, "io");
        for (const char* key : kIoKeys) {
            std::string value;
            if (s.child(key)) {
                s.read(key, value);
                cfg.io[key] = value;
            }
        }
        s.finish();
    }

    root.finish();
    validate(cfg);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    require(in.good(), ErrorKind::Io, "cannot open config " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        fail(ErrorKind::Config, "cannot parse " + path.string() + ": " + e.what());
    }
    return config_from_json(doc);
}

json config_to_json(const ExperimentConfig& cfg) {
    const TrainConfig& t = cfg.train;
    json gains = json::object();
    for (BandId b : kBands10) gains[std::string(band_name(b))] = t.mtf.gain(b);
    for (BandId b : kBands20) gains[std::string(band_name(b))] = t.mtf.gain(b);
    json io = json::object();
    for (const auto& [k, v] : cfg.io) io[k] = v;
    return json{
        {"mtf", {{"kernel_size", t.mtf.kernel_size}, {"default_gain", t.mtf.default_gain}, {"gains", gains}}},
        {"ratio", t.mtf.ratio},
        {"detail", {{"gamma", t.detail.gamma}, {"radius", t.detail.radius}}},
        {"loss", {{"beta", t.loss.beta}, {"norm", std::string(norm_name(t.loss.norm))}}},
        {"train",
         {{"scheme", std::string(scheme_name(t.scheme))},
          {"iterations", t.iterations},
          {"lr", t.lr},
          {"tile", t.tile},
          {"seed", t.seed},
          {"log_every", t.log_every},
          {"batch", t.batch}}},
        {"metrics", {{"window", cfg.metrics_window}}},
        {"io", io},
    };
}

void validate(const ExperimentConfig& cfg) {
    const TrainConfig& t = cfg.train;
    require(t.mtf.kernel_size > 0 && t.mtf.kernel_size % 2 == 1, ErrorKind::Config,
            "mtf.kernel_size: must be a positive odd integer");
    require(t.mtf.default_gain > 0.0 && t.mtf.default_gain < 1.0, ErrorKind::Config,
            "mtf.default_gain: must lie in (0, 1)");
    for (const auto& [band, gain] : t.mtf.gains)
        require(gain > 0.0 && gain < 1.0, ErrorKind::Config,
                "mtf.gains." + std::string(band_name(band)) + ": must lie in (0, 1)");
    require(t.mtf.ratio >= 2, ErrorKind::Config, "ratio: must be an integer >= 2");
    require(t.detail.gamma >= 0.0, ErrorKind::Config, "detail.gamma: must be non-negative");
    require(t.detail.radius >= 1, ErrorKind::Config, "detail.radius: must be at least 1");
    require(t.loss.beta >= 0.0, ErrorKind::Config, "loss.beta: must be non-negative");
    require(t.iterations >= 0, ErrorKind::Config, "train.iterations: must be non-negative");
    require(t.lr > 0.0, ErrorKind::Config, "train.lr: must be positive");
    require(t.tile > 0 && t.tile % 2 == 0 && t.tile % t.mtf.ratio == 0, ErrorKind::Config,
            "train.tile: must be positive, even and a multiple of the ratio");
    require(t.log_every >= 0, ErrorKind::Config, "train.log_every: must be non-negative");
    require(t.batch >= 1, ErrorKind::Config, "train.batch: must be at least 1");
    require(cfg.metrics_window >= 2, ErrorKind::Config, "metrics.window: must be at least 2");
}

std::string config_defaults_help() {
    const ExperimentConfig d;
    std::ostringstream out;
    out << "Config keys (JSON) and defaults:\n"
        << "  mtf.kernel_size    " << d.train.mtf.kernel_size << "\n"
        << "  mtf.default_gain   " << d.train.mtf.default_gain << "  (Nyquist gain for bands not in mtf.gains)\n"
        << "  mtf.gains.<band>   per-band Nyquist gain, bands B2 B3 B4 B8 B5 B6 B7 B8A B11 B12\n"
        << "  ratio              " << d.train.mtf.ratio << "\n"
        << "  detail.gamma       " << d.train.detail.gamma << "\n"
        << "  detail.radius      " << d.train.detail.radius << "\n"
        << "  loss.beta          " << d.train.loss.beta << "\n"
        << "  loss.norm          " << norm_name(d.train.loss.norm) << "  (l1 or l2)\n"
        << "  train.scheme       " << scheme_name(d.train.scheme) << "  (baseline, reversed or proposed)\n"
        << "  train.iterations   " << d.train.iterations << "\n"
        << "  train.lr           " << d.train.lr << "\n"
        << "  train.tile         " << d.train.tile << "  (pixels on the network-input grid)\n"
        << "  train.seed         " << d.train.seed << "\n"
        << "  train.log_every    " << d.train.log_every << "\n"
        << "  train.batch        " << d.train.batch << "  (tiles per pre-training step)\n"
        << "  metrics.window     " << d.metrics_window << "\n"
        << "  io.<name>          file paths: in10 in20 gt pred checkpoint out log detail\n";
    return out.str();
}

}  // namespace s2fr
