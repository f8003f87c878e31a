#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#include <json.hpp>
#include <openssl/evp.h>

#include "s2fr/config.hpp"
#include "s2fr/detail_ref.hpp"
#include "s2fr/error.hpp"
#include "s2fr/fusion_net.hpp"
#include "s2fr/metrics.hpp"
#include "s2fr/mtf.hpp"
#include "s2fr/parallel.hpp"
#include "s2fr/raster.hpp"
#include "s2fr/synth.hpp"
#include "s2fr/train.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace s2fr;

namespace {

struct Common {
    std::string config;
    std::optional<std::uint64_t> seed;
    int threads = 0;
    bool deterministic = false;
    bool json = false;
};

void add_common(CLI::App* cmd, Common& c) {
    cmd->add_option("--config", c.config, "JSON config file (see the key list below)");
    cmd->add_option("--seed", c.seed, "Seed; overrides train.seed");
    cmd->add_option("--threads", c.threads, "Worker thread cap (0 = all cores)")->check(CLI::NonNegativeNumber);
    cmd->add_flag("--deterministic", c.deterministic, "Bit-reproducible reductions");
    cmd->add_flag("--json", c.json, "Machine-readable output on stdout");
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::Io, "cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::vector<char> buf(1 << 16);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);
    std::string hex;
    char byte[3];
    for (unsigned int i = 0; i < len; ++i) {
        std::snprintf(byte, sizeof byte, "%02x", digest[i]);
        hex += byte;
    }
    return hex;
}

// Records what a run needs to be repeated: argv, the complete config, input
// hashes and tool versions.
class Manifest {
public:
    Manifest(std::string command, int argc, char** argv) : command_(std::move(command)) {
        for (int i = 0; i < argc; ++i) argv_.push_back(argv[i]);
    }

    void input(const fs::path& path) {
        inputs_[path.string()] = sha256_file(path);
        // Raster and checkpoint payloads come with a JSON header that is part of the input.
        const fs::path header = path.string() + ".json";
        if (fs::exists(header)) inputs_[header.string()] = sha256_file(header);
    }
    void output(const fs::path& path) { outputs_.push_back(path.string()); }

    void write(const fs::path& path, const ExperimentConfig& cfg, const Common& common) const {
        json doc{
            {"command", command_},
            {"argv", argv_},
            {"config", config_to_json(cfg)},
            {"runtime", {{"threads", thread_count()}, {"deterministic", common.deterministic}}},
            {"inputs", inputs_},
            {"outputs", outputs_},
            {"versions",
             {{"s2fr", S2FR_VERSION},
              {"compiler", __VERSION__},
              {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                            std::to_string(EIGEN_MINOR_VERSION)}}},
        };
        std::ofstream out(path, std::ios::trunc);
        require(out.good(), ErrorKind::Io, "cannot write manifest " + path.string());
        out << doc.dump(2) << '\n';
    }

private:
    std::string command_;
    std::vector<std::string> argv_;
    json inputs_ = json::object();
    std::vector<std::string> outputs_;
};

fs::path manifest_path(const fs::path& output) { return output.string() + ".manifest.json"; }

ExperimentConfig resolve_config(const Common& common) {
    ExperimentConfig cfg = common.config.empty() ? ExperimentConfig{} : load_config(common.config);
    if (common.seed) cfg.train.seed = *common.seed;
    set_threads(common.threads);
    set_deterministic(common.deterministic);
    return cfg;
}

std::string io_path(const ExperimentConfig& cfg, const std::string& flag_value, const std::string& key,
                    const std::string& flag) {
    if (!flag_value.empty()) return flag_value;
    const auto it = cfg.io.find(key);
    require(it != cfg.io.end() && !it->second.empty(), ErrorKind::Config,
            "missing " + flag + " (or io." + key + " in the config)");
    return it->second;
}

BandStack load_input(const fs::path& path, Manifest& manifest) {
    manifest.input(path);
    return load_stack(path);
}

void print_record(const Common& common, const json& record, const std::string& text) {
    if (common.json)
        std::cout << record.dump() << '\n';
    else if (!text.empty())
        std::cout << text;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Super-resolution of Sentinel-2 20-m bands guided by the 10-m bands"};
    app.require_subcommand(1);
    app.footer("\n" + config_defaults_help());

    Common common;

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a seeded synthetic scene with ground truth");
    int synth_size = 256;
    std::string synth_out;
    synth->add_option("--size", synth_size, "Side of the 10-m grid, divisible by 4")->capture_default_str();
    synth->add_option("--out", synth_out, "Output prefix: writes <prefix>_10m.bsr, _20m.bsr, _gt.bsr")->required();
    add_common(synth, common);

    // downgrade
    auto* downgrade = app.add_subcommand("downgrade", "Reduced-resolution pair (MTF low-pass, then decimation)");
    std::string dg_in10, dg_in20, dg_out;
    downgrade->add_option("--in10", dg_in10, "10-m stack");
    downgrade->add_option("--in20", dg_in20, "20-m stack");
    downgrade->add_option("--out", dg_out, "Output prefix: writes <prefix>_10m_lr.bsr and _20m_lr.bsr")->required();
    add_common(downgrade, common);

    // detail-ref
    auto* detail = app.add_subcommand("detail-ref", "Detail reference of every 20-m band");
    std::string dr_in10, dr_in20, dr_out, dr_weights;
    detail->add_option("--in10", dr_in10, "10-m stack");
    detail->add_option("--in20", dr_in20, "20-m stack");
    detail->add_option("--out", dr_out, "Detail stack (.bsr), normalized units on the 10-m grid")->required();
    detail->add_option("--weights", dr_weights,
                       "Also write per-band softmax weights to <prefix>_<band>.bsr (bands labelled B2..B8)");
    add_common(detail, common);

    // pretrain
    auto* pretrain_cmd = app.add_subcommand("pretrain", "Train from scratch on a dataset of scenes");
    std::vector<std::string> pt_in10, pt_in20;
    std::string pt_out, pt_log;
    pretrain_cmd->add_option("--in10", pt_in10, "10-m stacks, one per scene")->required();
    pretrain_cmd->add_option("--in20", pt_in20, "20-m stacks, same order as --in10")->required();
    pretrain_cmd->add_option("--out", pt_out, "Checkpoint (.fnet)");
    pretrain_cmd->add_option("--log", pt_log, "Training log CSV");
    add_common(pretrain_cmd, common);

    // adapt
    auto* adapt = app.add_subcommand("adapt", "Target-adaptive fine-tuning on one scene");
    std::string ad_ckpt, ad_in10, ad_in20, ad_out, ad_log, ad_scheme;
    std::optional<double> ad_beta, ad_lr, ad_gamma;
    std::optional<int> ad_iterations, ad_tile;
    adapt->add_option("--checkpoint", ad_ckpt, "Starting checkpoint; omitted = fresh network from the seed");
    adapt->add_option("--in10", ad_in10, "10-m stack");
    adapt->add_option("--in20", ad_in20, "20-m stack");
    adapt->add_option("--out", ad_out, "Adapted checkpoint (.fnet)");
    adapt->add_option("--log", ad_log, "Training log CSV");
    adapt->add_option("--scheme", ad_scheme, "baseline, reversed or proposed; overrides train.scheme");
    adapt->add_option("--beta", ad_beta, "Detail loss weight; overrides loss.beta");
    adapt->add_option("--gamma", ad_gamma, "Softmax shrinking; overrides detail.gamma");
    adapt->add_option("--iterations", ad_iterations, "Overrides train.iterations");
    adapt->add_option("--lr", ad_lr, "Overrides train.lr");
    adapt->add_option("--tile", ad_tile, "Overrides train.tile");
    add_common(adapt, common);

    // fuse
    auto* fuse_cmd = app.add_subcommand("fuse", "Super-resolve the 20-m bands of a scene");
    std::string fu_ckpt, fu_in10, fu_in20, fu_out, fu_preview;
    fuse_cmd->add_option("--checkpoint", fu_ckpt, "Network checkpoint (.fnet)");
    fuse_cmd->add_option("--in10", fu_in10, "10-m stack");
    fuse_cmd->add_option("--in20", fu_in20, "20-m stack");
    fuse_cmd->add_option("--out", fu_out, "Output stack (.bsr): six bands at 10 m");
    fuse_cmd->add_option("--preview", fu_preview, "Optional PNG of bands B12/B8A/B5");
    add_common(fuse_cmd, common);

    // eval
    auto* eval = app.add_subcommand("eval", "Quality indices of a prediction against a reference");
    std::string ev_pred, ev_gt, ev_out;
    eval->add_option("pred", ev_pred, "Predicted stack")->required();
    eval->add_option("gt", ev_gt, "Reference stack")->required();
    eval->add_option("--out", ev_out, "Also write the report to this file (CSV, or JSON with --json)");
    add_common(eval, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        ExperimentConfig cfg = resolve_config(common);
        TrainConfig& tc = cfg.train;
        const std::string command = app.get_subcommands().front()->get_name();
        Manifest manifest(command, argc, argv);

        if (synth->parsed()) {
            SynthSettings ss;
            ss.size = synth_size;
            ss.seed = tc.seed;
            const SynthScene scene = synth_scene(ss, tc.mtf);
            const fs::path p10 = synth_out + "_10m.bsr", p20 = synth_out + "_20m.bsr", pgt = synth_out + "_gt.bsr";
            save_stack(scene.stack10, p10);
            save_stack(scene.stack20, p20);
            save_stack(scene.gt20, pgt);
            for (const auto& p : {p10, p20, pgt}) manifest.output(p);
            manifest.write(manifest_path(p10), cfg, common);
            print_record(common, {{"stack10", p10}, {"stack20", p20}, {"gt", pgt}},
                         "wrote " + p10.string() + ", " + p20.string() + ", " + pgt.string() + "\n");
        } else if (downgrade->parsed()) {
            const BandStack s10 = load_input(io_path(cfg, dg_in10, "in10", "--in10"), manifest);
            const BandStack s20 = load_input(io_path(cfg, dg_in20, "in20", "--in20"), manifest);
            const auto low = wald_downgrade(s10, s20, make_kernels(s10.bands(), tc.mtf),
                                            make_kernels(s20.bands(), tc.mtf), tc.mtf.ratio);
            const fs::path p10 = dg_out + "_10m_lr.bsr", p20 = dg_out + "_20m_lr.bsr";
            save_stack(low.stack10, p10);
            save_stack(low.stack20, p20);
            manifest.output(p10);
            manifest.output(p20);
            manifest.write(manifest_path(p10), cfg, common);
            print_record(common, {{"stack10", p10}, {"stack20", p20}},
                         "wrote " + p10.string() + ", " + p20.string() + "\n");
        } else if (detail->parsed()) {
            const BandStack s10 = load_input(io_path(cfg, dr_in10, "in10", "--in10"), manifest);
            const BandStack s20 = load_input(io_path(cfg, dr_in20, "in20", "--in20"), manifest);
            DetailSettings ds = tc.detail;
            ds.keep_diagnostics = !dr_weights.empty();
            const DetailBundle bundle = build_all_references(normalize(s10).stack, normalize(s20).stack,
                                                             make_kernels(s10.bands(), tc.mtf),
                                                             make_kernels(s20.bands(), tc.mtf), ds);
            save_stack(bundle.as_stack(), dr_out);
            manifest.output(dr_out);
            if (!dr_weights.empty()) {
                for (const auto& e : bundle.entries) {
                    const auto& wf = e.weights->w;
                    const fs::path p = dr_weights + "_" + std::string(band_name(e.band)) + ".bsr";
                    save_stack(BandStack(wf.width, wf.height, s10.bands(), s10.gsd(), wf.data), p);
                    manifest.output(p);
                }
            }
            manifest.write(manifest_path(dr_out), cfg, common);
            print_record(common, {{"detail", dr_out}}, "wrote " + dr_out + "\n");
        } else if (pretrain_cmd->parsed()) {
            require(pt_in10.size() == pt_in20.size(), ErrorKind::Config,
                    "--in10 and --in20 must be given the same number of times");
            std::vector<ScenePair> dataset;
            for (std::size_t i = 0; i < pt_in10.size(); ++i)
                dataset.push_back({load_input(pt_in10[i], manifest), load_input(pt_in20[i], manifest)});
            const std::string out = io_path(cfg, pt_out, "checkpoint", "--out");
            const TrainResult res = pretrain(dataset, tc);
            res.net.save(out);
            manifest.output(out);
            if (!pt_log.empty()) {
                res.log.write_csv(pt_log);
                manifest.output(pt_log);
            }
            manifest.write(manifest_path(out), cfg, common);
            const auto& last = res.log.entries.back();
            print_record(common, {{"checkpoint", out}, {"steps", last.iteration}, {"loss", last.loss.total}},
                         "wrote " + out + " after " + std::to_string(last.iteration) + " steps\n");
        } else if (adapt->parsed()) {
            if (!ad_scheme.empty()) {
                const auto s = parse_scheme(ad_scheme);
                require(s.has_value(), ErrorKind::Config, "--scheme: expected baseline, reversed or proposed");
                tc.scheme = *s;
            }
            if (ad_beta) tc.loss.beta = *ad_beta;
            if (ad_gamma) tc.detail.gamma = *ad_gamma;
            if (ad_iterations) tc.iterations = *ad_iterations;
            if (ad_lr) tc.lr = *ad_lr;
            if (ad_tile) tc.tile = *ad_tile;
            validate(cfg);

            const BandStack s10 = load_input(io_path(cfg, ad_in10, "in10", "--in10"), manifest);
            const BandStack s20 = load_input(io_path(cfg, ad_in20, "in20", "--in20"), manifest);
            FusionNet net = FusionNet::init(tc.seed);
            if (!ad_ckpt.empty()) {
                manifest.input(ad_ckpt);
                net = FusionNet::load(ad_ckpt);
            }
            const std::string out = io_path(cfg, ad_out, "checkpoint", "--out");
            const TrainResult res = target_adapt(net, {s10, s20}, tc);
            res.net.save(out);
            manifest.output(out);
            if (!ad_log.empty()) {
                res.log.write_csv(ad_log);
                manifest.output(ad_log);
            }
            manifest.write(manifest_path(out), cfg, common);
            json rec{{"checkpoint", out}, {"scheme", scheme_name(tc.scheme)}, {"steps", tc.iterations}};
            if (!res.log.entries.empty()) rec["loss"] = res.log.entries.back().loss.total;
            print_record(common, rec, "wrote " + out + "\n");
        } else if (fuse_cmd->parsed()) {
            const std::string ckpt = io_path(cfg, fu_ckpt, "checkpoint", "--checkpoint");
            manifest.input(ckpt);
            const FusionNet net = FusionNet::load(ckpt);
            const BandStack s10 = load_input(io_path(cfg, fu_in10, "in10", "--in10"), manifest);
            const BandStack s20 = load_input(io_path(cfg, fu_in20, "in20", "--in20"), manifest);
            const BandStack out = fuse(net, s10, s20, tc.mtf.ratio);
            const std::string out_path = io_path(cfg, fu_out, "out", "--out");
            save_stack(out, out_path);
            manifest.output(out_path);
            if (!fu_preview.empty()) {
                // False colour: SWIR, narrow NIR, red edge.
                write_preview_png(out, {5, 3, 0}, fu_preview);
                manifest.output(fu_preview);
            }
            manifest.write(manifest_path(out_path), cfg, common);
            print_record(common, {{"out", out_path}}, "wrote " + out_path + "\n");
        } else if (eval->parsed()) {
            const BandStack pred = load_input(ev_pred, manifest);
            const BandStack gt = load_input(ev_gt, manifest);
            const MetricsReport r = evaluate(pred, gt, tc.mtf.ratio, cfg.metrics_window);
            const std::string text = report_csv_header() + "\n" + report_csv_row(r) + "\n";
            if (common.json)
                std::cout << report_json(r) << '\n';
            else
                std::cout << text;
            if (!ev_out.empty()) {
                std::ofstream out(ev_out, std::ios::trunc);
                require(out.good(), ErrorKind::Io, "cannot write " + ev_out);
                out << (common.json ? report_json(r) + "\n" : text);
                manifest.output(ev_out);
                manifest.write(manifest_path(ev_out), cfg, common);
            }
        }
    } catch (const Error& e) {
        std::cerr << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "io: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
