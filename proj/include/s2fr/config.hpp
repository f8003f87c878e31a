#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <json.hpp>

#include "s2fr/train.hpp"

namespace s2fr {

/// Everything a CLI run depends on. The mtf, detail and loss sections live
/// inside `train` because training consumes all of them.
struct ExperimentConfig {
    TrainConfig train;
    int metrics_window = 32;
    std::map<std::string, std::string> io;  // named file paths
};

/// Keys accepted under "io".
inline constexpr std::array<const char*, 8> kIoKeys{"in10", "in20", "gt", "pred", "checkpoint", "out", "log",
                                                    "detail"};

/// Strict parse: unknown keys and wrong types are config errors naming the key path.
/// Missing keys keep their defaults.
ExperimentConfig config_from_json(const nlohmann::json& doc);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Complete document with every key, defaults included.
nlohmann::json config_to_json(const ExperimentConfig& config);

/// Throws a config error if any value is out of range.
void validate(const ExperimentConfig& config);

/// Human-readable listing of every key and its default.
std::string config_defaults_help();

}  // namespace s2fr
