#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "constructa/alignment.hpp"
#include "constructa/gateway.hpp"
#include "constructa/prompts.hpp"
#include "constructa/sampler.hpp"

namespace constructa {

struct PathsConfig {
    std::string schedule;
    std::string corpus_dir;
    std::string term_file;
    std::string preference_db;
    std::string transcript_dir;
    std::string output_dir = "out";
};

struct EvalConfig {
    std::vector<TaskKind> tasks{TaskKind::MVP, TaskKind::DA, TaskKind::AP};
    std::size_t k = 2;
    std::uint64_t seed = 42;
    std::optional<int> date_tolerance_days;
    bool synthesize_negatives = false;
};

struct LossConfig {
    LossWeights weights;
    std::size_t epochs_sft = 10;
    std::size_t epochs = 10;
    double learning_rate = 0.5;
    std::string rule_loss = "zero";
    std::uint64_t seed = 42;
};

/// Everything a subcommand may read. Collection-side randomness defaults to
/// seed 42, inference to 12345.
struct RunConfig {
    PathsConfig paths;
    /// mock:echo | mock:wrong | mock:replay:<file> | mock:stopword | mock:identity | http
    std::string gateway_selector = "mock:echo";
    GatewayConfig gateway;
    SamplerConfig sampler;
    EvalConfig eval;
    LossConfig loss;
    std::size_t embed_dimension = 256;

    /// INI with sections [paths] [gateway] [sampler] [eval] [loss] [embed].
    /// Throws UsageError "InvalidConfig" (bad value or unknown key) or
    /// DataError "MissingFile".
    static RunConfig from_ini_text(const std::string& text);
    static RunConfig from_file(const std::filesystem::path& path);

    /// Every key in fixed order; from_ini_text(to_ini()) is equal.
    std::string to_ini() const;
    /// SHA-256 of to_ini().
    std::string hash() const;

    /// Range checks of the nested sections. Throws UsageError.
    void check() const;
};

/// Comma-separated task list, e.g. "MVP,DA". Throws UsageError "InvalidConfig".
std::vector<TaskKind> parse_task_list(std::string_view text);

}  // namespace constructa
