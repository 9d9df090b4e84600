#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "fcanet/cli/run_config.hpp"

namespace fcanet::cli {

enum ExitCode : int { kOk = 0, kVerificationFailed = 1, kBadInput = 2, kNumericAbort = 3 };

// File names inside the --out directory.
inline constexpr const char* kSpeechManifest = "manifest_speech.tsv";
inline constexpr const char* kNoiseManifest = "manifest_noise.tsv";
inline constexpr const char* kCheckpoint = "checkpoint.fcan";
inline constexpr const char* kHistory = "history.csv";
inline constexpr const char* kEvalReport = "eval.csv";
inline constexpr const char* kFootprint = "footprint.csv";
inline constexpr const char* kGradReport = "gradcheck.csv";
inline constexpr const char* kResolvedConfig = "run.cfg";

// Each command throws fcanet errors; run() maps them to exit codes.
void cmd_prepare(const RunConfig& cfg, const std::filesystem::path& out_dir, std::ostream& log);
void cmd_train(const RunConfig& cfg, const std::filesystem::path& out_dir, const std::filesystem::path& resume,
               std::ostream& log);
void cmd_eval(const RunConfig& cfg, const std::filesystem::path& out_dir, const std::filesystem::path& checkpoint,
              std::ostream& log);
void cmd_count(const RunConfig& cfg, const std::filesystem::path& out_dir, bool all_variants, bool layers,
               std::ostream& log);
// Returns false if any case exceeds the tolerance. coords = 0 checks every
// model coordinate; otherwise that many are sampled per tensor.
bool cmd_gradcheck(const RunConfig& cfg, std::size_t seeds, std::size_t coords, const std::filesystem::path& out_dir,
                   std::ostream& log);

// Full command line: "prepare|train|eval|count|gradcheck [flags]".
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fcanet::cli
