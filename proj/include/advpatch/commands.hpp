#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

namespace advpatch {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailed = 1;  // verify-theory: a contract did not hold
inline constexpr int kExitInput = 2;   // bad configuration or input files
inline constexpr int kExitNumeric = 3;

/// Trains a patch. Writes patch.png, checkpoint.bin, loss_history.csv and
/// report.json (training-set metrics) into `out`.
int cmd_generate(const std::filesystem::path& config, const std::filesystem::path& out, std::ostream& log);

/// Scores a patch PNG on a manifest. Writes report.json and map_table.csv.
int cmd_eval(const std::filesystem::path& patch, const std::filesystem::path& dataset,
             const std::filesystem::path& config, const std::filesystem::path& out, std::ostream& log);

/// Runs the theory checks and writes claim,predicted,observed,status rows.
/// Returns kExitOk iff every contract row passes.
int cmd_verify_theory(int trials, std::uint64_t seed, const std::filesystem::path& out_csv, std::ostream& log);

/// Renders a synthetic dataset plus reference.png and printable_colors.txt.
int cmd_make_scenes(const std::filesystem::path& spec, const std::filesystem::path& out, std::ostream& log);

/// UTC ISO-8601 time; SOURCE_DATE_EPOCH, when set, replaces the clock so
/// reports can be reproduced byte for byte.
std::string utc_timestamp();

}  // namespace advpatch
