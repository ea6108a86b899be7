// CLI support layer: list parsing, tracked output directories (so a failing
// run removes its partial files), a deterministic job pool capped by
// PLAPFLOW_THREADS, and error-kind classification for the JSON error envelope.
#pragma once

#include <cstdint>
#include <exception>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace plapcli {

// "64,128,256" -> {64, 128, 256}. Throws plapflow::InvalidArgument on
// malformed or empty input.
std::vector<int> parse_int_list(const std::string& csv);

// "0.2,0.1,0.05" -> {0.2, 0.1, 0.05}.
std::vector<double> parse_double_list(const std::string& csv);

// "1,5,9" or ranges "1-200" (inclusive), mixed: "1-3,7".
std::vector<std::uint64_t> parse_seed_list(const std::string& csv);

// Parses a flat key=value config file: one pair per line, blank lines and
// '#' comments skipped, whitespace around keys and values trimmed. A key
// repeated later in the file replaces the earlier value. Throws
// plapflow::InvalidArgument on unreadable files, lines without '=', or empty
// keys.
std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path);

// Creates the directory up front and remembers every path handed out, so the
// error path can delete partial outputs before the exception escapes to the
// process envelope.
class OutputTracker {
public:
    explicit OutputTracker(const std::string& dir);

    // Registers dir/name as an output file and returns its full path.
    std::string path(const std::string& name);
    void write_json(const std::string& name, const nlohmann::json& j);
    void discard_all() noexcept;

private:
    std::filesystem::path dir_;
    std::vector<std::filesystem::path> written_;
};

// Worker count: min(PLAPFLOW_THREADS if set, hardware concurrency), at least 1.
int thread_budget();

// Runs job(0..count-1) on up to thread_budget() workers pulling from a shared
// index. Callers must write results into per-index slots; aggregation happens
// after the join, so the worker count never influences the output bytes.
// The first exception thrown by a job is rethrown on the calling thread.
void run_indexed_jobs(std::size_t count, const std::function<void(std::size_t)>& job);

// Stable snake_case tag for the JSON error envelope.
std::string error_kind(const std::exception& e);

}  // namespace plapcli
