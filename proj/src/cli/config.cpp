#include "config.hpp"

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include "plapflow/errors.hpp"

namespace plapcli {

namespace {

std::vector<std::string> split_commas(const std::string& csv) {
    std::vector<std::string> parts;
    std::string item;
    std::istringstream ss(csv);
    while (std::getline(ss, item, ',')) {
        if (!item.empty()) parts.push_back(item);
    }
    if (parts.empty())
        throw plapflow::InvalidArgument("empty list argument: '" + csv + "'");
    return parts;
}

}  // namespace

std::vector<int> parse_int_list(const std::string& csv) {
    std::vector<int> out;
    for (const auto& item : split_commas(csv)) {
        std::size_t used = 0;
        int v = 0;
        try {
            v = std::stoi(item, &used);
        } catch (const std::exception&) {
            throw plapflow::InvalidArgument("not an integer: '" + item + "'");
        }
        if (used != item.size())
            throw plapflow::InvalidArgument("not an integer: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<double> parse_double_list(const std::string& csv) {
    std::vector<double> out;
    for (const auto& item : split_commas(csv)) {
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(item, &used);
        } catch (const std::exception&) {
            throw plapflow::InvalidArgument("not a number: '" + item + "'");
        }
        if (used != item.size())
            throw plapflow::InvalidArgument("not a number: '" + item + "'");
        out.push_back(v);
    }
    return out;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
    std::vector<std::uint64_t> out;
    for (const auto& item : split_commas(csv)) {
        const auto dash = item.find('-');
        try {
            if (dash == std::string::npos) {
                out.push_back(std::stoull(item));
            } else {
                const std::uint64_t lo = std::stoull(item.substr(0, dash));
                const std::uint64_t hi = std::stoull(item.substr(dash + 1));
                if (hi < lo)
                    throw plapflow::InvalidArgument("descending seed range: '" + item + "'");
                for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
            }
        } catch (const plapflow::Error&) {
            throw;
        } catch (const std::exception&) {
            throw plapflow::InvalidArgument("not a seed or seed range: '" + item + "'");
        }
    }
    return out;
}

std::vector<std::pair<std::string, std::string>> read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw plapflow::InvalidArgument("cannot open config file '" + path + "'");
    const auto trim = [](const std::string& s) {
        std::size_t b = 0, e = s.size();
        while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
        while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
        return s.substr(b, e - b);
    };
    std::vector<std::pair<std::string, std::string>> pairs;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string entry = trim(line);
        if (entry.empty() || entry.front() == '#') continue;
        const std::size_t eq = entry.find('=');
        if (eq == std::string::npos)
            throw plapflow::InvalidArgument("config file '" + path + "' line " +
                                            std::to_string(lineno) +
                                            ": expected key=value, got '" + entry + "'");
        const std::string key = trim(entry.substr(0, eq));
        const std::string value = trim(entry.substr(eq + 1));
        if (key.empty())
            throw plapflow::InvalidArgument("config file '" + path + "' line " +
                                            std::to_string(lineno) + ": empty key");
        bool replaced = false;
        for (auto& kv : pairs) {
            if (kv.first == key) {
                kv.second = value;
                replaced = true;
                break;
            }
        }
        if (!replaced) pairs.emplace_back(key, value);
    }
    return pairs;
}

OutputTracker::OutputTracker(const std::string& dir) : dir_(dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec)
        throw plapflow::IoError("cannot create output directory " + dir_.string() + ": " +
                                ec.message());
}

std::string OutputTracker::path(const std::string& name) {
    auto p = dir_ / name;
    written_.push_back(p);
    return p.string();
}

void OutputTracker::write_json(const std::string& name, const nlohmann::json& j) {
    const std::string p = path(name);
    std::ofstream out(p, std::ios::binary);
    if (!out)
        throw plapflow::IoError("cannot open " + p);
    out << j.dump(2) << "\n";
    if (!out)
        throw plapflow::IoError("write failed for " + p);
}

void OutputTracker::discard_all() noexcept {
    for (const auto& p : written_) {
        std::error_code ec;
        std::filesystem::remove(p, ec);
    }
    written_.clear();
}

int thread_budget() {
    int budget = static_cast<int>(std::thread::hardware_concurrency());
    if (budget < 1) budget = 1;
    if (const char* env = std::getenv("PLAPFLOW_THREADS")) {
        try {
            const int cap = std::stoi(env);
            if (cap >= 1 && cap < budget) budget = cap;
        } catch (const std::exception&) {
            throw plapflow::InvalidArgument(std::string("PLAPFLOW_THREADS is not an integer: ") +
                                            env);
        }
    }
    return budget;
}

void run_indexed_jobs(std::size_t count, const std::function<void(std::size_t)>& job) {
    if (count == 0) return;
    const int workers =
        static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(thread_budget()), count));
    if (workers <= 1) {
        for (std::size_t i = 0; i < count; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mutex;
    auto worker = [&]() {
        while (true) {
            const std::size_t i = next.fetch_add(1);
            if (i >= count) return;
            try {
                job(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
    if (first_error) std::rethrow_exception(first_error);
}

std::string error_kind(const std::exception& e) {
    using namespace plapflow;
    if (dynamic_cast<const InvalidArgument*>(&e)) return "invalid_argument";
    if (dynamic_cast<const PartitionMismatch*>(&e)) return "partition_mismatch";
    if (dynamic_cast<const NonFinite*>(&e)) return "non_finite";
    if (dynamic_cast<const OutOfDomain*>(&e)) return "out_of_domain";
    if (dynamic_cast<const OutOfRange*>(&e)) return "out_of_range";
    if (dynamic_cast<const DegenerateKernel*>(&e)) return "degenerate_kernel";
    if (dynamic_cast<const NoConvergence*>(&e)) return "no_convergence";
    if (dynamic_cast<const InfeasibleSchedule*>(&e)) return "infeasible_schedule";
    if (dynamic_cast<const ScaleViolation*>(&e)) return "scale_violation";
    if (dynamic_cast<const TooLarge*>(&e)) return "too_large";
    if (dynamic_cast<const MarginViolation*>(&e)) return "margin_violation";
    if (dynamic_cast<const UnknownTest*>(&e)) return "unknown_test";
    if (dynamic_cast<const DegenerateFit*>(&e)) return "degenerate_fit";
    if (dynamic_cast<const IoError*>(&e)) return "io_error";
    if (dynamic_cast<const Error*>(&e)) return "error";
    return "unexpected";
}

}  // namespace plapcli
