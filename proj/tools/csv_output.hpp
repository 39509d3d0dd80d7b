#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <memory>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "evmchaos/version.hpp"
#include "json.hpp"

namespace evmtool {

/// Shortest round-trip decimal form of a double (%.17g is exact for IEEE
/// binary64), so output bytes carry the full value and nothing run-dependent.
inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string fmt(long x) { return std::to_string(x); }
inline std::string fmt(int x) { return std::to_string(x); }

/// CSV sink with the standard metadata preamble.  Every file starts with the
/// tool version and the full effective run configuration; extra lines carry
/// per-run diagnostics (sweep bracket info and the like).  Wall times are
/// deliberately absent: equal configs must produce byte-identical files.
class CsvFile {
public:
    explicit CsvFile(const std::string& path) {
        if (path.empty() || path == "-") {
            os_ = &std::cout;
        } else {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_) throw std::runtime_error("cannot open output file: " + path);
            os_ = file_.get();
        }
    }

    void preamble(const nlohmann::ordered_json& config,
                  const std::vector<std::string>& extra = {}) {
        *os_ << "# evmchaos " << EVMCHAOS_VERSION << "\n";
        *os_ << "# config: " << config.dump() << "\n";
        for (const auto& line : extra) *os_ << "# " << line << "\n";
    }

    void columns(const std::vector<std::string>& names) {
        for (std::size_t i = 0; i < names.size(); ++i)
            *os_ << (i ? "," : "") << names[i];
        *os_ << "\n";
    }

    /// One data row; fields are already formatted strings.
    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i)
            *os_ << (i ? "," : "") << fields[i];
        *os_ << "\n";
    }

    std::ostream& stream() { return *os_; }

private:
    std::ostream* os_ = nullptr;
    std::unique_ptr<std::ofstream> file_;
};

}  // namespace evmtool
