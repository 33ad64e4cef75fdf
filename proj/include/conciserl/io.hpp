#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace conciserl::io {

/// Write-to-temp then rename, so readers never observe a truncated file.
void atomic_write_file(const std::filesystem::path& path, std::string_view content);

std::string read_file(const std::filesystem::path& path); // throws IoError

/// Non-empty lines of a file, for JSON-lines inputs.
std::vector<std::string> read_lines(const std::filesystem::path& path);

std::string rfc3339_now();

/// Exclusive lock file for a run directory; removed on destruction.
class RunLock {
public:
    explicit RunLock(const std::filesystem::path& dir); // throws IoError when held
    ~RunLock();
    RunLock(const RunLock&) = delete;
    RunLock& operator=(const RunLock&) = delete;

private:
    std::filesystem::path lock_path_;
};

} // namespace conciserl::io
