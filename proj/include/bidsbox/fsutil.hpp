#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace bidsbox::fsutil {

namespace fs = std::filesystem;

/// Throws Error{IoError}.
std::string read_file(const fs::path &path);
void write_file(const fs::path &path, std::string_view bytes);

/// Writes to a temporary sibling and renames it over `path`.
void write_file_atomic(const fs::path &path, std::string_view bytes);

/// Rename, falling back to copy+remove across filesystems. Creates parents.
void move_file(const fs::path &from, const fs::path &to);

/// Regular files under root as sorted generic relative paths.
std::vector<std::string> list_files(const fs::path &root);

/// Removes now-empty directories from `dir` up to (not including) `stop`.
void prune_empty_dirs(fs::path dir, const fs::path &stop);

std::string random_suffix();

/// Current UTC time as ISO-8601 with a trailing 'Z'.
std::string utc_now_iso8601();

/// Exclusive lock file created with O_EXCL; removed on destruction.
/// Throws Error{Busy} when the file already exists.
class LockFile {
public:
    explicit LockFile(fs::path path);
    ~LockFile();
    LockFile(const LockFile &) = delete;
    LockFile &operator=(const LockFile &) = delete;

    const fs::path &path() const noexcept { return path_; }

private:
    fs::path path_;
};

/// Removes a path tree on scope exit unless released.
class TempTree {
public:
    explicit TempTree(fs::path path) : path_(std::move(path)) {}
    ~TempTree();
    TempTree(const TempTree &) = delete;
    TempTree &operator=(const TempTree &) = delete;

    const fs::path &path() const noexcept { return path_; }
    void release() noexcept { released_ = true; }

private:
    fs::path path_;
    bool released_ = false;
};

} // namespace bidsbox::fsutil
