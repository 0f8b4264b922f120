#include "bidsbox/fsutil.hpp"

#include "bidsbox/error.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

namespace bidsbox::fsutil {

std::string read_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::IoError, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path &path, std::string_view bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    if (!out)
        throw Error(ErrorCode::IoError, "short write to " + path.string());
}

void write_file_atomic(const fs::path &path, std::string_view bytes)
{
    auto tmp = path;
    tmp += ".tmp-" + random_suffix();
    write_file(tmp, bytes);
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error(ErrorCode::IoError, "cannot replace " + path.string());
    }
}

void move_file(const fs::path &from, const fs::path &to)
{
    std::error_code ec;
    fs::create_directories(to.parent_path(), ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot create " + to.parent_path().string() + ": " +
                                            ec.message());
    fs::rename(from, to, ec);
    if (!ec)
        return;
    if (ec != std::errc::cross_device_link)
        throw Error(ErrorCode::IoError,
                    "cannot move " + from.string() + " to " + to.string() + ": " + ec.message());
    fs::copy_file(from, to, fs::copy_options::overwrite_existing, ec);
    if (ec)
        throw Error(ErrorCode::IoError, "cannot copy " + from.string() + ": " + ec.message());
    fs::remove(from, ec);
}

std::vector<std::string> list_files(const fs::path &root)
{
    std::vector<std::string> out;
    std::error_code ec;
    for (auto it = fs::recursive_directory_iterator(root, ec);
         !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (it->is_regular_file())
            out.push_back(fs::relative(it->path(), root).generic_string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

void prune_empty_dirs(fs::path dir, const fs::path &stop)
{
    std::error_code ec;
    while (!dir.empty() && dir != stop && fs::is_directory(dir, ec) && fs::is_empty(dir, ec)) {
        fs::remove(dir, ec);
        dir = dir.parent_path();
    }
}

std::string random_suffix()
{
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(rng()));
    return buf;
}

std::string utc_now_iso8601()
{
    std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

LockFile::LockFile(fs::path path) : path_(std::move(path))
{
    int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY | O_CLOEXEC, 0644);
    if (fd < 0) {
        if (errno == EEXIST)
            throw Error(ErrorCode::Busy, "dataset is locked by another operation (" +
                                             path_.string() + ")");
        throw Error(ErrorCode::IoError,
                    "cannot create lock " + path_.string() + ": " + std::strerror(errno));
    }
    auto pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] auto n = ::write(fd, pid.data(), pid.size());
    ::close(fd);
}

LockFile::~LockFile()
{
    std::error_code ec;
    fs::remove(path_, ec);
}

TempTree::~TempTree()
{
    if (released_)
        return;
    std::error_code ec;
    fs::remove_all(path_, ec);
}

} // namespace bidsbox::fsutil
