#pragma once

// File I/O helpers: transparent gzip input and a small CSV writer.

#include <zlib.h>

#include <fstream>
#include <istream>
#include <memory>
#include <stdexcept>
#include <streambuf>
#include <string>

namespace evactrace {

// Read-only streambuf over zlib's gzFile; handles plain files too, since
// gzread passes uncompressed data through.
class GzipStreambuf : public std::streambuf {
 public:
  explicit GzipStreambuf(const std::string& path) {
    file_ = gzopen(path.c_str(), "rb");
    if (!file_) throw std::runtime_error("cannot open: " + path);
    gzbuffer(file_, kBufSize);
    buf_ = std::make_unique<char[]>(kBufSize);
  }
  ~GzipStreambuf() override {
    if (file_) gzclose(file_);
  }
  GzipStreambuf(const GzipStreambuf&) = delete;
  GzipStreambuf& operator=(const GzipStreambuf&) = delete;

 protected:
  int_type underflow() override {
    int n = gzread(file_, buf_.get(), kBufSize);
    if (n <= 0) return traits_type::eof();
    setg(buf_.get(), buf_.get(), buf_.get() + n);
    return traits_type::to_int_type(*gptr());
  }

 private:
  static constexpr unsigned kBufSize = 1 << 18;
  gzFile file_ = nullptr;
  std::unique_ptr<char[]> buf_;
};

class GzipInputStream : public std::istream {
 public:
  explicit GzipInputStream(const std::string& path)
      : std::istream(nullptr), buf_(path) {
    rdbuf(&buf_);
  }

 private:
  GzipStreambuf buf_;
};

inline std::unique_ptr<std::istream> open_input(const std::string& path) {
  return std::make_unique<GzipInputStream>(path);
}

inline std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write: " + path);
  return out;
}

// 64-bit FNV-1a over a file's bytes; used for input digests in the run
// manifest.
inline std::string file_digest_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for digest: " + path);
  std::uint64_t h = 1469598103934665603ULL;
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(h));
  return hex;
}

}  // namespace evactrace
