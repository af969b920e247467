// Copyright Contributors to the promptseg project.
// SPDX-License-Identifier: Apache-2.0

#include "promptseg/protocol/shm.hpp"

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>
#include <zlib.h>

#include <cerrno>
#include <cstring>
#include <filesystem>

#include "promptseg/error.hpp"

namespace promptseg::protocol {

namespace {

std::string posix_name(const std::string& name) {
  return name.empty() || name.front() != '/' ? "/" + name : name;
}

std::string errno_text() { return std::strerror(errno); }

struct Fd {
  int fd = -1;
  ~Fd() {
    if (fd >= 0) ::close(fd);
  }
};

void* map(int fd, std::size_t size, bool writable) {
  if (size == 0) return nullptr;
  void* addr = ::mmap(nullptr, size, writable ? PROT_READ | PROT_WRITE : PROT_READ,
                      MAP_SHARED, fd, 0);
  if (addr == MAP_FAILED) throw Error(ErrorCode::IoError, "mmap failed: " + errno_text());
  return addr;
}

void check_payload(DType dtype, const std::vector<std::uint64_t>& shape, std::size_t n) {
  TensorHeader probe;
  probe.dtype = dtype;
  probe.shape = shape;
  if (probe.byte_size() != n) {
    throw Error(ErrorCode::InvalidArgument, "payload size does not match dtype x shape");
  }
}

}  // namespace

std::uint32_t crc32(std::span<const std::uint8_t> bytes) noexcept {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  const std::uint8_t* p = bytes.data();
  std::size_t left = bytes.size();
  while (left > 0) {
    const uInt chunk = static_cast<uInt>(std::min<std::size_t>(left, 1u << 30));
    crc = ::crc32(crc, p, chunk);
    p += chunk;
    left -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

SharedSegment SharedSegment::create(const std::string& name, std::size_t size) {
  const std::string pname = posix_name(name);
  Fd fd{::shm_open(pname.c_str(), O_CREAT | O_EXCL | O_RDWR, 0600)};
  if (fd.fd < 0) {
    if (errno == EEXIST) throw Error(ErrorCode::SegmentBusy, "segment in use: " + name);
    throw Error(ErrorCode::IoError, "shm_open(" + name + ") failed: " + errno_text());
  }
  SharedSegment seg;
  seg.name_ = name;
  seg.owner_ = true;
  if (::ftruncate(fd.fd, static_cast<off_t>(size)) != 0) {
    ::shm_unlink(pname.c_str());
    throw Error(ErrorCode::IoError, "ftruncate failed: " + errno_text());
  }
  try {
    seg.addr_ = map(fd.fd, size, true);
  } catch (...) {
    ::shm_unlink(pname.c_str());
    throw;
  }
  seg.size_ = size;
  return seg;
}

SharedSegment SharedSegment::open(const std::string& name, bool writable) {
  const std::string pname = posix_name(name);
  Fd fd{::shm_open(pname.c_str(), writable ? O_RDWR : O_RDONLY, 0)};
  if (fd.fd < 0) {
    if (errno == ENOENT) throw Error(ErrorCode::SegmentMissing, "no such segment: " + name);
    throw Error(ErrorCode::IoError, "shm_open(" + name + ") failed: " + errno_text());
  }
  struct stat st {};
  if (::fstat(fd.fd, &st) != 0) throw Error(ErrorCode::IoError, "fstat failed");
  SharedSegment seg;
  seg.name_ = name;
  seg.size_ = static_cast<std::size_t>(st.st_size);
  seg.addr_ = map(fd.fd, seg.size_, writable);
  return seg;
}

SharedSegment::SharedSegment(SharedSegment&& o) noexcept
    : name_(std::move(o.name_)), addr_(o.addr_), size_(o.size_), owner_(o.owner_) {
  o.addr_ = nullptr;
  o.size_ = 0;
  o.owner_ = false;
  o.name_.clear();
}

SharedSegment& SharedSegment::operator=(SharedSegment&& o) noexcept {
  if (this != &o) {
    reset();
    name_ = std::move(o.name_);
    addr_ = o.addr_;
    size_ = o.size_;
    owner_ = o.owner_;
    o.addr_ = nullptr;
    o.size_ = 0;
    o.owner_ = false;
    o.name_.clear();
  }
  return *this;
}

SharedSegment::~SharedSegment() { reset(); }

void SharedSegment::unlink() noexcept {
  if (owner_ && !name_.empty()) {
    ::shm_unlink(posix_name(name_).c_str());
    owner_ = false;
  }
}

void SharedSegment::reset() noexcept {
  if (addr_ != nullptr) ::munmap(addr_, size_);
  addr_ = nullptr;
  unlink();
  size_ = 0;
}

WrittenTensor shm_write(const std::string& name, DType dtype,
                        std::vector<std::uint64_t> shape,
                        std::span<const std::uint8_t> payload) {
  check_payload(dtype, shape, payload.size());
  WrittenTensor out{SharedSegment::create(name, payload.size()), {}};
  if (!payload.empty()) std::memcpy(out.segment.data().data(), payload.data(), payload.size());
  out.header.dtype = dtype;
  out.header.shape = std::move(shape);
  out.header.checksum = crc32(payload);
  out.header.shm_name = name;
  return out;
}

TensorHeader shm_fill(const std::string& name, DType dtype, std::vector<std::uint64_t> shape,
                      std::span<const std::uint8_t> payload) {
  check_payload(dtype, shape, payload.size());
  SharedSegment seg = SharedSegment::open(name, true);
  if (seg.size() < payload.size()) {
    throw Error(ErrorCode::InvalidArgument, "segment too small for payload: " + name);
  }
  if (!payload.empty()) std::memcpy(seg.data().data(), payload.data(), payload.size());
  TensorHeader h;
  h.dtype = dtype;
  h.shape = std::move(shape);
  h.checksum = crc32(payload);
  h.shm_name = name;
  return h;
}

SharedSegment shm_map_verified(const TensorHeader& header) {
  SharedSegment seg = SharedSegment::open(header.shm_name, false);
  const std::uint64_t n = header.byte_size();
  if (seg.size() < n) {
    throw Error(ErrorCode::ChecksumMismatch, "segment shorter than header: " + header.shm_name);
  }
  if (crc32(seg.data().first(n)) != header.checksum) {
    throw Error(ErrorCode::ChecksumMismatch, "checksum mismatch on " + header.shm_name);
  }
  return seg;
}

std::vector<std::uint8_t> shm_read(const TensorHeader& header) {
  const SharedSegment seg = SharedSegment::open(header.shm_name, false);
  const std::uint64_t n = header.byte_size();
  if (seg.size() < n) {
    throw Error(ErrorCode::ChecksumMismatch, "segment shorter than header: " + header.shm_name);
  }
  // Verify the copy rather than the mapping so a concurrent writer cannot
  // slip bytes in between the check and the copy.
  const auto view = seg.data().first(n);
  std::vector<std::uint8_t> out(view.begin(), view.end());
  if (crc32(out) != header.checksum) {
    throw Error(ErrorCode::ChecksumMismatch, "checksum mismatch on " + header.shm_name);
  }
  return out;
}

std::vector<std::string> list_segments(std::string_view prefix) {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& entry : std::filesystem::directory_iterator("/dev/shm", ec)) {
    const std::string name = entry.path().filename().string();
    if (name.compare(0, prefix.size(), prefix) == 0) out.push_back(name);
  }
  return out;
}

}  // namespace promptseg::protocol
