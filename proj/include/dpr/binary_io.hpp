// Licensed under the terms of the Apache 2.0 license. See LICENSE in the project root.
#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <vector>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include "dpr/error.hpp"

namespace dpr {

static_assert(std::endian::native == std::endian::little,
              "on-disk formats are little-endian and written with raw copies");

/// Read-only memory mapping of a whole file. Movable, not copyable.
class MappedFile {
  public:
    MappedFile() = default;

    explicit MappedFile(const std::string& path) {
        int fd = ::open(path.c_str(), O_RDONLY);
        if (fd < 0) {
            throw IoError("cannot open " + path);
        }
        struct stat st {};
        if (::fstat(fd, &st) != 0) {
            ::close(fd);
            throw IoError("cannot stat " + path);
        }
        size_ = static_cast<std::size_t>(st.st_size);
        if (size_ > 0) {
            void* p = ::mmap(nullptr, size_, PROT_READ, MAP_PRIVATE, fd, 0);
            if (p == MAP_FAILED) {
                ::close(fd);
                throw IoError("cannot mmap " + path);
            }
            data_ = static_cast<const std::uint8_t*>(p);
        }
        ::close(fd);
    }

    MappedFile(const MappedFile&) = delete;
    MappedFile& operator=(const MappedFile&) = delete;

    MappedFile(MappedFile&& other) noexcept
        : data_(std::exchange(other.data_, nullptr)), size_(std::exchange(other.size_, 0)) {}

    MappedFile& operator=(MappedFile&& other) noexcept {
        if (this != &other) {
            release();
            data_ = std::exchange(other.data_, nullptr);
            size_ = std::exchange(other.size_, 0);
        }
        return *this;
    }

    ~MappedFile() { release(); }

    [[nodiscard]] std::span<const std::uint8_t> bytes() const { return {data_, size_}; }
    [[nodiscard]] std::size_t size() const { return size_; }

  private:
    void release() noexcept {
        if (data_ != nullptr) {
            ::munmap(const_cast<std::uint8_t*>(data_), size_);
            data_ = nullptr;
        }
    }

    const std::uint8_t* data_ = nullptr;
    std::size_t size_ = 0;
};

/// Appends little-endian scalars and length-prefixed strings to a byte buffer.
class ByteWriter {
  public:
    template <typename T>
        requires std::is_arithmetic_v<T>
    void put(T value) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
        buf_.insert(buf_.end(), p, p + sizeof(T));
    }

    void put_string(std::string_view s) {
        if (s.size() > UINT32_MAX) {
            throw DataError("string longer than 2^32 bytes");
        }
        put(static_cast<std::uint32_t>(s.size()));
        buf_.insert(buf_.end(), s.begin(), s.end());
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void put_array(std::span<const T> values) {
        const auto* p = reinterpret_cast<const std::uint8_t*>(values.data());
        buf_.insert(buf_.end(), p, p + values.size_bytes());
    }

    [[nodiscard]] const std::vector<std::uint8_t>& bytes() const { return buf_; }
    std::vector<std::uint8_t> take() { return std::move(buf_); }
    void clear() { buf_.clear(); }

  private:
    std::vector<std::uint8_t> buf_;
};

/// Bounds-checked cursor over a byte span. Every overrun is a DataError.
class ByteReader {
  public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    template <typename T>
        requires std::is_arithmetic_v<T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }

    std::string get_string() {
        auto n = get<std::uint32_t>();
        need(n);
        std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
        pos_ += n;
        return s;
    }

    template <typename T>
        requires std::is_arithmetic_v<T>
    void get_array(std::span<T> out) {
        need(out.size_bytes());
        std::memcpy(out.data(), bytes_.data() + pos_, out.size_bytes());
        pos_ += out.size_bytes();
    }

    [[nodiscard]] std::size_t position() const { return pos_; }
    [[nodiscard]] std::size_t remaining() const { return bytes_.size() - pos_; }

  private:
    void need(std::size_t n) const {
        if (n > bytes_.size() - pos_) {
            throw DataError("truncated record");
        }
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

inline void write_bytes(std::ofstream& out, std::span<const std::uint8_t> bytes) {
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

inline std::vector<std::uint8_t> read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open " + path);
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace dpr
