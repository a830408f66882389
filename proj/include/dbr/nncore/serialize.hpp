#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dbr/nncore/tensor.hpp"

namespace dbr::nn {

/// Little-endian primitive writer over an output stream.
class BinaryWriter {
public:
    explicit BinaryWriter(std::ostream& out) : out_(out) {}

    void u32(std::uint32_t v);
    void u64(std::uint64_t v);
    void f64s(std::span<const double> values);
    void string(const std::string& s);
    void raw(const void* data, std::size_t bytes);

private:
    std::ostream& out_;
};

/// Matching reader; throws ValidationError on truncated input.
class BinaryReader {
public:
    explicit BinaryReader(std::istream& in) : in_(in) {}

    std::uint32_t u32();
    std::uint64_t u64();
    void f64s(std::span<double> values);
    std::string string();
    void raw(void* data, std::size_t bytes);
    bool at_end();

private:
    std::istream& in_;
};

struct NamedTensor {
    std::string name;
    Tensor value;
};

/// Model file: versioned header, method tag, config echo (JSON text) and raw
/// 64-bit arrays in declaration order.
struct Checkpoint {
    std::string method;
    std::string config_json;
    std::vector<NamedTensor> tensors;

    const Tensor& get(const std::string& name) const;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string sha256_hex(std::span<const unsigned char> bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace dbr::nn
