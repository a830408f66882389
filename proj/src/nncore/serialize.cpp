#include "dbr/nncore/serialize.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>

#include "dbr/errors.hpp"

namespace dbr::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'D', 'B', 'R', 'C', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxString = 1ULL << 30;
}  // namespace

void BinaryWriter::raw(const void* data, std::size_t bytes) {
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
    if (!out_) throw IoError("write failed");
}
void BinaryWriter::u32(std::uint32_t v) { raw(&v, sizeof v); }
void BinaryWriter::u64(std::uint64_t v) { raw(&v, sizeof v); }
void BinaryWriter::f64s(std::span<const double> values) { raw(values.data(), values.size_bytes()); }
void BinaryWriter::string(const std::string& s) {
    u64(s.size());
    raw(s.data(), s.size());
}

void BinaryReader::raw(void* data, std::size_t bytes) {
    in_.read(static_cast<char*>(data), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in_.gcount()) != bytes) throw ValidationError("truncated binary file");
}
std::uint32_t BinaryReader::u32() {
    std::uint32_t v = 0;
    raw(&v, sizeof v);
    return v;
}
std::uint64_t BinaryReader::u64() {
    std::uint64_t v = 0;
    raw(&v, sizeof v);
    return v;
}
void BinaryReader::f64s(std::span<double> values) { raw(values.data(), values.size_bytes()); }
std::string BinaryReader::string() {
    const auto n = u64();
    if (n > kMaxString) throw ValidationError("corrupt string length in binary file");
    std::string s(n, '\0');
    raw(s.data(), n);
    return s;
}
bool BinaryReader::at_end() { return in_.peek() == std::char_traits<char>::eof(); }

const Tensor& Checkpoint::get(const std::string& name) const {
    for (const auto& t : tensors) {
        if (t.name == name) return t.value;
    }
    throw ValidationError("checkpoint has no tensor named " + name);
}

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    BinaryWriter w(out);
    w.raw(kMagic, sizeof kMagic);
    w.u32(kVersion);
    w.string(checkpoint.method);
    w.string(checkpoint.config_json);
    w.u32(static_cast<std::uint32_t>(checkpoint.tensors.size()));
    for (const auto& t : checkpoint.tensors) {
        w.string(t.name);
        w.u32(static_cast<std::uint32_t>(t.value.rank()));
        for (auto d : t.value.shape()) w.u64(d);
        w.f64s(t.value.values());
    }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("missing checkpoint " + path.string());
    BinaryReader r(in);
    char magic[8];
    r.raw(magic, sizeof magic);
    if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) throw ValidationError(path.string() + " is not a checkpoint");
    if (const auto v = r.u32(); v != kVersion) {
        throw ValidationError("unsupported checkpoint version " + std::to_string(v));
    }
    Checkpoint ck;
    ck.method = r.string();
    ck.config_json = r.string();
    const auto count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        NamedTensor t;
        t.name = r.string();
        const auto rank = r.u32();
        if (rank == 0 || rank > 8) throw ValidationError("corrupt tensor rank in " + path.string());
        Shape shape(rank);
        for (auto& d : shape) d = r.u64();
        t.value = Tensor(shape);
        r.f64s(t.value.values());
        ck.tensors.push_back(std::move(t));
    }
    if (!r.at_end()) throw ValidationError("trailing bytes in " + path.string());
    return ck;
}

namespace {
struct DigestDeleter {
    void operator()(EVP_MD_CTX* ctx) const { EVP_MD_CTX_free(ctx); }
};

std::string to_hex(const unsigned char* digest, unsigned int len) {
    static constexpr char kHex[] = "0123456789abcdef";
    std::string s;
    s.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        s.push_back(kHex[digest[i] >> 4]);
        s.push_back(kHex[digest[i] & 0xF]);
    }
    return s;
}
}  // namespace

std::string sha256_hex(std::span<const unsigned char> bytes) {
    std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx(EVP_MD_CTX_new());
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
        EVP_DigestFinal_ex(ctx.get(), digest.data(), &len) != 1) {
        throw IoError("sha256 failed");
    }
    return to_hex(digest.data(), len);
}

std::string sha256_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifactError("missing file " + path.string());
    std::unique_ptr<EVP_MD_CTX, DigestDeleter> ctx(EVP_MD_CTX_new());
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) throw IoError("sha256 failed");
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx.get(), digest.data(), &len);
    return to_hex(digest.data(), len);
}

}  // namespace dbr::nn
