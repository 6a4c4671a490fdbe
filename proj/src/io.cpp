#include "trajdiff/io.hpp"

#include <openssl/evp.h>

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <stdexcept>

#include "trajdiff/errors.hpp"

static_assert(std::endian::native == std::endian::little, "on-disk format is little-endian");

namespace trajdiff {

namespace {

std::string to_hex(const unsigned char* digest, unsigned len)
{
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string out(2 * len, '0');
    for (unsigned i = 0; i < len; ++i) {
        out[2 * i] = kDigits[digest[i] >> 4];
        out[2 * i + 1] = kDigits[digest[i] & 0xf];
    }
    return out;
}

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), EVP_MD_CTX_free)
    {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1)
            throw std::runtime_error("sha256: init failed");
    }
    void update(const void* data, std::size_t len)
    {
        if (EVP_DigestUpdate(ctx_.get(), data, len) != 1) throw std::runtime_error("sha256: update failed");
    }
    std::string hex()
    {
        std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
        unsigned len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), digest.data(), &len) != 1)
            throw std::runtime_error("sha256: final failed");
        return to_hex(digest.data(), len);
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

}  // namespace

std::string sha256_hex(std::span<const std::byte> bytes)
{
    Sha256 h;
    h.update(bytes.data(), bytes.size());
    return h.hex();
}

std::string sha256_hex(const std::string& text)
{
    Sha256 h;
    h.update(text.data(), text.size());
    return h.hex();
}

std::string sha256_file(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open " + path.string());
    Sha256 h;
    std::vector<char> buf(1 << 20);
    while (in) {
        in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
        h.update(buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    return h.hex();
}

std::string manifest_hash(const json& manifest)
{
    json copy = manifest;
    if (copy.is_object()) copy.erase("timing");
    return sha256_hex(copy.dump());
}

json read_json(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void write_json(const std::filesystem::path& path, const json& value)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << value.dump(2) << '\n';
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

void write_bytes(const std::filesystem::path& path, std::span<const std::byte> bytes)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

template <typename T>
void write_binary(const std::filesystem::path& path, std::span<const T> values)
{
    write_bytes(path, std::as_bytes(values));
}

template void write_binary<float>(const std::filesystem::path&, std::span<const float>);
template void write_binary<double>(const std::filesystem::path&, std::span<const double>);

std::vector<std::byte> read_bytes(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw FormatError("cannot open " + path.string());
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<std::byte> out(size);
    in.seekg(0);
    in.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(size));
    if (!in) throw FormatError("short read from " + path.string());
    return out;
}

template <typename T>
std::vector<T> take(std::span<const std::byte> bytes, std::size_t offset, std::size_t count)
{
    if (offset > bytes.size() || count > (bytes.size() - offset) / sizeof(T))
        throw FormatError("binary blob shorter than its manifest declares");
    std::vector<T> out(count);
    std::memcpy(out.data(), bytes.data() + offset, count * sizeof(T));
    return out;
}

template std::vector<float> take<float>(std::span<const std::byte>, std::size_t, std::size_t);
template std::vector<double> take<double>(std::span<const std::byte>, std::size_t, std::size_t);

}  // namespace trajdiff
