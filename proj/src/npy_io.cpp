#include "mtuq/io/npy_io.hpp"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace mtuq::io {

namespace {
constexpr char kMagic[6] = {'\x93', 'N', 'U', 'M', 'P', 'Y'};
}

void write_npy(const std::string& path, const Tensor& t) {
    if (t.shape.empty() || t.shape.size() > 2)
        throw std::invalid_argument("write_npy supports rank 1 or 2 tensors");
    std::string shape = "(";
    for (size_t i = 0; i < t.shape.size(); ++i) shape += std::to_string(t.shape[i]) + ", ";
    shape += ")";
    std::string header =
        "{'descr': '<f4', 'fortran_order': False, 'shape': " + shape + ", }";
    // pad so that magic(6) + version(2) + hlen(2) + header is a multiple of 64
    const size_t base = 10 + header.size() + 1;
    header.append((64 - base % 64) % 64, ' ');
    header.push_back('\n');

    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open npy for writing: " + path);
    f.write(kMagic, 6);
    const uint8_t ver[2] = {1, 0};
    f.write(reinterpret_cast<const char*>(ver), 2);
    const uint16_t hlen = uint16_t(header.size());
    f.write(reinterpret_cast<const char*>(&hlen), 2);
    f.write(header.data(), std::streamsize(header.size()));
    f.write(reinterpret_cast<const char*>(t.data()),
            std::streamsize(t.numel() * sizeof(float)));
    if (!f) throw std::runtime_error("failed writing npy: " + path);
}

Tensor read_npy(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open npy: " + path);
    char magic[6];
    f.read(magic, 6);
    if (!f || std::memcmp(magic, kMagic, 6) != 0)
        throw std::runtime_error("not an npy file: " + path);
    uint8_t ver[2];
    f.read(reinterpret_cast<char*>(ver), 2);
    if (ver[0] != 1) throw std::runtime_error("unsupported npy version in " + path);
    uint16_t hlen = 0;
    f.read(reinterpret_cast<char*>(&hlen), 2);
    std::string header(hlen, '\0');
    f.read(header.data(), hlen);
    if (!f) throw std::runtime_error("truncated npy header: " + path);

    if (header.find("'<f4'") == std::string::npos)
        throw std::runtime_error("npy dtype must be little-endian float32: " + path);
    if (header.find("'fortran_order': False") == std::string::npos)
        throw std::runtime_error("npy must be C-ordered: " + path);
    const size_t lp = header.find('(');
    const size_t rp = header.find(')');
    if (lp == std::string::npos || rp == std::string::npos || rp < lp)
        throw std::runtime_error("malformed npy shape: " + path);
    std::vector<int> shape;
    std::string inner = header.substr(lp + 1, rp - lp - 1);
    size_t pos = 0;
    while (pos < inner.size()) {
        while (pos < inner.size() && !std::isdigit(uint8_t(inner[pos]))) ++pos;
        if (pos >= inner.size()) break;
        size_t end = pos;
        while (end < inner.size() && std::isdigit(uint8_t(inner[end]))) ++end;
        shape.push_back(std::stoi(inner.substr(pos, end - pos)));
        pos = end;
    }
    if (shape.empty() || shape.size() > 2)
        throw std::runtime_error("npy rank must be 1 or 2: " + path);

    Tensor t(shape);
    f.read(reinterpret_cast<char*>(t.data()), std::streamsize(t.numel() * sizeof(float)));
    if (!f) throw std::runtime_error("truncated npy payload: " + path);
    return t;
}

} // namespace mtuq::io
