#include "ugv/tensor.hpp"

#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

#include "ugv/errors.hpp"

namespace ugv {

namespace {

constexpr char kMagic[6] = {'U', 'G', 'V', 'T', '\x00', '\x01'};

void write_u32_le(std::ostream& out, uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                          static_cast<unsigned char>((v >> 8) & 0xff),
                          static_cast<unsigned char>((v >> 16) & 0xff),
                          static_cast<unsigned char>((v >> 24) & 0xff)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32_le(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw TruncationError("tensor stream truncated inside header");
    return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
           (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

// Floats are stored as their IEEE-754 bit pattern, little-endian. This
// preserves NaN payloads bit-for-bit.
void write_f32_le(std::ostream& out, float f) {
    uint32_t v;
    std::memcpy(&v, &f, 4);
    write_u32_le(out, v);
}

bool host_is_little_endian() {
    const uint32_t probe = 1;
    unsigned char b;
    std::memcpy(&b, &probe, 1);
    return b == 1;
}

} // namespace

Tensor::Tensor(std::vector<uint32_t> d, float fill) : dims(std::move(d)) {
    size_t n = 1;
    for (uint32_t v : dims) n *= v;
    data.assign(n, fill);
    validate();
}

void Tensor::validate() const {
    if (dims.empty()) throw ShapeError("tensor has no dims");
    size_t n = 1;
    for (uint32_t v : dims) {
        if (v == 0) throw ShapeError("tensor dim must be >= 1");
        if (n > std::numeric_limits<size_t>::max() / v) throw OverflowError("tensor dim product overflows");
        n *= v;
    }
    if (n != data.size()) throw ShapeError("tensor dim product does not match data length");
}

size_t tensor_file_size(const std::vector<uint32_t>& dims) {
    size_t n = 1;
    for (uint32_t v : dims) n *= v;
    return 8 + 1 + 4 * dims.size() + 4 * n;
}

size_t tensor_write(const Tensor& t, std::ostream& out) {
    t.validate();
    if (t.dims.size() > 255) throw ShapeError("tensor ndim exceeds format limit of 255");
    out.write(kMagic, 6);
    const char reserved[2] = {0, 0};
    out.write(reserved, 2);
    const unsigned char ndim = static_cast<unsigned char>(t.dims.size());
    out.write(reinterpret_cast<const char*>(&ndim), 1);
    for (uint32_t d : t.dims) write_u32_le(out, d);
    if (host_is_little_endian()) {
        out.write(reinterpret_cast<const char*>(t.data.data()),
                  static_cast<std::streamsize>(t.data.size() * 4));
    } else {
        for (float f : t.data) write_f32_le(out, f);
    }
    if (!out) throw IoError("tensor write failed");
    return tensor_file_size(t.dims);
}

size_t tensor_write_file(const Tensor& t, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    return tensor_write(t, f);
}

Tensor tensor_read(std::istream& in) {
    char header[8];
    in.read(header, 8);
    if (!in || std::memcmp(header, kMagic, 6) != 0)
        throw FormatError("not a tensor stream: bad magic");
    if (header[6] != 0 || header[7] != 0)
        throw FormatError("tensor stream: nonzero reserved bytes");

    unsigned char ndim = 0;
    in.read(reinterpret_cast<char*>(&ndim), 1);
    if (!in) throw TruncationError("tensor stream truncated before ndim");
    if (ndim == 0) throw FormatError("tensor stream declares zero dims");

    Tensor t;
    t.dims.resize(ndim);
    size_t n = 1;
    for (int i = 0; i < ndim; ++i) {
        t.dims[i] = read_u32_le(in);
        if (t.dims[i] == 0) throw FormatError("tensor stream declares a zero dim");
        if (n > std::numeric_limits<size_t>::max() / t.dims[i])
            throw OverflowError("tensor dim product overflows");
        n *= t.dims[i];
    }
    // Cap payloads at 2^32 elements; anything bigger is a corrupt header.
    if (n > (size_t(1) << 32)) throw OverflowError("tensor payload implausibly large");

    t.data.resize(n);
    if (host_is_little_endian()) {
        in.read(reinterpret_cast<char*>(t.data.data()), static_cast<std::streamsize>(n * 4));
        if (static_cast<size_t>(in.gcount()) != n * 4)
            throw TruncationError("tensor payload truncated");
    } else {
        for (size_t i = 0; i < n; ++i) {
            uint32_t bits = read_u32_le(in);
            std::memcpy(&t.data[i], &bits, 4);
        }
    }
    return t;
}

Tensor tensor_read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for read: " + path);
    return tensor_read(f);
}

} // namespace ugv
