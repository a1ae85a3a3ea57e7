#include "ugv/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include <zlib.h>

#include "ugv/errors.hpp"

namespace ugv {

namespace {

const unsigned char kPngSig[8] = {137, 80, 78, 71, 13, 10, 26, 10};

uint32_t be32(const unsigned char* p) {
    return (static_cast<uint32_t>(p[0]) << 24) | (static_cast<uint32_t>(p[1]) << 16) |
           (static_cast<uint32_t>(p[2]) << 8) | static_cast<uint32_t>(p[3]);
}

void put_be32(std::vector<unsigned char>& out, uint32_t v) {
    out.push_back(static_cast<unsigned char>(v >> 24));
    out.push_back(static_cast<unsigned char>(v >> 16));
    out.push_back(static_cast<unsigned char>(v >> 8));
    out.push_back(static_cast<unsigned char>(v));
}

std::vector<unsigned char> zlib_inflate(const unsigned char* data, size_t size, size_t expected) {
    std::vector<unsigned char> out(expected);
    z_stream zs{};
    if (inflateInit(&zs) != Z_OK) throw FormatError("png: inflate init failed");
    zs.next_in = const_cast<unsigned char*>(data);
    zs.avail_in = static_cast<uInt>(size);
    zs.next_out = out.data();
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END || zs.avail_out != 0)
        throw FormatError("png: compressed image data is corrupt or truncated");
    return out;
}

std::vector<unsigned char> zlib_deflate(const unsigned char* data, size_t size) {
    uLongf bound = compressBound(static_cast<uLong>(size));
    std::vector<unsigned char> out(bound);
    if (compress2(out.data(), &bound, data, static_cast<uLong>(size), Z_DEFAULT_COMPRESSION) != Z_OK)
        throw IoError("png: deflate failed");
    out.resize(bound);
    return out;
}

int paeth(int a, int b, int c) {
    const int p = a + b - c;
    const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
    if (pa <= pb && pa <= pc) return a;
    if (pb <= pc) return b;
    return c;
}

struct PngHeader {
    uint32_t width = 0, height = 0;
    int bit_depth = 0;
    int color_type = 0;
};

int samples_per_pixel(int color_type) {
    switch (color_type) {
        case 0: return 1; // gray
        case 2: return 3; // rgb
        case 3: return 1; // palette index
        case 4: return 2; // gray + alpha
        case 6: return 4; // rgba
        default: throw FormatError("png: unknown color type");
    }
}

ImageBuffer decode_png(const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 8 + 25) throw FormatError("png: file too short");
    PngHeader hdr;
    std::vector<unsigned char> idat;
    std::vector<unsigned char> palette; // rgb triples
    bool saw_ihdr = false, saw_iend = false;

    size_t pos = 8;
    while (pos + 8 <= bytes.size()) {
        const uint32_t len = be32(&bytes[pos]);
        if (pos + 12 + len > bytes.size()) throw FormatError("png: chunk overruns file");
        const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
        const unsigned char* data = &bytes[pos + 8];
        if (std::memcmp(type, "IHDR", 4) == 0) {
            if (len != 13) throw FormatError("png: bad IHDR length");
            hdr.width = be32(data);
            hdr.height = be32(data + 4);
            hdr.bit_depth = data[8];
            hdr.color_type = data[9];
            if (data[10] != 0 || data[11] != 0) throw FormatError("png: unsupported compression/filter method");
            if (data[12] != 0) throw FormatError("png: interlaced images are not supported");
            if (hdr.width == 0 || hdr.height == 0) throw FormatError("png: zero dimension");
            saw_ihdr = true;
        } else if (std::memcmp(type, "PLTE", 4) == 0) {
            palette.assign(data, data + len);
        } else if (std::memcmp(type, "IDAT", 4) == 0) {
            idat.insert(idat.end(), data, data + len);
        } else if (std::memcmp(type, "IEND", 4) == 0) {
            saw_iend = true;
            break;
        }
        // Ancillary chunks are skipped.
        pos += 12 + len;
    }
    if (!saw_ihdr || !saw_iend || idat.empty()) throw FormatError("png: missing required chunks");

    const int spp = samples_per_pixel(hdr.color_type);
    const int bd = hdr.bit_depth;
    if (hdr.color_type == 3) {
        if (bd != 1 && bd != 2 && bd != 4 && bd != 8) throw FormatError("png: bad palette bit depth");
        if (palette.empty()) throw FormatError("png: palette image without PLTE");
    } else if (hdr.color_type == 0) {
        if (bd != 1 && bd != 2 && bd != 4 && bd != 8 && bd != 16) throw FormatError("png: bad gray bit depth");
    } else {
        if (bd != 8 && bd != 16) throw FormatError("png: bad bit depth");
    }

    const size_t bits_per_pixel = static_cast<size_t>(spp) * bd;
    const size_t row_bytes = (static_cast<size_t>(hdr.width) * bits_per_pixel + 7) / 8;
    const size_t bpp = std::max<size_t>(1, bits_per_pixel / 8); // filter step
    const size_t raw_size = (row_bytes + 1) * hdr.height;

    std::vector<unsigned char> raw = zlib_inflate(idat.data(), idat.size(), raw_size);

    // Unfilter in place into a scanline buffer without the filter bytes.
    std::vector<unsigned char> img(row_bytes * hdr.height);
    for (uint32_t y = 0; y < hdr.height; ++y) {
        const unsigned char filter = raw[y * (row_bytes + 1)];
        const unsigned char* src = &raw[y * (row_bytes + 1) + 1];
        unsigned char* dst = &img[y * row_bytes];
        const unsigned char* prev = y > 0 ? &img[(y - 1) * row_bytes] : nullptr;
        switch (filter) {
            case 0:
                std::memcpy(dst, src, row_bytes);
                break;
            case 1:
                for (size_t x = 0; x < row_bytes; ++x)
                    dst[x] = static_cast<unsigned char>(src[x] + (x >= bpp ? dst[x - bpp] : 0));
                break;
            case 2:
                for (size_t x = 0; x < row_bytes; ++x)
                    dst[x] = static_cast<unsigned char>(src[x] + (prev ? prev[x] : 0));
                break;
            case 3:
                for (size_t x = 0; x < row_bytes; ++x) {
                    const int a = x >= bpp ? dst[x - bpp] : 0;
                    const int b = prev ? prev[x] : 0;
                    dst[x] = static_cast<unsigned char>(src[x] + (a + b) / 2);
                }
                break;
            case 4:
                for (size_t x = 0; x < row_bytes; ++x) {
                    const int a = x >= bpp ? dst[x - bpp] : 0;
                    const int b = prev ? prev[x] : 0;
                    const int c = (prev && x >= bpp) ? prev[x - bpp] : 0;
                    dst[x] = static_cast<unsigned char>(src[x] + paeth(a, b, c));
                }
                break;
            default:
                throw FormatError("png: unknown filter type");
        }
    }

    ImageBuffer out(static_cast<int>(hdr.height), static_cast<int>(hdr.width));

    // Sub-byte depths are only valid for gray and palette images.
    auto sample_at = [&](const unsigned char* row, uint32_t x, int s) -> unsigned {
        if (bd == 16) {
            const size_t idx = (static_cast<size_t>(x) * spp + s) * 2;
            return (static_cast<unsigned>(row[idx]) << 8) | row[idx + 1];
        }
        if (bd == 8) return row[static_cast<size_t>(x) * spp + s];
        const size_t bit = static_cast<size_t>(x) * bits_per_pixel; // spp == 1 here
        const unsigned byte = row[bit / 8];
        const int shift = 8 - bd - static_cast<int>(bit % 8);
        return (byte >> shift) & ((1u << bd) - 1);
    };
    const float max16 = 65535.0f;
    const float maxv = bd == 16 ? max16 : static_cast<float>((1u << bd) - 1);

    for (uint32_t y = 0; y < hdr.height; ++y) {
        const unsigned char* row = &img[y * row_bytes];
        for (uint32_t x = 0; x < hdr.width; ++x) {
            float r, g, b;
            switch (hdr.color_type) {
                case 0: {
                    const float v = sample_at(row, x, 0) / maxv;
                    r = g = b = v;
                    break;
                }
                case 2: {
                    r = sample_at(row, x, 0) / maxv;
                    g = sample_at(row, x, 1) / maxv;
                    b = sample_at(row, x, 2) / maxv;
                    break;
                }
                case 3: {
                    const unsigned idx = sample_at(row, x, 0);
                    if (static_cast<size_t>(idx) * 3 + 2 >= palette.size())
                        throw FormatError("png: palette index out of range");
                    r = palette[idx * 3 + 0] / 255.0f;
                    g = palette[idx * 3 + 1] / 255.0f;
                    b = palette[idx * 3 + 2] / 255.0f;
                    break;
                }
                case 4: {
                    const float v = sample_at(row, x, 0) / maxv;
                    r = g = b = v;
                    break;
                }
                default: { // 6
                    r = sample_at(row, x, 0) / maxv;
                    g = sample_at(row, x, 1) / maxv;
                    b = sample_at(row, x, 2) / maxv;
                    break;
                }
            }
            out.at(static_cast<int>(y), static_cast<int>(x), 0) = r;
            out.at(static_cast<int>(y), static_cast<int>(x), 1) = g;
            out.at(static_cast<int>(y), static_cast<int>(x), 2) = b;
        }
    }
    return out;
}

void skip_ppm_space(const std::vector<unsigned char>& b, size_t& p) {
    while (p < b.size()) {
        if (std::isspace(b[p])) {
            ++p;
        } else if (b[p] == '#') {
            while (p < b.size() && b[p] != '\n') ++p;
        } else {
            return;
        }
    }
}

unsigned parse_ppm_int(const std::vector<unsigned char>& b, size_t& p) {
    skip_ppm_space(b, p);
    if (p >= b.size() || !std::isdigit(b[p])) throw FormatError("ppm: expected integer in header");
    unsigned v = 0;
    while (p < b.size() && std::isdigit(b[p])) {
        v = v * 10 + (b[p] - '0');
        ++p;
    }
    return v;
}

ImageBuffer decode_ppm(const std::vector<unsigned char>& bytes) {
    size_t p = 2; // past "P6"
    const unsigned w = parse_ppm_int(bytes, p);
    const unsigned h = parse_ppm_int(bytes, p);
    const unsigned maxval = parse_ppm_int(bytes, p);
    if (w == 0 || h == 0) throw FormatError("ppm: zero dimension");
    if (maxval == 0 || maxval > 65535) throw FormatError("ppm: bad maxval");
    if (p >= bytes.size() || !std::isspace(bytes[p])) throw FormatError("ppm: bad header");
    ++p; // single whitespace before binary data

    const int bytes_per_sample = maxval > 255 ? 2 : 1;
    const size_t need = static_cast<size_t>(w) * h * 3 * bytes_per_sample;
    if (bytes.size() - p < need) throw TruncationError("ppm: pixel data truncated");

    ImageBuffer out(static_cast<int>(h), static_cast<int>(w));
    const float scale = 1.0f / static_cast<float>(maxval);
    for (size_t i = 0; i < static_cast<size_t>(w) * h * 3; ++i) {
        unsigned v;
        if (bytes_per_sample == 2) {
            v = (static_cast<unsigned>(bytes[p]) << 8) | bytes[p + 1];
            p += 2;
        } else {
            v = bytes[p++];
        }
        out.values[i] = v * scale;
    }
    return out;
}

void append_chunk(std::vector<unsigned char>& out, const char type[4],
                  const unsigned char* data, size_t len) {
    put_be32(out, static_cast<uint32_t>(len));
    const size_t start = out.size();
    out.insert(out.end(), type, type + 4);
    if (len) out.insert(out.end(), data, data + len);
    const uint32_t crc = static_cast<uint32_t>(
        crc32(0, out.data() + start, static_cast<uInt>(4 + len)));
    put_be32(out, crc);
}

std::vector<unsigned char> encode_png_raw(const unsigned char* pixels, int h, int w,
                                          int channels_in, int color_type) {
    std::vector<unsigned char> out(kPngSig, kPngSig + 8);
    unsigned char ihdr[13];
    ihdr[0] = static_cast<unsigned char>(w >> 24);
    ihdr[1] = static_cast<unsigned char>(w >> 16);
    ihdr[2] = static_cast<unsigned char>(w >> 8);
    ihdr[3] = static_cast<unsigned char>(w);
    ihdr[4] = static_cast<unsigned char>(h >> 24);
    ihdr[5] = static_cast<unsigned char>(h >> 16);
    ihdr[6] = static_cast<unsigned char>(h >> 8);
    ihdr[7] = static_cast<unsigned char>(h);
    ihdr[8] = 8; // bit depth
    ihdr[9] = static_cast<unsigned char>(color_type);
    ihdr[10] = ihdr[11] = ihdr[12] = 0;
    append_chunk(out, "IHDR", ihdr, 13);

    const size_t row_bytes = static_cast<size_t>(w) * channels_in;
    std::vector<unsigned char> raw((row_bytes + 1) * h);
    for (int y = 0; y < h; ++y) {
        raw[y * (row_bytes + 1)] = 0; // filter: none
        std::memcpy(&raw[y * (row_bytes + 1) + 1], pixels + y * row_bytes, row_bytes);
    }
    const std::vector<unsigned char> compressed = zlib_deflate(raw.data(), raw.size());
    append_chunk(out, "IDAT", compressed.data(), compressed.size());
    append_chunk(out, "IEND", nullptr, 0);
    return out;
}

unsigned char to_u8(float v) {
    const float c = std::clamp(v, 0.0f, 1.0f);
    return static_cast<unsigned char>(std::lround(c * 255.0f));
}

} // namespace

ImageBuffer image_decode(const std::vector<unsigned char>& bytes) {
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSig, 8) == 0) return decode_png(bytes);
    if (bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6') return decode_ppm(bytes);
    throw FormatError("unsupported image format (expected PNG or binary PPM)");
}

ImageBuffer image_load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open image: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(f)),
                                     std::istreambuf_iterator<char>());
    return image_decode(bytes);
}

std::vector<unsigned char> image_encode_png(const ImageBuffer& img) {
    std::vector<unsigned char> rgb(static_cast<size_t>(img.height) * img.width * 3);
    for (size_t i = 0; i < rgb.size(); ++i) rgb[i] = to_u8(img.values[i]);
    return encode_png_raw(rgb.data(), img.height, img.width, 3, 2);
}

std::vector<unsigned char> image_encode_png_gray(const std::vector<unsigned char>& gray, int h, int w) {
    if (gray.size() != static_cast<size_t>(h) * w) throw ShapeError("gray buffer size mismatch");
    return encode_png_raw(gray.data(), h, w, 1, 0);
}

void image_save_png(const ImageBuffer& img, const std::string& path) {
    const std::vector<unsigned char> bytes = image_encode_png(img);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw IoError("png write failed: " + path);
}

void image_save_ppm(const ImageBuffer& img, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open for write: " + path);
    f << "P6\n" << img.width << " " << img.height << "\n255\n";
    std::vector<unsigned char> rgb(static_cast<size_t>(img.height) * img.width * 3);
    for (size_t i = 0; i < rgb.size(); ++i) rgb[i] = to_u8(img.values[i]);
    f.write(reinterpret_cast<const char*>(rgb.data()), static_cast<std::streamsize>(rgb.size()));
    if (!f) throw IoError("ppm write failed: " + path);
}

ImageBuffer resize_bilinear(const ImageBuffer& img, int out_h, int out_w) {
    if (out_h < 1 || out_w < 1) throw ShapeError("resize target must be >= 1 in both dims");
    if (out_h == img.height && out_w == img.width) return img;

    ImageBuffer out(out_h, out_w);
    const double sy = static_cast<double>(img.height) / out_h;
    const double sx = static_cast<double>(img.width) / out_w;
    for (int oy = 0; oy < out_h; ++oy) {
        double fy = (oy + 0.5) * sy - 0.5;
        fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
        const int y0 = static_cast<int>(fy);
        const int y1 = std::min(y0 + 1, img.height - 1);
        const float wy = static_cast<float>(fy - y0);
        for (int ox = 0; ox < out_w; ++ox) {
            double fx = (ox + 0.5) * sx - 0.5;
            fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
            const int x0 = static_cast<int>(fx);
            const int x1 = std::min(x0 + 1, img.width - 1);
            const float wx = static_cast<float>(fx - x0);
            for (int c = 0; c < 3; ++c) {
                const float top = img.at(y0, x0, c) * (1.0f - wx) + img.at(y0, x1, c) * wx;
                const float bot = img.at(y1, x0, c) * (1.0f - wx) + img.at(y1, x1, c) * wx;
                out.at(oy, ox, c) = top * (1.0f - wy) + bot * wy;
            }
        }
    }
    return out;
}

Tensor image_to_chw(const ImageBuffer& img) {
    Tensor t({3, static_cast<uint32_t>(img.height), static_cast<uint32_t>(img.width)});
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                t.at(c, y, x) = img.at(y, x, c);
    return t;
}

ImageBuffer chw_to_image(const Tensor& t) {
    if (t.ndim() != 3 || t.dims[0] != 3) throw ShapeError("expected (3,H,W) tensor");
    ImageBuffer img(t.height(), t.width());
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                img.at(y, x, c) = t.at(c, y, x);
    return img;
}

} // namespace ugv
