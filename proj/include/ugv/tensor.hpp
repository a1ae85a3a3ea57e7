#ifndef UGV_TENSOR_HPP
#define UGV_TENSOR_HPP

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ugv {

// Dense row-major float32 array. The universal carrier for images, feature
// maps, heatmaps, PAFs and weights. Multi-channel maps are channel-major
// (C, H, W).
struct Tensor {
    std::vector<uint32_t> dims;
    std::vector<float> data;

    Tensor() = default;
    explicit Tensor(std::vector<uint32_t> d, float fill = 0.0f);

    size_t numel() const { return data.size(); }
    int ndim() const { return static_cast<int>(dims.size()); }

    // (C, H, W) accessors; valid for 3-dimensional tensors.
    int channels() const { return static_cast<int>(dims[0]); }
    int height() const { return static_cast<int>(dims[ndim() == 3 ? 1 : 0]); }
    int width() const { return static_cast<int>(dims[ndim() == 3 ? 2 : 1]); }

    float& at(int c, int y, int x) {
        return data[(static_cast<size_t>(c) * dims[1] + y) * dims[2] + x];
    }
    float at(int c, int y, int x) const {
        return data[(static_cast<size_t>(c) * dims[1] + y) * dims[2] + x];
    }
    float* channel(int c) { return data.data() + static_cast<size_t>(c) * dims[1] * dims[2]; }
    const float* channel(int c) const { return data.data() + static_cast<size_t>(c) * dims[1] * dims[2]; }

    bool same_shape(const Tensor& other) const { return dims == other.dims; }

    // Throws ShapeError if the invariants (non-empty dims, every dim >= 1,
    // product == data size) do not hold.
    void validate() const;
};

// Binary tensor file format, little-endian, no padding:
//   magic "UGVT\x00\x01" (6 bytes) + 2 reserved zero bytes
//   u8 ndim
//   ndim x u32 dims (outermost first)
//   product(dims) x f32 payload, row-major
size_t tensor_write(const Tensor& t, std::ostream& out);
size_t tensor_write_file(const Tensor& t, const std::string& path);
Tensor tensor_read(std::istream& in);
Tensor tensor_read_file(const std::string& path);

// Serialized size in bytes of a tensor with the given dims.
size_t tensor_file_size(const std::vector<uint32_t>& dims);

} // namespace ugv

#endif // UGV_TENSOR_HPP
