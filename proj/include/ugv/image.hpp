#ifndef UGV_IMAGE_HPP
#define UGV_IMAGE_HPP

#include <string>
#include <vector>

#include "ugv/tensor.hpp"

namespace ugv {

// RGB image, interleaved rows, values in [0,1].
struct ImageBuffer {
    int height = 0;
    int width = 0;
    static constexpr int channels = 3;
    std::vector<float> values; // height*width*3, row-major, RGB

    ImageBuffer() = default;
    ImageBuffer(int h, int w, float fill = 0.0f)
        : height(h), width(w), values(static_cast<size_t>(h) * w * 3, fill) {}

    float& at(int y, int x, int c) { return values[(static_cast<size_t>(y) * width + x) * 3 + c]; }
    float at(int y, int x, int c) const { return values[(static_cast<size_t>(y) * width + x) * 3 + c]; }
};

// Decodes PNG or binary PPM (P6), sniffing the format from the file contents.
// 8-bit samples are scaled by 1/255, 16-bit by 1/65535. Grayscale inputs are
// replicated to 3 channels; alpha is dropped.
ImageBuffer image_load(const std::string& path);
ImageBuffer image_decode(const std::vector<unsigned char>& bytes);

// 8-bit RGB PNG with no interlacing.
void image_save_png(const ImageBuffer& img, const std::string& path);
std::vector<unsigned char> image_encode_png(const ImageBuffer& img);
// 8-bit grayscale PNG from a single channel given per-pixel values in [0,1];
// used for fixtures and debugging.
std::vector<unsigned char> image_encode_png_gray(const std::vector<unsigned char>& gray, int h, int w);

void image_save_ppm(const ImageBuffer& img, const std::string& path);

// Bilinear resize with half-pixel-center alignment: the source coordinate of
// destination index d is (d + 0.5) * scale - 0.5, clamped to the valid range.
// Resizing to the input size returns a bitwise-equal copy.
ImageBuffer resize_bilinear(const ImageBuffer& img, int out_h, int out_w);

// (3, H, W) channel-major tensor from an interleaved image.
Tensor image_to_chw(const ImageBuffer& img);
ImageBuffer chw_to_image(const Tensor& t);

} // namespace ugv

#endif // UGV_IMAGE_HPP
