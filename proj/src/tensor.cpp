#include "mtuq/core/tensor.hpp"

#include <cmath>

namespace mtuq {

void validate_image(const Image& img) {
    if (img.h < 4 || img.w < 4)
        throw std::invalid_argument("image sides must be at least 4 pixels, got " +
                                    std::to_string(img.h) + "x" + std::to_string(img.w));
    if (img.h % 4 != 0 || img.w % 4 != 0)
        throw std::invalid_argument("image sides must be divisible by 4, got " +
                                    std::to_string(img.h) + "x" + std::to_string(img.w));
    if (img.chw.shape != std::vector<int>{3, img.h, img.w})
        throw std::invalid_argument("image buffer shape does not match declared size");
    for (float x : img.chw.v)
        if (!std::isfinite(x)) throw std::invalid_argument("image contains non-finite values");
}

} // namespace mtuq
