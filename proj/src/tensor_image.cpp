#include "crackres/tensor_image.hpp"

#include "crackres/errors.hpp"

namespace crackres {

torch::Tensor to_tensor(const Image& image) {
    auto t = torch::from_blob(const_cast<float*>(image.pixels.data()), {image.height, image.width, image.channels},
                              torch::kFloat32);
    return t.permute({2, 0, 1}).unsqueeze(0).contiguous().clone();
}

torch::Tensor to_batch(std::span<const Image> images) {
    if (images.empty()) throw ArgumentError("datapipe", "cannot batch zero images");
    std::vector<torch::Tensor> ts;
    ts.reserve(images.size());
    for (const auto& img : images) {
        if (!img.same_shape(images.front())) throw DimensionError("datapipe", "batched images differ in shape");
        ts.push_back(to_tensor(img));
    }
    return torch::cat(ts, 0);
}

Image to_image(const torch::Tensor& tensor) {
    auto t = tensor.detach();
    if (t.dim() == 4) {
        if (t.size(0) != 1) throw DimensionError("datapipe", "to_image expects a single image");
        t = t.squeeze(0);
    }
    if (t.dim() != 3) throw DimensionError("datapipe", "to_image expects [C,H,W]");
    t = t.to(torch::kFloat32).permute({1, 2, 0}).contiguous();
    Image img(static_cast<int>(t.size(0)), static_cast<int>(t.size(1)), static_cast<int>(t.size(2)));
    std::copy(t.data_ptr<float>(), t.data_ptr<float>() + img.size(), img.pixels.begin());
    return img;
}

}  // namespace crackres
