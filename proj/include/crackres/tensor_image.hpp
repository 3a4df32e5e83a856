#pragma once

#include <span>
#include <vector>

#include <torch/torch.h>

#include "crackres/image.hpp"

namespace crackres {

/// HWC image -> [1,C,H,W] float tensor (values copied unchanged).
torch::Tensor to_tensor(const Image& image);
/// Stacks equally shaped images into [N,C,H,W].
torch::Tensor to_batch(std::span<const Image> images);
/// [C,H,W] or [1,C,H,W] tensor -> HWC image.
Image to_image(const torch::Tensor& tensor);

}  // namespace crackres
