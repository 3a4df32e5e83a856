#include "crackres/image.hpp"

#include <algorithm>

namespace crackres {

std::size_t BinaryMap::count_ones() const {
    return static_cast<std::size_t>(std::count_if(values.begin(), values.end(), [](std::uint8_t v) { return v != 0; }));
}

}  // namespace crackres
