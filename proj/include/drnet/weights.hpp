#pragma once

#include <string>

#include "drnet/nn.hpp"

namespace drnet {

inline constexpr std::uint32_t kDrnwVersion = 1;

// DRNW weight file: magic "DRNW", version u32 LE, tensor count u32 LE, then
// per tensor: name length u16 LE + UTF-8 name, ndim u8, dims u32 LE each,
// raw f32 LE payload. Values are stored single precision.
void save_drnw(const std::string& path, const NamedTensors& tensors);
NamedTensors load_drnw(const std::string& path);

// Lookup by exact name; throws std::invalid_argument when absent.
const Tensor& find_tensor(const NamedTensors& tensors, const std::string& name);

// Copies values from `src` into same-named, same-shaped tensors of `dst`.
// Every dst entry must be present in src.
void assign_from(NamedTensors& dst, const NamedTensors& src);

}  // namespace drnet
