#pragma once

#include "catgeo/network.hpp"

#include <iosfwd>
#include <string>

namespace catgeo {

// Binary checkpoint layout (all integers and floats little-endian):
//   "CGL1" | u32 version | u64 seed | input shape (u32 h, w, c, spatial)
//   u32 layer count | per layer: u32 kind, i32 units, i32 kernel_h, i32 kernel_w,
//   i32 stride, u32 padding, i32 pool, u32 activation, u32 noise kind, f64 noise rate,
//   u64 weight rows, u64 weight cols, u64 bias length
//   then per layer: weights (column-major f64) followed by bias (f64).
inline constexpr std::uint32_t kCheckpointVersion = 1;

void save_checkpoint(const Network& net, std::ostream& os);
void save_checkpoint(const Network& net, const std::string& path);
Network load_checkpoint(std::istream& is);
Network load_checkpoint(const std::string& path);

}  // namespace catgeo
