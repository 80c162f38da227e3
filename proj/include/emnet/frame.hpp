#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "emnet/lattice.hpp"

namespace emn {

/// Binary frame sent over the steering socket.
///
///   offset 0   "EMN1"
///   offset 4   u64 step, little endian
///   offset 12  u32 width, little endian
///   offset 16  u32 height, little endian
///   offset 20  u8 flags (bit 0: agent overlay present)
///   offset 21  width*height quantised trail bytes, row-major
///   then, if flagged, the occupancy bitmap: one bit per cell, MSB first,
///   each row padded to a whole byte.
struct FrameMessage {
  static constexpr std::size_t header_size = 21;
  static constexpr std::uint8_t flag_overlay = 0x01;

  std::uint64_t step = 0;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint8_t flags = 0;
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> overlay;  // packed, empty without flag_overlay

  bool has_overlay() const noexcept { return (flags & flag_overlay) != 0; }
  /// Unpacked overlay bit for cell (x, y).
  bool occupied(std::uint32_t x, std::uint32_t y) const;
};

class FrameError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t overlay_row_bytes(std::uint32_t width) noexcept;
std::vector<std::uint8_t> pack_overlay(const BinaryMask& occupancy);

/// Pass `occupancy` = nullptr to leave the overlay out.
std::string encode_frame(std::uint64_t step, const TrailField& trail, double cap,
                         const BinaryMask* occupancy);
std::string encode_frame(const FrameMessage& m);
/// Throws FrameError on a bad magic, truncated body or trailing bytes.
FrameMessage decode_frame(const std::string& bytes);

}  // namespace emn
