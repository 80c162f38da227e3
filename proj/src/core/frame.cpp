#include "emnet/frame.hpp"

#include <cstring>

#include "emnet/io.hpp"

namespace emn {

namespace {

void put_le(std::string& out, std::uint64_t v, int bytes) {
  for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(const std::string& in, std::size_t at, int bytes) {
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

}  // namespace

std::size_t overlay_row_bytes(std::uint32_t width) noexcept { return (width + 7) / 8; }

bool FrameMessage::occupied(std::uint32_t x, std::uint32_t y) const {
  if (!has_overlay() || x >= width || y >= height) return false;
  const std::uint8_t byte = overlay[y * overlay_row_bytes(width) + x / 8];
  return (byte >> (7 - x % 8)) & 1;
}

std::vector<std::uint8_t> pack_overlay(const BinaryMask& occ) {
  const std::size_t row = overlay_row_bytes(static_cast<std::uint32_t>(occ.width()));
  std::vector<std::uint8_t> out(row * occ.height(), 0);
  for (int y = 0; y < occ.height(); ++y) {
    for (int x = 0; x < occ.width(); ++x) {
      if (occ(x, y)) out[y * row + x / 8] |= static_cast<std::uint8_t>(0x80 >> (x % 8));
    }
  }
  return out;
}

std::string encode_frame(const FrameMessage& m) {
  std::string out;
  out.reserve(FrameMessage::header_size + m.pixels.size() + m.overlay.size());
  out.append("EMN1", 4);
  put_le(out, m.step, 8);
  put_le(out, m.width, 4);
  put_le(out, m.height, 4);
  out.push_back(static_cast<char>(m.flags));
  out.append(reinterpret_cast<const char*>(m.pixels.data()), m.pixels.size());
  if (m.has_overlay()) out.append(reinterpret_cast<const char*>(m.overlay.data()), m.overlay.size());
  return out;
}

std::string encode_frame(std::uint64_t step, const TrailField& trail, double cap,
                         const BinaryMask* occupancy) {
  FrameMessage m;
  m.step = step;
  m.width = static_cast<std::uint32_t>(trail.width());
  m.height = static_cast<std::uint32_t>(trail.height());
  m.pixels = quantize_trail(trail, cap);
  if (occupancy) {
    m.flags |= FrameMessage::flag_overlay;
    m.overlay = pack_overlay(*occupancy);
  }
  return encode_frame(m);
}

FrameMessage decode_frame(const std::string& in) {
  if (in.size() < FrameMessage::header_size) throw FrameError("frame shorter than header");
  if (std::memcmp(in.data(), "EMN1", 4) != 0) throw FrameError("bad frame magic");
  FrameMessage m;
  m.step = get_le(in, 4, 8);
  m.width = static_cast<std::uint32_t>(get_le(in, 12, 4));
  m.height = static_cast<std::uint32_t>(get_le(in, 16, 4));
  m.flags = static_cast<std::uint8_t>(in[20]);
  if (m.flags & ~FrameMessage::flag_overlay) throw FrameError("unknown frame flags");
  const std::uint64_t cells = static_cast<std::uint64_t>(m.width) * m.height;
  const std::uint64_t bitmap = m.has_overlay() ? overlay_row_bytes(m.width) * std::uint64_t{m.height} : 0;
  if (in.size() != FrameMessage::header_size + cells + bitmap) throw FrameError("frame length mismatch");
  const auto* p = reinterpret_cast<const std::uint8_t*>(in.data()) + FrameMessage::header_size;
  m.pixels.assign(p, p + cells);
  m.overlay.assign(p + cells, p + cells + bitmap);
  return m;
}

}  // namespace emn
