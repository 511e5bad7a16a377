#include "butterfly/rng.hpp"

namespace butterfly {

namespace {

std::uint64_t absorb(std::uint64_t state, std::uint64_t word) noexcept {
  return mix64(state ^ mix64(word + 0x632BE59BD9B4E019ULL));
}

}  // namespace

Substream::Substream(const StreamKey& key, Purpose purpose, std::uint64_t stage) noexcept {
  std::uint64_t h = mix64(key.seed + 0xD1B54A32D192ED03ULL);
  h = absorb(h, key.replicate);
  h = absorb(h, key.step);
  h = absorb(h, static_cast<std::uint64_t>(purpose));
  h = absorb(h, stage);
  prefix_ = h;
}

}  // namespace butterfly
