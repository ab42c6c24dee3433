#pragma once

#include "recflash/flash_model.hpp"

namespace testcfg {

// Small device so tests can enumerate every slot.
inline recflash::FlashConfig tiny(std::uint32_t planes_per_die = 2, std::uint32_t dies = 1, std::uint32_t channels = 1,
                                  std::uint32_t blocks = 16, std::uint32_t pages = 4, std::uint32_t page_size = 1024) {
  recflash::FlashConfig c;
  c.page_size = page_size;
  c.planes_per_die = planes_per_die;
  c.dies_per_chip = dies;
  c.chips_per_channel = 1;
  c.channels = channels;
  c.blocks_per_plane = blocks;
  c.pages_per_block = pages;
  c.reserved_block_fraction = 0.25;
  return c;
}

}  // namespace testcfg
