#pragma once

#include <string>

#include "sessrec/data.hpp"

namespace sessrec {

// Normalized binary corpus file. Layout (little-endian, varint = unsigned
// LEB128), documented in docs/formats.md:
//
//   16-byte header: 12 bytes ASCII magic "SESSRECCORP\0" + u32 version (1)
//   vocabulary:     varint item_count, then item_count raw ids
//                   (varint length + bytes), index implied by order
//   sessions:       varint session_count, then per session:
//                     varint id length + bytes
//                     varint event_count (>= 1)
//                     per event: varint timestamp delta (first event:
//                     absolute, must be >= 0), varint item index
//
// Writing is deterministic: the same corpus always produces the same bytes.

void write_corpus(const std::string& path, const Corpus& corpus);

Corpus read_corpus(const std::string& path);

}  // namespace sessrec
