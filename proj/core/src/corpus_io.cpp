#include "sessrec/corpus_io.hpp"

#include <array>
#include <cstring>
#include <fstream>

#include "binio.hpp"
#include "sessrec/error.hpp"

namespace sessrec {

namespace {
constexpr std::array<char, 12> kMagic = {'S', 'E', 'S', 'S', 'R', 'E',
                                         'C', 'C', 'O', 'R', 'P', '\0'};
constexpr std::uint32_t kVersion = 1;
}  // namespace

void write_corpus(const std::string& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("write_corpus: cannot open " + path);

  binio::write_bytes(out, kMagic.data(), kMagic.size());
  binio::write_u32(out, kVersion);

  binio::write_varint(out, corpus.vocab.size());
  for (std::uint32_t i = 0; i < corpus.vocab.size(); ++i) {
    binio::write_string(out, corpus.vocab.raw(i));
  }

  binio::write_varint(out, corpus.sessions.size());
  for (const auto& session : corpus.sessions) {
    binio::write_string(out, session.id);
    binio::write_varint(out, session.events.size());
    std::int64_t prev = 0;
    for (const auto& event : session.events) {
      const std::int64_t delta = event.timestamp - prev;
      if (delta < 0) {
        throw DataError("write_corpus: negative timestamp delta in session " + session.id);
      }
      binio::write_varint(out, static_cast<std::uint64_t>(delta));
      binio::write_varint(out, event.item);
      prev = event.timestamp;
    }
  }
  if (!out) throw DataError("write_corpus: write failed for " + path);
}

Corpus read_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("read_corpus: cannot open " + path);

  std::array<char, 12> magic{};
  binio::read_bytes(in, magic.data(), magic.size(), "corpus magic");
  if (std::memcmp(magic.data(), kMagic.data(), magic.size()) != 0) {
    throw DataError("read_corpus: " + path + " is not a corpus file (bad magic)");
  }
  const std::uint32_t version = binio::read_u32(in, "corpus version");
  if (version != kVersion) {
    throw DataError("read_corpus: unsupported corpus version " + std::to_string(version));
  }

  Corpus corpus;
  const std::uint64_t item_count = binio::read_varint(in, "vocabulary size");
  for (std::uint64_t i = 0; i < item_count; ++i) {
    const std::string raw = binio::read_string(in, "vocabulary entry");
    const std::uint32_t idx = corpus.vocab.add(raw);
    if (idx != i) throw DataError("read_corpus: duplicate vocabulary entry '" + raw + "'");
  }

  const std::uint64_t session_count = binio::read_varint(in, "session count");
  corpus.sessions.reserve(session_count);
  for (std::uint64_t s = 0; s < session_count; ++s) {
    Session session;
    session.id = binio::read_string(in, "session id");
    const std::uint64_t event_count = binio::read_varint(in, "event count");
    if (event_count == 0) throw DataError("read_corpus: empty session " + session.id);
    session.events.reserve(event_count);
    std::int64_t ts = 0;
    for (std::uint64_t e = 0; e < event_count; ++e) {
      ts += static_cast<std::int64_t>(binio::read_varint(in, "timestamp delta"));
      const std::uint64_t item = binio::read_varint(in, "item index");
      if (item >= item_count) {
        throw DataError("read_corpus: item index out of range in session " + session.id);
      }
      session.events.push_back(Event{ts, static_cast<std::uint32_t>(item)});
    }
    corpus.sessions.push_back(std::move(session));
  }
  return corpus;
}

}  // namespace sessrec
