#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace neuracoustic {

struct CorpusEntry {
  std::string word_id;
  std::string list_id;
  std::filesystem::path path;
};

struct CorpusManifest {
  std::vector<CorpusEntry> entries;
  std::string description;
  void validate() const;  // unique word_ids, files present
};

// UTF-8 JSON manifest:
//   {"description": "...", "entries": [{"word_id","list_id","path"}, ...]}
// Relative entry paths resolve against the manifest's directory.
CorpusManifest load_corpus_manifest(const std::filesystem::path& path);
void save_corpus_manifest(const CorpusManifest& m,
                          const std::filesystem::path& path);

}  // namespace neuracoustic
