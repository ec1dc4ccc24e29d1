#include "neuracoustic/corpus.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "neuracoustic/errors.hpp"

namespace neuracoustic {

void CorpusManifest::validate() const {
  require_input(!entries.empty(), "corpus manifest has no entries");
  std::set<std::string> ids;
  for (const auto& e : entries) {
    require_input(!e.word_id.empty(), "corpus entry with empty word_id");
    require_input(ids.insert(e.word_id).second,
                  "duplicate word_id in corpus manifest: " + e.word_id);
    require_input(std::filesystem::exists(e.path),
                  "corpus file not found: " + e.path.string());
  }
}

CorpusManifest load_corpus_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require_input(in.good(), "cannot open corpus manifest: " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError("corpus manifest is not valid JSON: " + path.string() +
                     ": " + e.what());
  }
  CorpusManifest m;
  m.description = j.value("description", "");
  require_input(j.contains("entries") && j["entries"].is_array(),
                "corpus manifest missing \"entries\" array: " + path.string());
  const auto base = path.has_parent_path() ? path.parent_path()
                                           : std::filesystem::path(".");
  for (const auto& e : j["entries"]) {
    CorpusEntry entry;
    try {
      entry.word_id = e.at("word_id").get<std::string>();
      entry.list_id = e.value("list_id", "");
      std::filesystem::path p = e.at("path").get<std::string>();
      entry.path = p.is_absolute() ? p : base / p;
    } catch (const nlohmann::json::exception& ex) {
      throw InputError("malformed corpus entry in " + path.string() + ": " +
                       ex.what());
    }
    m.entries.push_back(std::move(entry));
  }
  m.validate();
  return m;
}

void save_corpus_manifest(const CorpusManifest& m,
                          const std::filesystem::path& path) {
  nlohmann::json j;
  j["description"] = m.description;
  j["entries"] = nlohmann::json::array();
  for (const auto& e : m.entries) {
    j["entries"].push_back({{"word_id", e.word_id},
                            {"list_id", e.list_id},
                            {"path", e.path.string()}});
  }
  std::ofstream out(path);
  require_input(out.good(), "cannot write corpus manifest: " + path.string());
  out << j.dump(2) << "\n";
}

}  // namespace neuracoustic
