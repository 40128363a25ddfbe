#include "guidedgen/dataset.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "guidedgen/error.hpp"

namespace guidedgen {

using json = nlohmann::ordered_json;

namespace {

std::vector<std::string> string_array(const json& j, const char* field) {
  if (!j.is_array()) throw DataError(std::string("field '") + field + "' must be an array");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (!v.is_string()) throw DataError(std::string("field '") + field + "' must hold strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

DatasetRecord parse_record(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw DataError("record must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (key != "concepts" && key != "refs") throw DataError("unknown field '" + key + "'");
  }
  if (!j.contains("concepts")) throw DataError("missing field 'concepts'");

  std::vector<std::string> concepts;
  for (const auto& c : string_array(j["concepts"], "concepts")) {
    auto toks = tokenize(c);
    if (toks.size() != 1) throw DataError("concept '" + c + "' is not a single token");
    concepts.push_back(std::move(toks.front()));
  }
  if (concepts.empty()) throw DataError("empty concept set");

  std::vector<std::vector<std::string>> refs;
  if (j.contains("refs")) {
    for (const auto& r : string_array(j["refs"], "refs")) {
      auto toks = tokenize(r);
      if (toks.empty()) throw DataError("empty reference");
      refs.push_back(std::move(toks));
    }
  }
  return DatasetRecord{ConceptSet(std::move(concepts)), std::move(refs)};
}

std::vector<DatasetRecord> parse_dataset(std::string_view text) {
  std::vector<DatasetRecord> records;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    try {
      records.push_back(parse_record(line));
    } catch (const DataError& e) {
      throw DataError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

std::vector<DatasetRecord> load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open dataset " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string record_to_json(const DatasetRecord& record) {
  json j;
  j["concepts"] = record.concepts.words();
  json refs = json::array();
  for (const auto& r : record.refs) refs.push_back(join_tokens(r));
  j["refs"] = std::move(refs);
  return j.dump();
}

void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write dataset " + path);
  for (const auto& r : records) out << record_to_json(r) << '\n';
  if (!out) throw DataError("failed writing dataset " + path);
}

void check_in_vocab(const Vocab& vocab, const std::vector<DatasetRecord>& records) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (const auto& ref : records[i].refs) {
      try {
        (void)vocab.encode(ref);
      } catch (const DataError& e) {
        throw DataError("record " + std::to_string(i + 1) + ": " + e.what());
      }
    }
  }
}

}  // namespace guidedgen
