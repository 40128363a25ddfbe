#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "guidedgen/core.hpp"

namespace guidedgen {

// One JSON object per line: {"concepts":[...],"refs":[...]}. Blank lines are
// skipped. Throws DataError("line N: ...") on malformed input.
std::vector<DatasetRecord> load_dataset(const std::string& path);
std::vector<DatasetRecord> parse_dataset(std::string_view text);

DatasetRecord parse_record(std::string_view line);
std::string record_to_json(const DatasetRecord& record);

void save_dataset(const std::string& path, const std::vector<DatasetRecord>& records);

// Rejects any record whose references contain a token missing from `vocab`.
void check_in_vocab(const Vocab& vocab, const std::vector<DatasetRecord>& records);

}  // namespace guidedgen
