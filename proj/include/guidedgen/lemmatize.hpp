#pragma once

#include <string>
#include <string_view>

namespace guidedgen {

// Rule-based English lemmatizer for lowercase tokens: an irregular-form table,
// a list of words that already are lemmas, then suffix rules for plural -s/-es,
// -ies, -ing and -ed (undoing consonant doubling and restoring a silent e).
// Rules are applied until a fixed point, so the result is idempotent.
std::string lemmatize(std::string_view word);

}  // namespace guidedgen
