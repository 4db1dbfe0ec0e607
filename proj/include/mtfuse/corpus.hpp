#pragma once

#include <string>
#include <vector>

#include "mtfuse/errors.hpp"

namespace mtfuse {

// Sentence-aligned corpus across a set of language codes. One structure
// serves synthetic data, benchmark exports and experiment inputs.
struct MultiParallelCorpus {
  std::string name;
  std::vector<std::string> languages;
  // rows[i][j] is the sentence of languages[j] in row i
  std::vector<std::vector<std::string>> rows;

  size_t num_rows() const { return rows.size(); }
  int language_index(const std::string& code) const;
  const std::string& cell(size_t row, const std::string& code) const;
  // Sentence column for one language, in row order.
  std::vector<std::string> column(const std::string& code) const;

  // Enforces: at least one row, unique non-empty language codes, every row
  // aligned, no empty sentences. ErrorKind::data on violation.
  void validate() const;
};

// On-disk form: UTF-8 TSV, first line a header of language codes, one
// sentence per column. Tab, newline and backslash inside sentences are
// stored as the escapes \t, \n and \\.
MultiParallelCorpus load_corpus(const std::string& path);
void save_corpus(const MultiParallelCorpus& corpus, const std::string& path);

}  // namespace mtfuse
