#include "mtfuse/corpus.hpp"

#include <filesystem>
#include <set>
#include <sstream>

#include "mtfuse/io.hpp"

namespace mtfuse {

namespace {

std::string escape_cell(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      default: out += c;
    }
  }
  return out;
}

std::string unescape_cell(const std::string& s, size_t row_for_error) {
  std::string out;
  out.reserve(s.size());
  for (size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) {
      fail(ErrorKind::format, "dangling backslash escape at row " + std::to_string(row_for_error));
    }
    switch (s[++i]) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      default:
        fail(ErrorKind::format,
             std::string("unknown escape \\") + s[i] + " at row " + std::to_string(row_for_error));
    }
  }
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t tab = line.find('\t', start);
    if (tab == std::string::npos) {
      fields.push_back(line.substr(start));
      break;
    }
    fields.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
  return fields;
}

}  // namespace

int MultiParallelCorpus::language_index(const std::string& code) const {
  for (size_t i = 0; i < languages.size(); ++i) {
    if (languages[i] == code) return static_cast<int>(i);
  }
  return -1;
}

const std::string& MultiParallelCorpus::cell(size_t row, const std::string& code) const {
  int idx = language_index(code);
  if (idx < 0) fail(ErrorKind::data, "language absent from corpus: " + code);
  if (row >= rows.size()) fail(ErrorKind::data, "row index out of range");
  return rows[row][static_cast<size_t>(idx)];
}

std::vector<std::string> MultiParallelCorpus::column(const std::string& code) const {
  int idx = language_index(code);
  if (idx < 0) fail(ErrorKind::data, "language absent from corpus: " + code);
  std::vector<std::string> out;
  out.reserve(rows.size());
  for (const auto& row : rows) out.push_back(row[static_cast<size_t>(idx)]);
  return out;
}

void MultiParallelCorpus::validate() const {
  if (languages.empty()) fail(ErrorKind::data, "corpus has no languages");
  std::set<std::string> seen;
  for (const auto& code : languages) {
    if (code.empty()) fail(ErrorKind::data, "empty language code in corpus header");
    if (!seen.insert(code).second) fail(ErrorKind::data, "duplicate language code: " + code);
  }
  if (rows.empty()) fail(ErrorKind::data, "corpus has no rows");
  for (size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != languages.size()) {
      fail(ErrorKind::data, "row " + std::to_string(i + 1) + " has " +
                                std::to_string(rows[i].size()) + " cells, expected " +
                                std::to_string(languages.size()));
    }
    for (const auto& cell : rows[i]) {
      if (cell.empty()) fail(ErrorKind::data, "empty sentence at row " + std::to_string(i + 1));
    }
  }
}

MultiParallelCorpus load_corpus(const std::string& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) fail(ErrorKind::format, "empty corpus file: " + path);

  MultiParallelCorpus corpus;
  corpus.name = std::filesystem::path(path).stem().string();
  corpus.languages = split_tabs(lines[0]);
  for (const auto& code : corpus.languages) {
    if (code.empty() || code.find(' ') != std::string::npos) {
      fail(ErrorKind::format, "bad corpus header: '" + lines[0] + "'");
    }
  }
  std::set<std::string> seen(corpus.languages.begin(), corpus.languages.end());
  if (seen.size() != corpus.languages.size()) {
    fail(ErrorKind::format, "bad corpus header: duplicate language code");
  }

  for (size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty() && li + 1 == lines.size()) break;  // trailing newline
    size_t row_number = li;  // 1-based over data rows
    std::vector<std::string> fields = split_tabs(lines[li]);
    if (fields.size() != corpus.languages.size()) {
      fail(ErrorKind::format, "row " + std::to_string(row_number) + ": expected " +
                                  std::to_string(corpus.languages.size()) + " cells, found " +
                                  std::to_string(fields.size()));
    }
    std::vector<std::string> row;
    row.reserve(fields.size());
    for (auto& f : fields) {
      std::string cell = unescape_cell(f, row_number);
      if (cell.empty()) {
        fail(ErrorKind::format, "missing cell at row " + std::to_string(row_number));
      }
      row.push_back(std::move(cell));
    }
    corpus.rows.push_back(std::move(row));
  }
  corpus.validate();
  return corpus;
}

void save_corpus(const MultiParallelCorpus& corpus, const std::string& path) {
  corpus.validate();
  std::ostringstream out;
  for (size_t i = 0; i < corpus.languages.size(); ++i) {
    if (i) out << '\t';
    out << corpus.languages[i];
  }
  out << '\n';
  for (const auto& row : corpus.rows) {
    for (size_t i = 0; i < row.size(); ++i) {
      if (i) out << '\t';
      out << escape_cell(row[i]);
    }
    out << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace mtfuse
