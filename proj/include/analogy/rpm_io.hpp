#pragma once

// `rpm-jsonl v1`: one JSON record per line,
//   {"v":1,"id":int,"config":"center|grid2|grid3","context":[Panel×8],
//    "choices":[Panel×8],"answer":int,
//    "rules":[{"attr":str,"kind":str,"param":int}],"seed":[int,int]}
// Panel: {"entities":[[pos,type,size,color],...]} plus, when rendered,
// "raster": base64 of H·W bytes (value = round(255·v)) and "hw":[H,W].

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "analogy/rpm.hpp"

namespace analogy::rpm {

inline constexpr int kFormatVersion = 1;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class VersionError : public ParseError {
 public:
  using ParseError::ParseError;
};

std::string to_jsonl_line(const RpmProblem& p);
RpmProblem from_jsonl_line(const std::string& line, std::size_t line_number = 1);

void serialize(const std::vector<RpmProblem>& problems, std::ostream& out);
std::vector<RpmProblem> deserialize(std::istream& in);

void save_corpus(const std::vector<RpmProblem>& problems, const std::filesystem::path& path);
std::vector<RpmProblem> load_corpus(const std::filesystem::path& path);

// FNV-1a over the serialized form, rendered as 16 hex digits.
std::string corpus_hash(const std::vector<RpmProblem>& problems);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> base64_decode(const std::string& text);

}  // namespace analogy::rpm
