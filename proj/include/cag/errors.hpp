#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cag {

// Base for everything this library throws on bad input or broken contracts.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed bracketed tree text. `offset` is the byte offset of the problem.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " at offset " + std::to_string(offset)), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// An action sequence that does not describe a tree. `index` names the action.
class StructureError : public Error {
 public:
  StructureError(const std::string& what, std::size_t index)
      : Error(what + " at action index " + std::to_string(index)), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

class AlignmentError : public Error {
 public:
  AlignmentError(const std::string& what, std::size_t sentence)
      : Error(what + " (sentence " + std::to_string(sentence) + ")"), sentence_(sentence) {}
  std::size_t sentence() const { return sentence_; }

 private:
  std::size_t sentence_;
};

// An action applied to a parser state where it is not legal.
class TransitionError : public Error {
 public:
  using Error::Error;
};

// Shape / precondition violations inside the numeric layer and model API.
class ContractError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Schema violations in suite files; `path` is a JSON-pointer-like location.
class SchemaError : public Error {
 public:
  SchemaError(const std::string& what, const std::string& path)
      : Error(path + ": " + what), path_(path) {}
  const std::string& path() const { return path_; }

 private:
  std::string path_;
};

// Beam search could not continue. `word_index` is 0-based.
class DecodeError : public Error {
 public:
  DecodeError(const std::string& what, std::size_t word_index)
      : Error(what + " at word " + std::to_string(word_index)), word_index_(word_index) {}
  std::size_t word_index() const { return word_index_; }

 private:
  std::size_t word_index_;
};

// Generic I/O or data-format failure (files, checkpoints, vocabularies).
class DataError : public Error {
 public:
  using Error::Error;
};

}  // namespace cag
