#pragma once

#include <stdexcept>
#include <string>

namespace icprobe {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent lexical resource.
class LoadError : public Error {
 public:
  using Error::Error;
};

// Caller violated an operation's precondition.
class UsageError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

class OovError : public Error {
 public:
  OovError(std::string word, std::string context)
      : Error("out-of-vocabulary word '" + word + "'" +
              (context.empty() ? std::string{} : " in " + context)),
        word_(std::move(word)),
        context_(std::move(context)) {}

  const std::string& word() const noexcept { return word_; }
  const std::string& context() const noexcept { return context_; }

 private:
  std::string word_;
  std::string context_;
};

// A measurement that has no defined value for this input (constant vector,
// no verbs in the cloze window, ...). Drivers drop and log these.
class UndefinedMeasure : public Error {
 public:
  using Error::Error;
};

class DegenerateTest : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace icprobe
