#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ctrlkit/errors.hpp"

// Batch front end shared by the C API and the command-line tool.
namespace ctrl::batch {

struct Output {
  std::string report;
  std::string csv;
};

class Job {
 public:
  // command: analyze | stabilize | lq | shoot | pde. spec may be empty for `stabilize --routh`.
  Job(std::string command, std::string spec, std::string source);

  // Throws InputError for unknown keys or malformed values.
  void set_option(const std::string& key, const std::string& value);
  Output run() const;

 private:
  std::string command_, spec_, source_;
  std::map<std::string, std::string> options_;
};

// null when unknown; the text lives for the whole program
const std::string* builtin_spec(const std::string& name);
std::vector<std::string> builtin_names();

// 2 for malformed input, 3 for numerical failures.
int exit_code(ErrorKind kind);

std::string sha256_hex(const std::string& bytes);

}  // namespace ctrl::batch
