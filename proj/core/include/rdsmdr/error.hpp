#pragma once

#include <stdexcept>
#include <string>

namespace rdsmdr {

// Error kinds map one-to-one onto CLI exit codes: config -> 2, data -> 3,
// numeric -> 4. Library code throws, the CLI translates.
enum class ErrorKind { config, data, numeric };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail_config(const std::string& msg) { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void fail_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void fail_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }

}  // namespace rdsmdr
