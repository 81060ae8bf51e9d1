#pragma once

#include <stdexcept>
#include <string>

namespace octrl {

// Error categories map 1:1 onto CLI exit codes.
enum class errc { io = 1, validation = 2, divergence = 3 };

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  errc code() const { return code_; }

 private:
  errc code_;
};

[[noreturn]] inline void throw_io(const std::string& msg) { throw error(errc::io, msg); }
[[noreturn]] inline void throw_validation(const std::string& msg) { throw error(errc::validation, msg); }
[[noreturn]] inline void throw_divergence(const std::string& msg) { throw error(errc::divergence, msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw_validation(msg);
}

}  // namespace octrl
