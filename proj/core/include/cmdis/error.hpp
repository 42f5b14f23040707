#ifndef CMDIS_ERROR_HPP
#define CMDIS_ERROR_HPP

#include <stdexcept>
#include <string>

namespace cmdis {

// Base error for all toolkit failures (bad arguments, malformed files, ...).
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw Error(msg);
}

}  // namespace cmdis

#endif
