#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace litept {

using index_t = std::int64_t;

// Error hierarchy. Everything thrown by the library derives from Error so the
// CLI can map library failures to a single exit code.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DimError : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct ParseError : Error {
  using Error::Error;
};
struct IoError : Error {
  using Error::Error;
};
struct RangeError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <class T, class... Rest>
void cat_into(std::ostringstream& os, T&& v, Rest&&... rest) {
  os << std::forward<T>(v);
  cat_into(os, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <class... Args>
std::string cat(Args&&... args) {
  std::ostringstream os;
  detail::cat_into(os, std::forward<Args>(args)...);
  return os.str();
}

template <class E = Error, class... Args>
void require(bool cond, Args&&... args) {
  if (!cond) throw E(cat(std::forward<Args>(args)...));
}

// Worker count for the kernels that support internal parallelism. 1 keeps
// every forward bit-reproducible by construction; parallel paths preserve
// per-row accumulation order so results stay identical for any value.
inline int& thread_count() {
  static int n = 1;
  return n;
}

}  // namespace litept
