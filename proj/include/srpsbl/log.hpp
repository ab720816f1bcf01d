#ifndef SRPSBL_LOG_HPP
#define SRPSBL_LOG_HPP

#include <atomic>
#include <iostream>
#include <string_view>

namespace srpsbl {

inline std::atomic<bool>& warnings_enabled() {
  static std::atomic<bool> enabled{true};
  return enabled;
}

inline void warn(std::string_view message) {
  if (warnings_enabled().load(std::memory_order_relaxed)) {
    std::cerr << "warning: " << message << '\n';
  }
}

}  // namespace srpsbl

#endif  // SRPSBL_LOG_HPP
