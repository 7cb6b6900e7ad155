#pragma once

#include <cstddef>
#include <cstdint>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace aedf {

// Dimension sizes, outermost first. Row-major storage everywhere.
using Shape = std::vector<int>;

inline std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    return n;
}

inline std::string shape_str(const Shape& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

class Error : public std::runtime_error {
   public:
    using std::runtime_error::runtime_error;
};

// One exception type per error class named in the operation contracts.
struct DimensionError : Error { using Error::Error; };
struct ContractError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };
struct UnsupportedError : Error { using Error::Error; };
struct NumericError : Error { using Error::Error; };
struct MetricUndefinedError : Error { using Error::Error; };
struct IntegrityError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

namespace detail {
inline void cat_into(std::ostringstream&) {}
template <typename T, typename... Rest>
void cat_into(std::ostringstream& os, T&& v, Rest&&... rest) {
    os << std::forward<T>(v);
    cat_into(os, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <typename... Args>
std::string cat(Args&&... args) {
    std::ostringstream os;
    detail::cat_into(os, std::forward<Args>(args)...);
    return os.str();
}

}  // namespace aedf
