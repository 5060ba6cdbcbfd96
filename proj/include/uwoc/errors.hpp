#ifndef UWOC_ERRORS_HPP
#define UWOC_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace uwoc {

/// File-system or stream failure.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed file contents, such as a bad magic number or an out-of-range label.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Operation invoked on an object that is not ready for it.
class StateError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace uwoc

#endif
