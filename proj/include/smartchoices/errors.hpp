#pragma once

#include <stdexcept>
#include <string>

namespace smartchoices {

/// Invalid output or observation definition passed to a SmartChoice.
class DefinitionError : public std::invalid_argument {
public:
    explicit DefinitionError(const std::string& what) : std::invalid_argument(what) {}
};

/// Observe() called with a name the choice does not declare.
class ObservationError : public std::invalid_argument {
public:
    explicit ObservationError(const std::string& what) : std::invalid_argument(what) {}
};

/// Tensor or network shapes do not compose.
class ShapeError : public std::invalid_argument {
public:
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

/// Bad configuration key, value, problem or variant name.
class ConfigError : public std::invalid_argument {
public:
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace smartchoices
