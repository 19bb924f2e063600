#pragma once

#include <stdexcept>
#include <string>

namespace sac {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DimensionError : public Error { public: using Error::Error; };
class ConfigError : public Error { public: using Error::Error; };
class InvalidMaskError : public Error { public: using Error::Error; };
class ChunkingError : public Error { public: using Error::Error; };
class StateError : public Error { public: using Error::Error; };
class MisuseError : public Error { public: using Error::Error; };
class DegenerateInputError : public Error { public: using Error::Error; };
class FormatError : public Error { public: using Error::Error; };
class UsageError : public Error { public: using Error::Error; };

}  // namespace sac
