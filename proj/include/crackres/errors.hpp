#pragma once

#include <stdexcept>
#include <string>

namespace crackres {

/// Base class for every error raised by the library. `module()` names the
/// component that raised it so the CLI can report where a pipeline failed.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(what), module_(std::move(module)) {}
    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

#define CRACKRES_ERROR_TYPE(Name)                                         \
    class Name : public Error {                                           \
    public:                                                               \
        Name(std::string module, const std::string& what)                 \
            : Error(std::move(module), what) {}                           \
    };

CRACKRES_ERROR_TYPE(DimensionError)
CRACKRES_ERROR_TYPE(ArgumentError)
CRACKRES_ERROR_TYPE(StateError)
CRACKRES_ERROR_TYPE(ConfigError)
CRACKRES_ERROR_TYPE(IoError)
CRACKRES_ERROR_TYPE(LayoutError)
CRACKRES_ERROR_TYPE(PairingError)
CRACKRES_ERROR_TYPE(NumericError)
CRACKRES_ERROR_TYPE(FormatError)

#undef CRACKRES_ERROR_TYPE

}  // namespace crackres
