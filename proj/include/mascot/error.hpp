#pragma once

#include <stdexcept>
#include <string>

namespace mascot {

// Root of every error thrown by the library. `kind()` is a short stable tag
// used by the CLI and the HTTP layer to map errors onto exit codes/statuses.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

#define MASCOT_DEFINE_ERROR(Name, tag)                                        \
    class Name : public Error {                                               \
    public:                                                                   \
        explicit Name(const std::string& what) : Error(tag, what) {}          \
    }

MASCOT_DEFINE_ERROR(ConfigError, "config");
MASCOT_DEFINE_ERROR(PreconditionError, "precondition");
MASCOT_DEFINE_ERROR(BackendError, "backend");
MASCOT_DEFINE_ERROR(ProtocolError, "protocol");
MASCOT_DEFINE_ERROR(JudgeFormatError, "judge_format");
MASCOT_DEFINE_ERROR(LoadError, "load");
MASCOT_DEFINE_ERROR(ShapeError, "shape");
MASCOT_DEFINE_ERROR(IntegrityError, "integrity");
MASCOT_DEFINE_ERROR(DivergenceError, "divergence");
MASCOT_DEFINE_ERROR(NotFoundError, "not_found");
MASCOT_DEFINE_ERROR(ConflictError, "conflict");
MASCOT_DEFINE_ERROR(EpisodeError, "episode");

#undef MASCOT_DEFINE_ERROR

inline void require(bool condition, const std::string& message) {
    if (!condition) throw PreconditionError(message);
}

} // namespace mascot
