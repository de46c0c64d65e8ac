#ifndef COOPDIFF_ERROR_HPP
#define COOPDIFF_ERROR_HPP

#include <stdexcept>
#include <string>

namespace coopdiff {

// Error category, mapped to distinct process exit codes by the CLI.
enum class error_kind {
    config,   // bad arguments, invalid configuration, contract misuse
    io,       // file read/write, corrupt or truncated data
    runtime,  // numeric aborts (NaN latent, diverged training)
};

class error : public std::runtime_error {
public:
    error(error_kind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind) {}

    error_kind kind() const { return kind_; }

private:
    error_kind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw error(error_kind::config, msg); }
[[noreturn]] inline void throw_io(const std::string& msg) { throw error(error_kind::io, msg); }
[[noreturn]] inline void throw_runtime(const std::string& msg) { throw error(error_kind::runtime, msg); }

#define COOPDIFF_CHECK(cond, kind, msg)              \
    do {                                             \
        if (!(cond)) {                               \
            throw ::coopdiff::error(kind, msg);      \
        }                                            \
    } while (0)

}  // namespace coopdiff

#endif
