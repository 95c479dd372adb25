#ifndef SSINV_ERROR_HPP
#define SSINV_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ssinv {

enum class errc {
    domain,
    overflow,
    bracket,
    root_not_found,
    quadrature,
    convergence,
    series_divergence,
    invalid_model,
    invalid_spec,
    config,
};

inline const char* to_string(errc c) noexcept {
    switch (c) {
        case errc::domain: return "domain";
        case errc::overflow: return "overflow";
        case errc::bracket: return "bracket";
        case errc::root_not_found: return "root_not_found";
        case errc::quadrature: return "quadrature";
        case errc::convergence: return "convergence";
        case errc::series_divergence: return "series_divergence";
        case errc::invalid_model: return "invalid_model";
        case errc::invalid_spec: return "invalid_spec";
        case errc::config: return "config";
    }
    return "unknown";
}

/// Single exception type for the library; `code()` tells the caller what failed.
class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    errc code() const noexcept { return code_; }

    /// Problems with the inputs rather than with the numerics.
    bool is_input_error() const noexcept {
        return code_ == errc::invalid_model || code_ == errc::invalid_spec || code_ == errc::config;
    }

private:
    errc code_;
};

}  // namespace ssinv

#endif  // SSINV_ERROR_HPP
