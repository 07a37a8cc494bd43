#pragma once

#include <stdexcept>
#include <string>

namespace ipf {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration or arguments (CLI exit code 2).
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failures: poles, missing roots, degenerate diffusion (CLI exit code 3).
class NumericalError : public Error {
public:
    using Error::Error;
};

class DegenerateDiffusionError : public NumericalError {
public:
    explicit DegenerateDiffusionError(const std::string& where)
        : NumericalError("degenerate diffusion at " + where +
                         ": at b(y) = 0 both the entropy functional and the related IPF are degenerated") {}
    struct Verbatim {};
    DegenerateDiffusionError(const std::string& message, Verbatim) : NumericalError(message) {}
};

class PoleError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class NoRootError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class IdentificationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class SimulationError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class DomainError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

class RangeError : public Error {
public:
    using Error::Error;
};

class InsufficientSampleError : public Error {
public:
    using Error::Error;
};

class UnsupportedDimensionError : public Error {
public:
    using Error::Error;
};

/// Runs fn; any library error is rethrown with the same type and `context: ` prepended.
template <class F>
decltype(auto) with_context(const std::string& context, F&& fn) {
    const auto msg = [&](const std::exception& e) { return context + ": " + e.what(); };
    try {
        return fn();
    } catch (const DegenerateDiffusionError& e) {
        throw DegenerateDiffusionError(msg(e), DegenerateDiffusionError::Verbatim{});
    } catch (const PoleError& e) {
        throw PoleError(msg(e));
    } catch (const NoRootError& e) {
        throw NoRootError(msg(e));
    } catch (const IdentificationError& e) {
        throw IdentificationError(msg(e));
    } catch (const SimulationError& e) {
        throw SimulationError(msg(e));
    } catch (const DomainError& e) {
        throw DomainError(msg(e));
    } catch (const NumericalError& e) {
        throw NumericalError(msg(e));
    } catch (const ConfigError& e) {
        throw ConfigError(msg(e));
    } catch (const RangeError& e) {
        throw RangeError(msg(e));
    } catch (const InsufficientSampleError& e) {
        throw InsufficientSampleError(msg(e));
    } catch (const UnsupportedDimensionError& e) {
        throw UnsupportedDimensionError(msg(e));
    } catch (const Error& e) {
        throw Error(msg(e));
    }
}

}  // namespace ipf
