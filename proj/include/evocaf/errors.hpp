#pragma once

#include <stdexcept>
#include <string>

namespace evocaf {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// gp
struct InvalidData : Error { using Error::Error; };
struct NumericalFailure : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };

// afdsl
struct ParseError : Error {
    ParseError(const std::string& msg, int line_, int col_)
        : Error(msg + " (line " + std::to_string(line_) + ", col " + std::to_string(col_) + ")"),
          line(line_), col(col_) {}
    int line = 0;
    int col = 0;
};
struct NameError : Error { using Error::Error; };
struct TypeError : Error { using Error::Error; };
struct NumericalFault : Error { using Error::Error; };
struct LimitExceeded : Error { using Error::Error; };

// acquisition
struct InvalidContext : Error { using Error::Error; };

// acqopt
struct SeedingFailure : Error { using Error::Error; };
struct OptFailure : Error { using Error::Error; };

// bench
struct NotSupported : Error { using Error::Error; };
struct DomainError : Error { using Error::Error; };

// evolve
struct InvalidRequest : Error { using Error::Error; };
struct InitFailure : Error { using Error::Error; };

// llm
struct ProviderUnavailable : Error { using Error::Error; };
struct ProtocolError : Error { using Error::Error; };
struct ConfigError : Error { using Error::Error; };
struct ExtractionError : Error { using Error::Error; };

} // namespace evocaf
