#pragma once

#include <stdexcept>
#include <string>

namespace topicreg {

/// Raised for invalid input and for numerical failures that callers must
/// handle (empty vocabulary, impossible observations, singular designs...).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message)
{
    if (!condition)
        throw Error(message);
}

}  // namespace topicreg
