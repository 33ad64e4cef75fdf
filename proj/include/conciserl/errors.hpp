#pragma once

#include <stdexcept>
#include <string>

namespace conciserl {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Reward algebra
class OutOfRangeScore : public Error { public: using Error::Error; };
class MissingScore : public Error { public: using Error::Error; };
class InvalidParams : public Error { public: using Error::Error; };
class InvalidAlpha : public Error { public: using Error::Error; };

// Judge client
class UnparseableReply : public Error {
public:
    UnparseableReply(const std::string& msg, std::string raw)
        : Error(msg), raw_reply(std::move(raw)) {}
    std::string raw_reply;
};
class BudgetExceeded : public Error { public: using Error::Error; };
class TransportError : public Error { public: using Error::Error; };

// Policy / trainer
class DegenerateConfig : public Error { public: using Error::Error; };
class DegenerateGroup : public Error { public: using Error::Error; };
class InvalidRatio : public Error { public: using Error::Error; };

// Metrics / IO
class EmptyInput : public Error { public: using Error::Error; };
class ZeroReference : public Error { public: using Error::Error; };
class MissingLevel : public Error { public: using Error::Error; };
class MissingCount : public Error { public: using Error::Error; };
class EvenWidth : public Error { public: using Error::Error; };
class MalformedRecord : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };

} // namespace conciserl
