#pragma once

#include <stdexcept>
#include <string>

namespace webrpg {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// rp_codec
class OutOfRangeError : public Error { using Error::Error; };
class WrongKindError : public Error { using Error::Error; };
class IllegalTokenError : public Error { using Error::Error; };
class InvalidVectorError : public Error { using Error::Error; };
class ParseError : public Error { using Error::Error; };
class UnknownParameterError : public Error { using Error::Error; };
class UnparseableValueError : public Error { using Error::Error; };

// html_pipeline
class HtmlParseError : public Error { using Error::Error; };
class MissingLayoutError : public Error { using Error::Error; };
class MissingStyleError : public Error { using Error::Error; };
class XPathError : public Error { using Error::Error; };

// neural_core and models
class ShapeMismatchError : public Error { using Error::Error; };
class NonFiniteError : public Error { using Error::Error; };
class CheckpointError : public Error { using Error::Error; };
class EncoderFailureError : public Error { using Error::Error; };
class DivergenceDetectedError : public Error { using Error::Error; };
class ModelNotTrainedError : public Error { using Error::Error; };
class BadTimestepError : public Error { using Error::Error; };
class BadConfigError : public Error { using Error::Error; };

// evaluation
class LengthMismatchError : public Error { using Error::Error; };
class IdMismatchError : public Error { using Error::Error; };
class SingularCovarianceError : public Error { using Error::Error; };

// harness
class BadSpecError : public Error { using Error::Error; };
class EmptyAfterFilterError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace webrpg
