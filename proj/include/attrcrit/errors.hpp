#pragma once

#include <stdexcept>
#include <string>

namespace attrcrit {

/// Base class for every error thrown by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/layer extents do not line up.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

/// File could not be read or written.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

/// Image/curve/raw-tensor file is malformed.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

/// File declares a version this build does not understand.
class VersionError : public FormatError {
public:
    explicit VersionError(const std::string& msg) : FormatError(msg) {}
};

/// Model manifest or weight blob violates the model contract.
class ModelFormatError : public Error {
public:
    explicit ModelFormatError(const std::string& msg) : Error(msg) {}
};

/// A backward rule was asked to handle a layer kind it has no rule for.
class RuleError : public Error {
public:
    explicit RuleError(const std::string& msg) : Error(msg) {}
};

/// GradCAM was requested on a model without a usable conv layer.
class NoConvLayerError : public Error {
public:
    explicit NoConvLayerError(const std::string& msg) : Error(msg) {}
};

/// Attribution map has no strictly positive score; ordering metrics undefined.
class EmptyPositiveSetError : public Error {
public:
    explicit EmptyPositiveSetError(const std::string& msg) : Error(msg) {}
};

/// Normalizer or penalty ratio is degenerate; proportionality undefined.
class DegenerateScoreError : public Error {
public:
    explicit DegenerateScoreError(const std::string& msg) : Error(msg) {}
};

/// Argument outside its documented range.
class RangeError : public Error {
public:
    explicit RangeError(const std::string& msg) : Error(msg) {}
};

/// A reduction over reports got nothing to reduce.
class EmptyInputError : public Error {
public:
    explicit EmptyInputError(const std::string& msg) : Error(msg) {}
};

/// Logical ordering index does not exist for the statement.
class UndefinedError : public Error {
public:
    explicit UndefinedError(const std::string& msg) : Error(msg) {}
};

} // namespace attrcrit
