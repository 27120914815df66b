#pragma once

#include <stdexcept>
#include <string>

namespace pcbf {

/// Base class for every error raised by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class NonSymmetric : public Error
{
public:
  using Error::Error;
};

class NonFinite : public Error
{
public:
  using Error::Error;
};

class InvalidArgument : public Error
{
public:
  using Error::Error;
};

/// A supplied function failed one of the registration checks (gradients, chain, class-K shape).
class ValidationError : public Error
{
public:
  using Error::Error;
};

/// The filter QP had no solution. `dump` holds rows, state and cuts for post-mortem.
class SafetyFault : public Error
{
public:
  SafetyFault(const std::string & what, std::string dump) : Error(what), dump_(std::move(dump)) {}

  const std::string & dump() const noexcept { return dump_; }

private:
  std::string dump_;
};

class InitFailed : public Error
{
public:
  using Error::Error;
};

class SamplingFailed : public Error
{
public:
  using Error::Error;
};

class EmptyTrace : public Error
{
public:
  EmptyTrace() : Error("empty trace") {}
};

class MalformedTrace : public Error
{
public:
  using Error::Error;
};

class ConfigError : public Error
{
public:
  using Error::Error;
};

}  // namespace pcbf
