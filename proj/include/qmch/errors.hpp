//---------------------------------------------------------------------------//
//! \file qmch/errors.hpp
//! Exception types shared by the solver modules.
//---------------------------------------------------------------------------//
#pragma once

#include <stdexcept>
#include <string>

namespace qmch
{
//---------------------------------------------------------------------------//
//! Invalid user input: problem definition, mesh, or run configuration.
class ConfigError : public std::runtime_error
{
  public:
    explicit ConfigError(std::string const& what) : std::runtime_error(what)
    {
    }
};

//! A position fell outside the spatial domain.
class OutOfDomainError : public std::runtime_error
{
  public:
    explicit OutOfDomainError(std::string const& what)
        : std::runtime_error(what)
    {
    }
};

//! An internal consistency check failed (negative weight, NaN, ...).
class InvariantError : public std::logic_error
{
  public:
    explicit InvariantError(std::string const& what) : std::logic_error(what)
    {
    }
};

//---------------------------------------------------------------------------//
}  // namespace qmch
