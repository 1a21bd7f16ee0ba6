// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace coral {

// Typed error taxonomy. The service maps kinds onto the wire verbatim, so
// names are stable identifiers, not just diagnostics.
enum class ErrorKind {
  config,               // invalid configuration value
  shape,                // dimension mismatch between operands
  numeric,              // NaN/Inf escaped an operation
  contract,             // API precondition violated (e.g. mutating frozen weights)
  io,                   // filesystem / socket failure
  format,               // malformed or truncated file / message
  corruption,           // checksum mismatch on an otherwise well-formed file
  unsupported_version,  // container version not understood
  collision,            // duplicate registry key
  missing_adapter,      // manifest references an unreadable adapter
  stale_expert,         // adapter fingerprint does not match the serving base
  unknown_task,         // routing miss in reject mode
  not_found,            // unknown layer / expert id
  protocol,             // malformed wire request
};

const char* to_string(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace coral
