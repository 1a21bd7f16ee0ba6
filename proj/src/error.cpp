// Copyright (c) 2026 The coral Authors
// SPDX-License-Identifier: Apache-2.0

#include "coral/error.hpp"

namespace coral {

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::config: return "config";
    case ErrorKind::shape: return "shape";
    case ErrorKind::numeric: return "numeric";
    case ErrorKind::contract: return "contract";
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::corruption: return "corruption";
    case ErrorKind::unsupported_version: return "unsupported_version";
    case ErrorKind::collision: return "collision";
    case ErrorKind::missing_adapter: return "missing_adapter";
    case ErrorKind::stale_expert: return "stale_expert";
    case ErrorKind::unknown_task: return "unknown_task";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::protocol: return "protocol";
  }
  return "unknown";
}

}  // namespace coral
