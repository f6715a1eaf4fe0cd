/*
 * Copyright 2026 The ShieldRun Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shieldrun {

// Every failure the runtime reports carries one of these codes. Callers
// branch on the code, the message is for humans.
enum class Errc {
  // enclave-runtime
  ConfigInvalid,
  AlreadyFinalized,
  OutOfBounds,
  OutOfMemory,
  ParseError,
  ModeUnknown,
  NoFreeTcs,
  // syscall-bridge
  QueueFull,
  IagoViolation,
  // green-scheduler
  SchedulerMisuse,
  // fs-shield
  TamperDetected,
  HeaderCorrupt,
  KeyMissing,
  IoError,
  // net-shield
  AuthFailure,
  MeasurementMismatch,
  Downgrade,
  ReplayDetected,
  IntegrityFailure,
  ChannelClosed,
  ProtocolError,
  // attestation-cas
  SignatureInvalid,
  NonceReused,
  UnknownMeasurement,
  ProvisioningFailed,
  AlreadyProvisioned,
  // tensor-engine
  ShapeMismatch,
  UnknownNode,
  MissingFeed,
  NonFinite,
  FormatVersionUnknown,
  CorruptFile,
  RecordTruncated,
  LabelOutOfRange,
  EndOfInput,
  InvalidArgument,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void raise(Errc code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace shieldrun
