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

#include "shieldrun/common/error.hpp"

namespace shieldrun {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::ConfigInvalid: return "ConfigInvalid";
    case Errc::AlreadyFinalized: return "AlreadyFinalized";
    case Errc::OutOfBounds: return "OutOfBounds";
    case Errc::OutOfMemory: return "OutOfMemory";
    case Errc::ParseError: return "ParseError";
    case Errc::ModeUnknown: return "ModeUnknown";
    case Errc::NoFreeTcs: return "NoFreeTcs";
    case Errc::QueueFull: return "QueueFull";
    case Errc::IagoViolation: return "IagoViolation";
    case Errc::SchedulerMisuse: return "SchedulerMisuse";
    case Errc::TamperDetected: return "TamperDetected";
    case Errc::HeaderCorrupt: return "HeaderCorrupt";
    case Errc::KeyMissing: return "KeyMissing";
    case Errc::IoError: return "IoError";
    case Errc::AuthFailure: return "AuthFailure";
    case Errc::MeasurementMismatch: return "MeasurementMismatch";
    case Errc::Downgrade: return "Downgrade";
    case Errc::ReplayDetected: return "ReplayDetected";
    case Errc::IntegrityFailure: return "IntegrityFailure";
    case Errc::ChannelClosed: return "ChannelClosed";
    case Errc::ProtocolError: return "ProtocolError";
    case Errc::SignatureInvalid: return "SignatureInvalid";
    case Errc::NonceReused: return "NonceReused";
    case Errc::UnknownMeasurement: return "UnknownMeasurement";
    case Errc::ProvisioningFailed: return "ProvisioningFailed";
    case Errc::AlreadyProvisioned: return "AlreadyProvisioned";
    case Errc::ShapeMismatch: return "ShapeMismatch";
    case Errc::UnknownNode: return "UnknownNode";
    case Errc::MissingFeed: return "MissingFeed";
    case Errc::NonFinite: return "NonFinite";
    case Errc::FormatVersionUnknown: return "FormatVersionUnknown";
    case Errc::CorruptFile: return "CorruptFile";
    case Errc::RecordTruncated: return "RecordTruncated";
    case Errc::LabelOutOfRange: return "LabelOutOfRange";
    case Errc::EndOfInput: return "EndOfInput";
    case Errc::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

}  // namespace shieldrun
