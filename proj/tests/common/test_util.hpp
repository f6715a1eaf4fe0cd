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

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>

#include "shieldrun/common/bytes.hpp"
#include "shieldrun/common/error.hpp"
#include "shieldrun/fs/policy.hpp"

namespace testutil {

namespace stdfs = std::filesystem;
using shieldrun::Bytes;
using shieldrun::Errc;

struct TempDir {
  stdfs::path dir;
  explicit TempDir(const std::string& tag = "t") {
    static int n = 0;
    dir = stdfs::temp_directory_path() /
          ("shieldrun_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
    stdfs::create_directories(dir / "secure" / "logs");
  }
  ~TempDir() { stdfs::remove_all(dir); }
  std::string path(const std::string& rel) const { return (dir / rel).string(); }
  std::vector<shieldrun::fs::PathPolicy> policies() const {
    return {{path("secure"), shieldrun::fs::ShieldMode::EncryptAuth},
            {path("secure/logs"), shieldrun::fs::ShieldMode::AuthOnly}};
  }
};

inline Bytes make_data(std::mt19937_64& rng, std::size_t n) {
  Bytes b(n);
  for (auto& x : b) x = static_cast<std::uint8_t>(rng());
  return b;
}

inline Bytes slurp(const std::string& p) {
  std::ifstream f(p, std::ios::binary);
  return Bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

inline void spit(const std::string& p, const Bytes& b) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

// Code of the shieldrun::Error thrown by fn; InvalidArgument when none.
template <class Fn>
Errc code_of(Fn&& fn) {
  try {
    fn();
  } catch (const shieldrun::Error& e) {
    return e.code();
  }
  return Errc::InvalidArgument;
}

inline bool contains(const Bytes& hay, shieldrun::ByteSpan needle) {
  if (needle.empty() || hay.size() < needle.size()) return false;
  return std::search(hay.begin(), hay.end(), needle.begin(), needle.end()) != hay.end();
}

}  // namespace testutil
