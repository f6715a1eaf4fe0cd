#!/usr/bin/env python3
#
# Copyright 2026 The ShieldRun Authors
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Independent implementation of the secure-channel wire format.

Writes tests/vectors/net_handshake.json. The C++ unit tests replay the
same inputs and must produce these exact bytes.

    python3 tools/gen_net_vectors.py > tests/vectors/net_handshake.json
"""

import hashlib
import hmac
import json
import struct
import sys

from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey
from cryptography.hazmat.primitives.asymmetric.x25519 import X25519PrivateKey, X25519PublicKey
from cryptography.hazmat.primitives.ciphers.aead import ChaCha20Poly1305
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

RAW = serialization.Encoding.Raw


def sha256(*parts):
    h = hashlib.sha256()
    for p in parts:
        h.update(p)
    return h.digest()


def stream(label, n):
    """Deterministic bytes for the vector inputs."""
    out = b""
    i = 0
    while len(out) < n:
        out += sha256(label.encode(), struct.pack(">I", i))
        i += 1
    return out[:n]


def ed_pub(sk):
    return sk.public_key().public_bytes(RAW, serialization.PublicFormat.Raw)


def x_pub(sk):
    return sk.public_key().public_bytes(RAW, serialization.PublicFormat.Raw)


def frame(t, body):
    return bytes([t]) + struct.pack(">I", len(body)) + body


def binding(challenge, identity, eph):
    return sha256(b"shieldrun quote", challenge, identity, eph)[:16]


def quote(platform, measurement, nonce):
    return measurement + nonce + platform.sign(measurement + nonce)


def record(key, seq, ctype, data):
    pt = bytes([ctype]) + data
    head = struct.pack(">QI", seq, len(pt) + 16)
    nonce = b"\x00" * 4 + struct.pack(">Q", seq)
    return head + ChaCha20Poly1305(key).encrypt(nonce, pt, head)


def main():
    c_rng = stream("client rng", 80)
    s_rng = stream("server rng", 80)
    c_id_seed = stream("client identity", 32)
    s_id_seed = stream("server identity", 32)
    platform_seed = stream("platform", 32)
    c_meas = sha256(b"client measurement")
    s_meas = sha256(b"server measurement")

    c_id = Ed25519PrivateKey.from_private_bytes(c_id_seed)
    s_id = Ed25519PrivateKey.from_private_bytes(s_id_seed)
    platform = Ed25519PrivateKey.from_private_bytes(platform_seed)
    c_random, c_secret, c_challenge = c_rng[:32], c_rng[32:64], c_rng[64:80]
    s_random, s_secret, s_challenge = s_rng[:32], s_rng[32:64], s_rng[64:80]
    c_eph = X25519PrivateKey.from_private_bytes(c_secret)
    s_eph = X25519PrivateKey.from_private_bytes(s_secret)

    ch = frame(1, bytes([1]) + c_random + x_pub(c_eph) + c_challenge)

    s_quote = quote(platform, s_meas, binding(c_challenge, ed_pub(s_id), x_pub(s_eph)))
    sh_unsigned = (bytes([1]) + s_random + x_pub(s_eph) + ed_pub(s_id) + s_challenge +
                   struct.pack(">H", len(s_quote)) + s_quote)
    sig_s = s_id.sign(b"shieldrun server hs" + sha256(ch, sh_unsigned))
    sh = frame(2, sh_unsigned + sig_s)

    c_quote = quote(platform, c_meas, binding(s_challenge, ed_pub(c_id), x_pub(c_eph)))
    cf_unsigned = ed_pub(c_id) + struct.pack(">H", len(c_quote)) + c_quote
    sig_c = c_id.sign(b"shieldrun client hs" + sha256(ch, sh, cf_unsigned))
    cf = frame(3, cf_unsigned + sig_c)

    th3 = sha256(ch, sh, cf)
    shared = c_eph.exchange(X25519PublicKey.from_public_bytes(x_pub(s_eph)))
    assert shared == s_eph.exchange(X25519PublicKey.from_public_bytes(x_pub(c_eph)))
    okm = HKDF(algorithm=hashes.SHA256(), length=96, salt=th3,
               info=b"shieldrun keys v1").derive(shared)
    c2s, s2c, fin = okm[:32], okm[32:64], okm[64:]
    sf = frame(4, hmac.new(fin, th3, hashlib.sha256).digest())

    vec = {
        "client_rng": c_rng.hex(),
        "server_rng": s_rng.hex(),
        "client_identity_seed": c_id_seed.hex(),
        "server_identity_seed": s_id_seed.hex(),
        "platform_seed": platform_seed.hex(),
        "client_measurement": c_meas.hex(),
        "server_measurement": s_meas.hex(),
        "client_hello": ch.hex(),
        "server_hello": sh.hex(),
        "client_finish": cf.hex(),
        "server_finished": sf.hex(),
        "c2s_key": c2s.hex(),
        "s2c_key": s2c.hex(),
        "client_records": [
            record(c2s, 0, 0x17, b"abc").hex(),
            record(c2s, 1, 0x17, b"").hex(),
            record(c2s, 2, 0x15, b"").hex(),
        ],
        "server_records": [record(s2c, 0, 0x17, b"hello from the server").hex()],
    }
    json.dump(vec, sys.stdout, indent=2)
    sys.stdout.write("\n")


if __name__ == "__main__":
    main()
