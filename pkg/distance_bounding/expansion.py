"""Keyed pseudorandom expansion shared by the tree, Hancke-Kuhn registers and
Brands-Chaum signatures.

HMAC-SHA256 in counter mode over a domain-separated, length-prefixed encoding
of the inputs. Each input bit string is packed MSB-first and prefixed with its
bit length, so (k, a, b) and (k, a', b') never encode to the same message.
"""

import hashlib
import hmac
import struct

from distance_bounding.core import Bits, pack_bits, unpack_bits

_DIGEST_BITS = hashlib.sha256().digest_size * 8


def _encode(parts: tuple[Bits, ...]) -> bytes:
    encoded = bytearray()
    for part in parts:
        encoded += struct.pack(">I", len(part))
        encoded += pack_bits(part)
    return bytes(encoded)


def expand(key: Bits, domain: bytes, parts: tuple[Bits, ...], length: int) -> Bits:
    """Return `length` pseudorandom bits determined by (key, domain, parts)."""
    mac_key = struct.pack(">I", len(key)) + pack_bits(key)
    message = domain + b"\x00" + _encode(parts)
    blocks = -(-length // _DIGEST_BITS)
    stream = b"".join(
        hmac.new(mac_key, message + struct.pack(">I", counter), hashlib.sha256).digest()
        for counter in range(blocks)
    )
    return unpack_bits(stream, length)
