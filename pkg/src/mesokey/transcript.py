"""Line-delimited JSON serialisation of protocol transcripts.

One object per line: a ``header`` with the operating point, one ``cycle``
record per exchange, then a ``final`` record. Bit payloads are packed
big-endian and base64 encoded; bases are big-endian uint16.
"""

from __future__ import annotations

import base64
import json

import numpy as np

from .errors import DomainError
from .protocol import Transcript, bits_to_hex

FORMAT_VERSION = 1


def pack_bits(bits) -> str:
    return base64.b64encode(np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()).decode("ascii")


def unpack_bits(payload: str, count: int) -> np.ndarray:
    raw = np.frombuffer(base64.b64decode(payload), dtype=np.uint8)
    return np.unpackbits(raw)[:count]


def pack_bases(bases) -> str:
    return base64.b64encode(np.asarray(bases, dtype=">u2").tobytes()).decode("ascii")


def unpack_bases(payload: str) -> np.ndarray:
    return np.frombuffer(base64.b64decode(payload), dtype=">u2").astype(np.int64)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def transcript_lines(transcript: Transcript) -> list[str]:
    p = transcript.params
    lines = [_dump({
        "type": "header", "version": FORMAT_VERSION, "M": p.num_bases,
        "n": p.mean_photon_number, "r": p.repetition, "eta": p.transmittance,
    })]
    for rec in transcript.records:
        lines.append(_dump({
            "type": "cycle",
            "index": rec.cycle_index,
            "sender": rec.sender_role,
            "ber": rec.receiver_ber,
            "nbits": int(rec.plain_bits.size),
            "sent": pack_bits(rec.plain_bits),
            "received": pack_bits(rec.receiver_bits),
            "bases": pack_bases(rec.bases_used),
            "verified": None if rec.verification is None else rec.verification.verified,
        }))
    lines.append(_dump({
        "type": "final",
        "key_a": bits_to_hex(transcript.final_key_a),
        "key_b": bits_to_hex(transcript.final_key_b),
        "diverged": transcript.diverged,
        "aborted": transcript.aborted,
    }))
    return lines


def write_transcript(transcript: Transcript, fh) -> None:
    for line in transcript_lines(transcript):
        fh.write(line + "\n")


def read_transcript(fh) -> list[dict]:
    """Parse a transcript back into dicts with bit payloads decoded to arrays."""
    out = []
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DomainError(f"line {lineno}: not JSON ({exc})") from exc
        if rec.get("type") == "cycle":
            rec["sent"] = unpack_bits(rec["sent"], rec["nbits"])
            rec["received"] = unpack_bits(rec["received"], rec["nbits"])
            rec["bases"] = unpack_bases(rec["bases"])
        out.append(rec)
    return out
