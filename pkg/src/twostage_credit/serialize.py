"""Plain-text, version-tagged serialization for network weights.

Floats are written with Python's shortest round-trip decimal repr, so
every weight survives a save/load cycle bit-exactly.
"""

from __future__ import annotations

import hashlib

import numpy as np

from .ingest import Standardizer
from .mlp import MLPParams

PARAMS_FORMAT = "mlp-params-v1"


def _fmt_array(a: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(a, dtype=np.float64).ravel())


def _parse_array(s: str) -> np.ndarray:
    parts = s.split()
    return np.array([float(p) for p in parts]) if parts else np.array([])


def params_to_text(params: MLPParams) -> str:
    lines = [
        f"format = {PARAMS_FORMAT}",
        f"W1 = {_fmt_array(params.W1)}",
        f"b1 = {_fmt_array(params.b1)}",
        f"w2 = {_fmt_array(params.w2)}",
        f"b2 = {repr(float(params.b2))}",
    ]
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> MLPParams:
    kv = parse_flat_kv(text)
    if kv.get("format") != PARAMS_FORMAT:
        raise ValueError(f"unsupported params format: {kv.get('format')!r}")
    return MLPParams(
        W1=_parse_array(kv["W1"]).reshape(2, 10),
        b1=_parse_array(kv["b1"]),
        w2=_parse_array(kv["w2"]),
        b2=float(kv["b2"]),
    )


def standardizer_to_text(s: Standardizer) -> str:
    return f"mean = {_fmt_array(s.mean)}\nstd = {_fmt_array(s.std)}\n"


def standardizer_from_text(text: str) -> Standardizer:
    kv = parse_flat_kv(text)
    return Standardizer(mean=_parse_array(kv["mean"]), std=_parse_array(kv["std"]))


def parse_flat_kv(text: str) -> dict[str, str]:
    """Parse a flat 'key = value' text block; '#' starts a comment line."""
    out: dict[str, str] = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"malformed line (no '='): {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def format_flat_kv(kv: dict[str, str]) -> str:
    return "".join(f"{k} = {v}\n" for k, v in kv.items())


def content_digest(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()
