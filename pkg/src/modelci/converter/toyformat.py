"""Codecs for the two toy model formats.

"toy-json" is the toy framework's native encoding: a UTF-8 JSON document

    {"layers": [{"op": str, "in_dim": int, "out_dim": int, "weights": [float]}]}

"toy-binary" is a packed little-endian encoding of the same graph:

    magic   b"TOYB"
    payload u32 layer_count, then per layer:
              u16 op_len | op utf8 bytes | u32 in_dim | u32 out_dim |
              u32 weight_count | weight_count * f64
    trailer u32 CRC32 of the payload

Weights travel as IEEE f64 in both directions, so a json -> binary -> json
round trip is bit exact. The canonical toy-json form (sorted keys, no
whitespace) is the reference encoding equality is checked against.
"""

from __future__ import annotations

import json
import math
import struct
import zlib

from modelci.errors import ToyFormatError

MAGIC = b"TOYB"

_HEADER = struct.Struct("<I")       # layer_count / weight_count / dims / crc
_OP_LEN = struct.Struct("<H")
_F64 = struct.Struct("<d")


def validate_graph(graph) -> dict:
    """Check graph structure; returns the graph unchanged on success."""
    if not isinstance(graph, dict):
        raise ToyFormatError("graph must be an object")
    layers = graph.get("layers")
    if not isinstance(layers, list) or not layers:
        raise ToyFormatError("graph needs a non-empty 'layers' list")
    for i, layer in enumerate(layers):
        if not isinstance(layer, dict):
            raise ToyFormatError(f"layer {i} must be an object")
        op = layer.get("op")
        if not isinstance(op, str) or not op:
            raise ToyFormatError(f"layer {i}: 'op' must be a non-empty string")
        for key in ("in_dim", "out_dim"):
            dim = layer.get(key)
            if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
                raise ToyFormatError(f"layer {i}: '{key}' must be a positive integer")
        weights = layer.get("weights")
        if not isinstance(weights, list):
            raise ToyFormatError(f"layer {i}: 'weights' must be a list")
        for w in weights:
            if isinstance(w, bool) or not isinstance(w, (int, float)):
                raise ToyFormatError(f"layer {i}: weights must be numbers")
            if not math.isfinite(w):
                raise ToyFormatError(f"layer {i}: weights must be finite")
        extra = set(layer) - {"op", "in_dim", "out_dim", "weights"}
        if extra:
            raise ToyFormatError(f"layer {i}: unknown keys {sorted(extra)}")
    extra = set(graph) - {"layers"}
    if extra:
        raise ToyFormatError(f"unknown top-level keys {sorted(extra)}")
    return graph


def _normalized(graph: dict) -> dict:
    """Graph with weights coerced to float (ints become f64 like the binary path)."""
    return {
        "layers": [
            {
                "op": layer["op"],
                "in_dim": layer["in_dim"],
                "out_dim": layer["out_dim"],
                "weights": [float(w) for w in layer["weights"]],
            }
            for layer in graph["layers"]
        ]
    }


def canonical_json(graph: dict) -> bytes:
    """Canonical toy-json encoding: sorted keys, no whitespace, UTF-8."""
    validate_graph(graph)
    return json.dumps(_normalized(graph), sort_keys=True, separators=(",", ":")).encode()


def parse_json(data: bytes) -> dict:
    try:
        graph = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ToyFormatError(f"not valid toy-json: {exc}") from exc
    return validate_graph(graph)


def encode_binary(graph: dict) -> bytes:
    validate_graph(graph)
    parts = [_HEADER.pack(len(graph["layers"]))]
    for layer in graph["layers"]:
        op = layer["op"].encode("utf-8")
        if len(op) > 0xFFFF:
            raise ToyFormatError("op name too long")
        parts.append(_OP_LEN.pack(len(op)))
        parts.append(op)
        parts.append(_HEADER.pack(layer["in_dim"]))
        parts.append(_HEADER.pack(layer["out_dim"]))
        weights = layer["weights"]
        parts.append(_HEADER.pack(len(weights)))
        parts.append(struct.pack(f"<{len(weights)}d", *[float(w) for w in weights]))
    payload = b"".join(parts)
    return MAGIC + payload + _HEADER.pack(zlib.crc32(payload))


def decode_binary(data: bytes) -> dict:
    if len(data) < len(MAGIC) + _HEADER.size * 2:
        raise ToyFormatError("truncated toy-binary data")
    if data[:4] != MAGIC:
        raise ToyFormatError("bad magic, not toy-binary data")
    payload, (crc,) = data[4:-4], _HEADER.unpack(data[-4:])
    if zlib.crc32(payload) != crc:
        raise ToyFormatError("CRC mismatch, payload corrupted")

    pos = 0

    def take(n: int) -> bytes:
        nonlocal pos
        if pos + n > len(payload):
            raise ToyFormatError("truncated toy-binary payload")
        chunk = payload[pos:pos + n]
        pos += n
        return chunk

    (layer_count,) = _HEADER.unpack(take(_HEADER.size))
    layers = []
    for _ in range(layer_count):
        (op_len,) = _OP_LEN.unpack(take(_OP_LEN.size))
        op = take(op_len).decode("utf-8")
        (in_dim,) = _HEADER.unpack(take(_HEADER.size))
        (out_dim,) = _HEADER.unpack(take(_HEADER.size))
        (weight_count,) = _HEADER.unpack(take(_HEADER.size))
        raw = take(weight_count * _F64.size)
        weights = list(struct.unpack(f"<{weight_count}d", raw))
        layers.append({"op": op, "in_dim": in_dim, "out_dim": out_dim, "weights": weights})
    if pos != len(payload):
        raise ToyFormatError("trailing bytes after last layer")
    return validate_graph({"layers": layers})


def load_model(data: bytes) -> dict:
    """Decode either toy format, sniffing by magic."""
    if data[:4] == MAGIC:
        return decode_binary(data)
    return parse_json(data)


def model_dims(graph: dict) -> tuple[int, int]:
    """(input dim of first layer, output dim of last layer)."""
    layers = graph["layers"]
    return layers[0]["in_dim"], layers[-1]["out_dim"]
