"""Versioned policy checkpoint container.

Layout (documented for cross-language readers):

    bytes 0-7    magic b"SWLFTCKP"
    bytes 8-11   format version, uint32 little-endian (currently 1)
    bytes 12-15  header length H, uint32 little-endian
    bytes 16-..  header, H bytes of UTF-8 JSON
    remainder    tensor payload, concatenated row-major little-endian float64

The JSON header lists every tensor as {"name", "shape", "offset", "nbytes"}
with offsets relative to the payload start, plus obs/action dims, layer
widths, the number of agents the policy was trained for, a CRC-32 of the
payload, and free-form training metadata.  Optimizer moments are stored as
ordinary tensors named "adam.m.*" / "adam.v.*".
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

from .nets import PolicyParams
from .ppo import AdamState

MAGIC = b"SWLFTCKP"
FORMAT_VERSION = 1


class CheckpointError(RuntimeError):
    pass


def _tensor_entries(tensors: dict) -> tuple[list[dict], bytes]:
    entries = []
    chunks = []
    offset = 0
    for name, arr in tensors.items():
        data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
        entries.append(
            {"name": name, "shape": list(arr.shape), "offset": offset, "nbytes": len(data)}
        )
        chunks.append(data)
        offset += len(data)
    return entries, b"".join(chunks)


def save_policy(
    params: PolicyParams,
    path,
    num_agents: int,
    metadata: dict | None = None,
    opt_state: AdamState | None = None,
) -> None:
    tensors = dict(params.tensors())
    if opt_state is not None:
        for name, arr in opt_state.m.items():
            tensors[f"adam.m.{name}"] = arr
        for name, arr in opt_state.v.items():
            tensors[f"adam.v.{name}"] = arr
    entries, payload = _tensor_entries(tensors)
    header = {
        "format_version": FORMAT_VERSION,
        "obs_dim": params.obs_dim,
        "action_dim": params.action_dim,
        "num_agents": num_agents,
        "actor_widths": list(params.actor_widths),
        "critic_widths": list(params.critic_widths),
        "dtype": "<f8",
        "payload_crc32": zlib.crc32(payload),
        "tensors": entries,
        "optimizer": None
        if opt_state is None
        else {"step": opt_state.step, "beta1": opt_state.beta1, "beta2": opt_state.beta2, "eps": opt_state.eps},
        "metadata": metadata or {},
    }
    header_bytes = json.dumps(header).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        fh.write(payload)


def _read_header(blob: bytes, path) -> tuple[dict, bytes]:
    if len(blob) < 16 or blob[:8] != MAGIC:
        raise CheckpointError(f"{path}: not a policy checkpoint (bad magic)")
    version = struct.unpack("<I", blob[8:12])[0]
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"{path}: unsupported checkpoint version {version}, expected {FORMAT_VERSION}"
        )
    header_len = struct.unpack("<I", blob[12:16])[0]
    if len(blob) < 16 + header_len:
        raise CheckpointError(f"{path}: truncated header")
    try:
        header = json.loads(blob[16 : 16 + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"{path}: corrupted header: {exc}") from exc
    return header, blob[16 + header_len :]


def load_policy(path) -> tuple[PolicyParams, dict, AdamState | None]:
    """Read a checkpoint; returns (params, header, optimizer state or None)."""
    blob = Path(path).read_bytes()
    header, payload = _read_header(blob, path)
    expected = sum(entry["nbytes"] for entry in header["tensors"])
    if len(payload) != expected:
        raise CheckpointError(
            f"{path}: corrupted payload, expected {expected} bytes, got {len(payload)}"
        )
    if zlib.crc32(payload) != header["payload_crc32"]:
        raise CheckpointError(f"{path}: payload checksum mismatch")

    arrays: dict[str, np.ndarray] = {}
    for entry in header["tensors"]:
        start, nbytes = entry["offset"], entry["nbytes"]
        arr = np.frombuffer(payload[start : start + nbytes], dtype="<f8").astype(float)
        arrays[entry["name"]] = arr.reshape(entry["shape"])

    def take(name: str, shape: tuple) -> np.ndarray:
        if name not in arrays:
            raise CheckpointError(f"{path}: missing tensor {name}")
        arr = arrays[name]
        if tuple(arr.shape) != shape:
            raise CheckpointError(
                f"{path}: tensor {name} has shape {arr.shape}, expected {shape}"
            )
        return arr

    obs_dim = header["obs_dim"]
    action_dim = header["action_dim"]
    actor_dims = [obs_dim, *header["actor_widths"], action_dim]
    critic_dims = [obs_dim, *header["critic_widths"], 1]
    params = PolicyParams(
        actor_w=[
            take(f"actor.w{i}", (actor_dims[i], actor_dims[i + 1]))
            for i in range(len(actor_dims) - 1)
        ],
        actor_b=[take(f"actor.b{i}", (actor_dims[i + 1],)) for i in range(len(actor_dims) - 1)],
        log_std=take("log_std", (action_dim,)),
        critic_w=[
            take(f"critic.w{i}", (critic_dims[i], critic_dims[i + 1]))
            for i in range(len(critic_dims) - 1)
        ],
        critic_b=[
            take(f"critic.b{i}", (critic_dims[i + 1],)) for i in range(len(critic_dims) - 1)
        ],
    )

    opt_state = None
    if header.get("optimizer"):
        opt = header["optimizer"]
        names = list(params.tensors().keys())
        if all(f"adam.m.{n}" in arrays for n in names):
            opt_state = AdamState(
                m={n: arrays[f"adam.m.{n}"] for n in names},
                v={n: arrays[f"adam.v.{n}"] for n in names},
                step=opt["step"],
                beta1=opt["beta1"],
                beta2=opt["beta2"],
                eps=opt["eps"],
            )
    return params, header, opt_state
