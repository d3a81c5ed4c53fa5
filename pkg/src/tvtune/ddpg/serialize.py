"""Plain-text actor file.

Layout (one record per line, floats as C99 hex literals so round trips are
bit-exact)::

    tvtune-actor <version>
    sizes 9 100 100 4
    activations relu relu tanh
    bounds <low> <high>
    obs_scale <n floats>
    W0 <fan_in*fan_out floats, row-major (fan_in, fan_out)>
    b0 <fan_out floats>
    ...
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from ..errors import ConfigError
from .agent import Policy
from .mlp import Mlp

MAGIC = "tvtune-actor"
VERSION = 1


def _hex(values) -> str:
    return " ".join(float(v).hex() for v in np.ravel(values))


def _floats(tokens) -> np.ndarray:
    try:
        return np.array([float.fromhex(t) for t in tokens])
    except ValueError as exc:
        raise ConfigError(f"bad number in actor file: {exc}") from None


def dumps(policy: Policy) -> str:
    net = policy.net
    lines = [f"{MAGIC} {VERSION}",
             "sizes " + " ".join(str(s) for s in net.sizes),
             "activations " + " ".join(net.activations),
             f"bounds {_hex([policy.low, policy.high])}",
             f"obs_scale {_hex(policy.obs_scale)}"]
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        lines.append(f"W{i} {_hex(W)}")
        lines.append(f"b{i} {_hex(b)}")
    return "\n".join(lines) + "\n"


def loads(text: str) -> Policy:
    rows = [ln.split() for ln in text.splitlines() if ln.strip()]
    if not rows or rows[0][0] != MAGIC:
        raise ConfigError("not an actor file")
    if len(rows[0]) != 2 or rows[0][1] != str(VERSION):
        raise ConfigError(f"unsupported actor file version {rows[0][1:]}")
    rec = {r[0]: r[1:] for r in rows[1:]}
    try:
        sizes = [int(s) for s in rec["sizes"]]
        acts = rec["activations"]
        low, high = _floats(rec["bounds"])
        scale = _floats(rec["obs_scale"])
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"actor file is missing or has a bad header field: {exc}") from None
    if len(acts) != len(sizes) - 1 or len(scale) != sizes[0]:
        raise ConfigError("actor file dimensions are inconsistent")
    net = Mlp(sizes, acts, np.random.default_rng(0))
    for i in range(len(sizes) - 1):
        try:
            W = _floats(rec[f"W{i}"])
            b = _floats(rec[f"b{i}"])
        except KeyError:
            raise ConfigError(f"actor file lacks layer {i}") from None
        if W.size != sizes[i] * sizes[i + 1] or b.size != sizes[i + 1]:
            raise ConfigError(f"layer {i} has the wrong number of parameters")
        net.weights[i][...] = W.reshape(sizes[i], sizes[i + 1])
        net.biases[i][...] = b
    if not all(np.all(np.isfinite(p)) for p in net.params):
        raise ConfigError("actor file contains non-finite parameters")
    return Policy(net, scale, low, high)


def save_policy(policy: Policy, path) -> None:
    Path(path).write_text(dumps(policy), encoding="utf-8")


def load_policy(path) -> Policy:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"model file not found: {p}")
    return loads(p.read_text(encoding="utf-8"))
