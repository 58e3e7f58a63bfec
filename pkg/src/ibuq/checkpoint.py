"""Checkpoint directories: a text manifest plus one raw float64 file per parameter.

Layout:
    <dir>/manifest.txt   key=value lines; parameter shapes under shape.<name>
    <dir>/<name>.bin     flat little-endian float64, C order

Round-trips are bit-exact: values go to disk untouched.
"""
from __future__ import annotations

import os

import numpy as np

MANIFEST_NAME = "manifest.txt"
FORMAT_VERSION = "1"


def save_checkpoint(path: str, manifest: dict, params: dict[str, np.ndarray]) -> None:
    os.makedirs(path, exist_ok=True)
    lines = [f"format_version={FORMAT_VERSION}"]
    for key in sorted(manifest):
        value = manifest[key]
        if "\n" in str(value) or "=" in str(key):
            raise ValueError(f"manifest entry {key!r} is not representable")
        lines.append(f"{key}={value}")
    for name in sorted(params):
        arr = np.asarray(params[name], dtype="<f8")
        shape = ",".join(str(d) for d in arr.shape)
        lines.append(f"shape.{name}={shape}")
        arr.ravel(order="C").tofile(os.path.join(path, name + ".bin"))
    with open(os.path.join(path, MANIFEST_NAME), "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_checkpoint(path: str) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    manifest_path = os.path.join(path, MANIFEST_NAME)
    if not os.path.isfile(manifest_path):
        raise FileNotFoundError(f"no checkpoint manifest at {manifest_path}")
    manifest: dict[str, str] = {}
    shapes: dict[str, tuple] = {}
    with open(manifest_path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, value = line.partition("=")
            if key.startswith("shape."):
                name = key[len("shape."):]
                shapes[name] = tuple(int(d) for d in value.split(",")) if value else ()
            else:
                manifest[key] = value
    params = {}
    for name, shape in shapes.items():
        arr = np.fromfile(os.path.join(path, name + ".bin"), dtype="<f8")
        params[name] = arr.reshape(shape)
    return manifest, params
