"""Extended XYZ reading and writing (single frame).

Line 1 holds the particle count, line 2 a comment with optional
``Lattice="Lx Ly Lz"`` (or a diagonal 9-number lattice) and ``dim=2|3``
tags, then one ``species x y z`` line per particle. 2D systems are written
with ``z = 0``.
"""

from __future__ import annotations

import re
import shlex

import numpy as np

from .core import ParticleSystem

__all__ = ["XYZParseError", "read_xyz", "write_xyz", "parse_xyz", "format_xyz"]


class XYZParseError(ValueError):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


_KV = re.compile(r'(\w+)=("[^"]*"|\S+)')


def _parse_comment(comment: str) -> dict:
    out = {}
    for key, val in _KV.findall(comment):
        out[key.lower()] = val.strip('"')
    return out


def parse_xyz(text: str) -> ParticleSystem:
    lines = text.splitlines()
    if not lines or not lines[0].strip():
        raise XYZParseError("missing particle count", 1)
    try:
        n = int(lines[0].split()[0])
    except ValueError:
        raise XYZParseError(f"particle count is not an integer: {lines[0]!r}", 1) from None
    if n < 1:
        raise XYZParseError("particle count must be positive", 1)
    if len(lines) < 2:
        raise XYZParseError("missing comment line", 2)
    tags = _parse_comment(lines[1])
    dim = 3
    if "dim" in tags:
        if tags["dim"] not in ("2", "3"):
            raise XYZParseError(f"dim must be 2 or 3, got {tags['dim']!r}", 2)
        dim = int(tags["dim"])
    box = None
    if "lattice" in tags:
        try:
            vals = [float(v) for v in tags["lattice"].split()]
        except ValueError:
            raise XYZParseError("Lattice values must be numbers", 2) from None
        if len(vals) == 9:
            m = np.array(vals).reshape(3, 3)
            if np.any(m[~np.eye(3, dtype=bool)] != 0):
                raise XYZParseError("only orthogonal lattices are supported", 2)
            vals = list(np.diag(m))
        if len(vals) != 3:
            raise XYZParseError("Lattice needs 3 (or 9) numbers", 2)
        box = np.array(vals[:dim])
    if len(lines) < n + 2:
        raise XYZParseError(f"expected {n} particle lines, found {len(lines) - 2}", len(lines) + 1)
    species = []
    pos = np.empty((n, 3))
    for k in range(n):
        lineno = k + 3
        parts = lines[k + 2].split()
        if len(parts) < 4:
            raise XYZParseError("expected 'species x y z'", lineno)
        species.append(parts[0])
        try:
            pos[k] = [float(v) for v in parts[1:4]]
        except ValueError:
            raise XYZParseError("coordinates must be numbers", lineno) from None
    if not np.all(np.isfinite(pos)):
        raise XYZParseError("non-finite coordinate", 3 + int(np.nonzero(~np.isfinite(pos))[0][0]))
    return ParticleSystem(pos[:, :dim], box, species)


def read_xyz(path) -> ParticleSystem:
    with open(path) as fh:
        return parse_xyz(fh.read())


def format_xyz(system: ParticleSystem, comment: str = "") -> str:
    tags = [f"dim={system.dimension}"]
    if system.box is not None:
        box = list(system.box) + [0.0] * (3 - system.dimension)
        tags.insert(0, 'Lattice="{}"'.format(" ".join(repr(float(b)) for b in box)))
    if comment:
        # keep user text from masquerading as tags
        tags.append(shlex.quote(comment).replace("=", ":"))
    out = [str(system.n), " ".join(tags)]
    species = system.species or ("X",) * system.n
    for s, p in zip(species, system.positions):
        xyz = [float(v) for v in p] + [0.0] * (3 - system.dimension)
        out.append(f"{s} {xyz[0]!r} {xyz[1]!r} {xyz[2]!r}")
    return "\n".join(out) + "\n"


def write_xyz(system: ParticleSystem, path, comment: str = "") -> None:
    with open(path, "w") as fh:
        fh.write(format_xyz(system, comment))
