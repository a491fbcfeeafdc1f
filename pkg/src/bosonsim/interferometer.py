"""Unitary interferometers: Haar-random, Fourier and balanced-port constructions.

Ports are 0-based in the Python API and 1-based in files and on the command
line.  Random matrices are drawn from ``numpy.random.Philox`` (Philox-4x64,
a counter-based generator), so a ``(dim, seed)`` pair gives the same matrix
on every platform.
"""

from __future__ import annotations

import enum
import hashlib
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .errors import InvalidArgumentError, ValidationError

UNITARITY_TOL = 1e-10


class Kind(str, enum.Enum):
    HAAR = "haar"
    FOURIER = "fourier"
    BALANCED = "balanced"
    EXPLICIT = "explicit"


def make_rng(seed: int) -> np.random.Generator:
    """Philox-backed generator keyed by a 64-bit seed."""
    if seed is None:
        raise InvalidArgumentError("a seed is required")
    return np.random.Generator(np.random.Philox(int(seed) & 0xFFFFFFFFFFFFFFFF))


def unitarity_residual(matrix: np.ndarray) -> float:
    """``max |U^dagger U - I|`` entrywise."""
    m = np.asarray(matrix)
    return float(np.max(np.abs(m.conj().T @ m - np.eye(m.shape[0]))))


@dataclass(frozen=True, eq=False)
class Interferometer:
    """An ``M x M`` unitary; row ``k`` is input port ``k``, column ``l`` output port ``l``."""

    matrix: np.ndarray
    kind: Kind = Kind.EXPLICIT
    seed: Optional[int] = None
    _hash: str = field(default="", init=False, repr=False)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=np.complex128, copy=True)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise ValidationError(f"interferometer matrix must be square and nonempty, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ValidationError("interferometer matrix has non-finite entries")
        res = unitarity_residual(m)
        if res >= UNITARITY_TOL:
            raise ValidationError(f"matrix is not unitary: max |U^dagger U - I| = {res:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "kind", Kind(self.kind))
        digest = hashlib.sha256(m.tobytes()).hexdigest()[:16]
        object.__setattr__(self, "_hash", digest)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def instance_hash(self) -> str:
        """Short content hash of the matrix bytes."""
        return self._hash

    def to_dict(self) -> dict:
        d = {"dim": self.dim, "kind": self.kind.value}
        if self.seed is not None:
            d["seed"] = int(self.seed)
        d["matrix"] = [[[float(z.real), float(z.imag)] for z in row] for row in self.matrix]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Interferometer":
        try:
            dim = int(d["dim"])
            rows = d["matrix"]
            mat = np.array([[complex(re, im) for re, im in row] for row in rows], dtype=np.complex128)
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"malformed interferometer record: {exc}") from exc
        if mat.shape != (dim, dim):
            raise ValidationError(f"matrix shape {mat.shape} does not match dim={dim}")
        return cls(mat, Kind(d.get("kind", "explicit")), d.get("seed"))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "Interferometer":
        return cls.from_dict(json.loads(text))


def _check_dim(dim) -> int:
    if int(dim) != dim or dim < 1:
        raise InvalidArgumentError(f"dimension must be a positive integer, got {dim}")
    return int(dim)


def haar_random(dim: int, seed: int) -> Interferometer:
    """Haar-distributed unitary from the phase-corrected QR of a complex Ginibre matrix."""
    dim = _check_dim(dim)
    rng = make_rng(seed)
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return Interferometer(q, Kind.HAAR, int(seed))


def fourier_matrix(dim: int) -> np.ndarray:
    dim = _check_dim(dim)
    k = np.arange(1, dim + 1)
    return np.exp(2j * np.pi * np.outer(k, k) / dim) / np.sqrt(dim)


def fourier(dim: int) -> Interferometer:
    """``F[k, l] = exp(2 pi i k l / M) / sqrt(M)`` with ``k, l`` counted from 1."""
    return Interferometer(fourier_matrix(dim), Kind.FOURIER)


def balanced_port(v) -> Interferometer:
    """``U = F (1 + V)``: every input couples to output port 0 with modulus ``M**-0.5``.

    ``v`` may be an :class:`Interferometer` or a unitary array of size ``M - 1``;
    the result inherits its seed.
    """
    if isinstance(v, Interferometer):
        vm, seed = v.matrix, v.seed
    else:
        vm = np.asarray(v, dtype=np.complex128)
        seed = None
        if vm.ndim != 2 or vm.shape[0] != vm.shape[1]:
            raise ValidationError("V must be a square matrix")
        res = unitarity_residual(vm)
        if res >= UNITARITY_TOL:
            raise ValidationError(f"V is not unitary: residual {res:.3e}")
    dim = vm.shape[0] + 1
    block = np.zeros((dim, dim), dtype=np.complex128)
    block[0, 0] = 1.0
    block[1:, 1:] = vm
    return Interferometer(fourier_matrix(dim) @ block, Kind.BALANCED, seed)


@dataclass(frozen=True)
class InputSpec:
    """Single bosons injected at ``input_ports`` (default ``0..N-1``) of a ``dim``-port device."""

    n_bosons: int
    dim: int
    input_ports: Optional[Sequence[int]] = None

    def __post_init__(self):
        n, m = self.n_bosons, self.dim
        if int(n) != n or n < 1:
            raise InvalidArgumentError(f"n_bosons must be a positive integer, got {n}")
        if int(m) != m or m < n:
            raise InvalidArgumentError(f"need N <= M, got N={n}, M={m}")
        ports = tuple(range(n)) if self.input_ports is None else tuple(int(p) for p in self.input_ports)
        if len(ports) != n or len(set(ports)) != n:
            raise InvalidArgumentError("input_ports must list N distinct ports")
        if min(ports) < 0 or max(ports) >= m:
            raise InvalidArgumentError(f"input ports must lie in 0..{m - 1}")
        object.__setattr__(self, "input_ports", ports)

    @property
    def density(self) -> Fraction:
        return Fraction(self.n_bosons, self.dim)

    @classmethod
    def default(cls, u: Interferometer, n_bosons: int) -> "InputSpec":
        return cls(n_bosons, u.dim)
