"""
Reference chains with closed-form asymptotic covariance.

AR(1): X_t = phi X_{t-1} + e_t with Σ = 1/(1 - phi)².
VAR(1): X_t = Phi X_{t-1} + e_t with e_t ~ N_p(0, I); the stationary
covariance V solves V = Phi V Phiᵀ + I and
Σ = (I - Phi)^{-1} V + V (I - Phiᵀ)^{-1} - V.

Every chain starts from its stationary law, so no burn-in is needed. Normal
variates come from numpy's Philox counter-based generator.
"""
import struct
from dataclasses import dataclass, field
from typing import Optional, TextIO, BinaryIO, Union

import numpy as np
from scipy import linalg
from scipy.signal import lfilter

from .configuration import config
from .errors import ChainError
from .estimators import ChainMatrix
from .interfaces import ChainSource

# Binary chain files: magic, n (uint64), p (uint32), then n*p little-endian float64 row-major
CHAIN_MAGIC = b'CKCH'
CHAIN_HEADER = struct.Struct('<4sQI')


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(int(seed)))


def spectral_radius(phi: np.ndarray) -> float:
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    return float(np.max(np.abs(np.linalg.eigvals(phi))))


def _check_stable(phi: np.ndarray) -> np.ndarray:
    phi = np.atleast_2d(np.asarray(phi, dtype=np.float64))
    if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
        raise ChainError(f"Phi must be a square matrix, got shape {phi.shape}")
    if not np.all(np.isfinite(phi)):
        raise ChainError("Phi has non-finite entries")
    radius = spectral_radius(phi)
    if radius >= 1.0:
        raise ChainError(f"Phi has spectral radius {radius:.6g} >= 1; the chain is not stationary")
    return phi


def ar1_true_sigma(phi: float) -> float:
    if not abs(phi) < 1.0:
        raise ChainError(f"AR(1) requires |phi| < 1, got {phi}")
    return 1.0 / (1.0 - phi) ** 2


@dataclass(frozen=True)
class Ar1Model(ChainSource):
    phi: float
    seed: int = 0

    def __post_init__(self):
        if not abs(self.phi) < 1.0:
            raise ChainError(f"AR(1) requires |phi| < 1, got {self.phi}")

    @property
    def p(self) -> int:
        return 1

    def generate(self, n: int, seed: Optional[int] = None) -> ChainMatrix:
        return ar1_generate(self, n, seed=seed)

    def true_sigma(self) -> np.ndarray:
        return np.array([[ar1_true_sigma(self.phi)]])


def ar1_generate(model: Ar1Model, n: int, seed: Optional[int] = None) -> ChainMatrix:
    """n draws X_0..X_{n-1} with X_0 from N(0, 1/(1 - phi²))."""
    n = int(n)
    if n < 2:
        raise ChainError(f"Chain length must be >= 2, got {n}")
    rng = make_rng(model.seed if seed is None else seed)
    x0 = rng.standard_normal() / np.sqrt(1.0 - model.phi ** 2)
    innovations = rng.standard_normal(n - 1)
    path, _ = lfilter([1.0], [1.0, -model.phi], innovations, zi=[model.phi * x0])
    return ChainMatrix(np.concatenate([[x0], path]).reshape(-1, 1))


def var1_stationary(phi) -> np.ndarray:
    """
    Stationary covariance V of the VAR(1) chain from
    vec(V) = (I - Phi ⊗ Phi)^{-1} vec(I).

    The dense solve is O(p⁶), so p is capped by the `max_var1_dim` setting.
    """
    phi = _check_stable(phi)
    p = phi.shape[0]
    max_dim = config.get('max_var1_dim')
    if p > max_dim:
        raise ChainError(f"VAR(1) dimension {p} exceeds the supported maximum of {max_dim}")
    system = np.eye(p * p) - np.kron(phi, phi)
    try:
        vec_v = linalg.solve(system, np.eye(p).reshape(-1, order='F'))
    except linalg.LinAlgError as e:
        raise ChainError(f"Stationary covariance system is singular: {e}")
    v = vec_v.reshape(p, p, order='F')
    return (v + v.T) / 2.0


def var1_true_sigma(phi) -> np.ndarray:
    phi = _check_stable(phi)
    p = phi.shape[0]
    v = var1_stationary(phi)
    left = linalg.solve(np.eye(p) - phi, v)
    # V symmetric, so V (I - Phiᵀ)^{-1} is the transpose of (I - Phi)^{-1} V
    sigma = left + left.T - v
    return (sigma + sigma.T) / 2.0


def make_phi(p: int, seed: int, offset: float = 1.0, scale: float = 1.0) -> np.ndarray:
    """
    Random symmetric stable Phi = scale · B / (m + offset) with B = AAᵀ,
    A standard normal and m the largest eigenvalue of B.
    """
    if int(p) < 1:
        raise ChainError(f"p must be >= 1, got {p}")
    if offset <= 0.0:
        raise ChainError(f"offset must be positive, got {offset}")
    if not 0.0 < scale <= 1.0:
        raise ChainError(f"scale must lie in (0, 1], got {scale}")
    # child stream of the seed, disjoint from the chain draws make_rng(seed) gives
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(int(seed)).spawn(1)[0]))
    a = rng.standard_normal((int(p), int(p)))
    b = a @ a.T
    b = (b + b.T) / 2.0
    m = float(np.linalg.eigvalsh(b)[-1])
    return scale * b / (m + offset)


@dataclass(frozen=True)
class Var1Model(ChainSource):
    phi: np.ndarray = field(compare=False)
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'phi', _check_stable(self.phi))

    @property
    def p(self) -> int:
        return self.phi.shape[0]

    def generate(self, n: int, seed: Optional[int] = None) -> ChainMatrix:
        return var1_generate(self, n, seed=seed)

    def true_sigma(self) -> np.ndarray:
        return var1_true_sigma(self.phi)

    @classmethod
    def random(cls, p: int, seed: int, offset: float = 1.0, scale: float = 1.0) -> 'Var1Model':
        return cls(make_phi(p, seed, offset=offset, scale=scale), seed=seed)


def var1_generate(model: Var1Model, n: int, seed: Optional[int] = None) -> ChainMatrix:
    """n draws X_0..X_{n-1} with X_0 ~ N_p(0, V)."""
    n = int(n)
    if n < 2:
        raise ChainError(f"Chain length must be >= 2, got {n}")
    phi = model.phi
    p = phi.shape[0]
    rng = make_rng(model.seed if seed is None else seed)
    root = np.linalg.cholesky(var1_stationary(phi))
    values = np.empty((n, p))
    values[0] = root @ rng.standard_normal(p)
    innovations = rng.standard_normal((n - 1, p))
    phi_t = phi.T
    for t in range(1, n):
        values[t] = values[t - 1] @ phi_t + innovations[t - 1]
    return ChainMatrix(values)


def write_chain(chain, out: Union[TextIO, BinaryIO], fmt: str = 'csv', header: bool = False) -> None:
    """
    Write a chain as CSV (UTF-8, comma separated, LF) or packed binary.

    Args:
        chain: ChainMatrix or array
        out: Text stream for csv, binary stream for bin
        fmt: 'csv' or 'bin'
        header: Emit a y1,...,yp header row (csv only)
    """
    data = np.asarray(getattr(chain, 'data', chain), dtype=np.float64)
    if data.ndim == 1:
        data = data.reshape(-1, 1)
    n, p = data.shape
    if fmt == 'bin':
        out.write(CHAIN_HEADER.pack(CHAIN_MAGIC, n, p))
        out.write(np.ascontiguousarray(data, dtype='<f8').tobytes(order='C'))
    elif fmt == 'csv':
        if header:
            out.write(','.join(f'y{j + 1}' for j in range(p)) + '\n')
        for row in data:
            out.write(','.join(repr(float(value)) for value in row) + '\n')
    else:
        raise ChainError(f"Unknown chain format '{fmt}', use csv or bin")
