"""Uniform finite-difference grids and discrete function-space calculus.

Fields are plain 1-D float arrays over the interior nodes of a
:class:`GridSpec`, ordered row-major (axis 0 slowest).  Homogeneous Dirichlet
conditions are implied: boundary nodes are never stored.

The discrete Laplacian is the standard second-order centred stencil.  On an
interval or rectangle it is diagonalised exactly by the type-I discrete sine
transform, which gives closed-form eigenpairs; the negative-order norms use
either an exact sparse solve (H^-1) or that spectral representation (H^-delta).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import scipy.fft
import scipy.sparse as sp
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid of interior nodes on ``(0, L_0) x ... x (0, L_{d-1})``.

    Parameters
    ----------
    dimension : int
        1 or 2.
    lengths : sequence of float
        Side lengths, one per axis.
    counts : sequence of int
        Interior node counts per axis, each at least 2.
    """

    dimension: int
    lengths: tuple[float, ...]
    counts: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(v) for v in np.atleast_1d(self.lengths)))
        object.__setattr__(self, "counts", tuple(int(v) for v in np.atleast_1d(self.counts)))
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if len(self.lengths) != self.dimension or len(self.counts) != self.dimension:
            raise ValueError("lengths and counts need one entry per axis")
        if any(not np.isfinite(L) or L <= 0 for L in self.lengths):
            raise ValueError(f"side lengths must be positive, got {self.lengths}")
        if any(n < 2 for n in self.counts):
            raise ValueError(f"counts must be at least 2 interior nodes per axis, got {self.counts}")

    @classmethod
    def interval(cls, length: float, count: int) -> "GridSpec":
        return cls(1, (length,), (count,))

    @classmethod
    def rectangle(cls, lengths: Sequence[float], counts: Sequence[int]) -> "GridSpec":
        return cls(2, tuple(lengths), tuple(counts))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(L / (n + 1) for L, n in zip(self.lengths, self.counts))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.counts

    @property
    def size(self) -> int:
        return int(np.prod(self.counts))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def signature(self) -> str:
        lengths = "x".join(repr(L) for L in self.lengths)
        counts = "x".join(str(n) for n in self.counts)
        return f"d{self.dimension}_L{lengths}_n{counts}"

    def axes(self, closed: bool = False) -> list[np.ndarray]:
        """Node coordinates per axis; ``closed`` adds the two boundary nodes."""
        out = []
        for L, n, h in zip(self.lengths, self.counts, self.spacing):
            k = np.arange(0, n + 2) if closed else np.arange(1, n + 1)
            out.append(k * h)
        return out

    def coordinates(self, closed: bool = False) -> tuple[np.ndarray, ...]:
        """Meshgrid coordinate arrays (``indexing='ij'``)."""
        return tuple(np.meshgrid(*self.axes(closed), indexing="ij"))

    def sample(self, func: Callable[..., np.ndarray]) -> np.ndarray:
        """Evaluate ``func(x)`` or ``func(x, y)`` on the interior nodes."""
        values = np.broadcast_to(func(*self.coordinates()), self.shape)
        return np.array(values, dtype=float).ravel()

    def boundary_mask(self) -> np.ndarray:
        """Boolean mask on the closed grid selecting boundary nodes."""
        mask = np.zeros(tuple(n + 2 for n in self.counts), dtype=bool)
        for ax in range(self.dimension):
            idx = [slice(None)] * self.dimension
            idx[ax] = 0
            mask[tuple(idx)] = True
            idx[ax] = -1
            mask[tuple(idx)] = True
        return mask

    def interior(self, closed_values: np.ndarray) -> np.ndarray:
        """Restrict closed-grid values to the interior field vector."""
        closed_values = np.asarray(closed_values, dtype=float)
        sl = tuple(slice(1, -1) for _ in range(self.dimension))
        return closed_values[sl].ravel()

    def check(self, f: np.ndarray, name: str = "field") -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if f.shape != (self.size,):
            raise ValueError(
                f"{name} has shape {f.shape}, grid {self.signature} expects ({self.size},)"
            )
        return f


def _second_difference(n: int, h: float) -> sp.csr_matrix:
    return sp.diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n), format="csr") / h**2


def _axis_eigenvalues(n: int, L: float) -> np.ndarray:
    k = np.arange(1, n + 1)
    h = L / (n + 1)
    return 4.0 / h**2 * np.sin(k * np.pi / (2 * (n + 1))) ** 2


@dataclass(frozen=True, eq=False)
class DiscreteOperators:
    """Dirichlet Laplacian on a grid, with a cached factorisation.

    ``eigenvalues`` holds the eigenvalues of ``-laplacian`` laid out on the grid
    shape, so that entry ``(j, k)`` belongs to the mode ``sin(j pi x/Lx) sin(k pi y/Ly)``.
    """

    grid: GridSpec
    laplacian: sp.csc_matrix
    eigenvalues: np.ndarray
    _lu: object = field(repr=False)

    def apply(self, f: np.ndarray) -> np.ndarray:
        return self.laplacian @ self.grid.check(f)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Return ``x`` with ``laplacian @ x == b``."""
        return self._lu.solve(self.grid.check(b, "rhs"))

    @property
    def lambda1(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def friedrichs_constant(self) -> float:
        return self.lambda1**-0.5

    def sorted_eigenvalues(self) -> np.ndarray:
        return np.sort(self.eigenvalues.ravel())

    def to_spectral(self, f: np.ndarray) -> np.ndarray:
        """L2 coefficients of ``f`` against the L2-orthonormal eigenfields (grid-shaped)."""
        f = self.grid.check(f).reshape(self.grid.shape)
        return np.sqrt(self.grid.cell_volume) * scipy.fft.dstn(f, type=1, norm="ortho")

    def from_spectral(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float).reshape(self.grid.shape)
        return scipy.fft.idstn(coeffs, type=1, norm="ortho").ravel() / np.sqrt(self.grid.cell_volume)

    def weighted_coefficients(self, fields: np.ndarray, delta: float) -> np.ndarray:
        """Rows of ``fields`` mapped to ``lambda_k^(-delta/2) c_k`` (flattened).

        The Euclidean norm of a returned row is the H^-delta norm of the input row.
        """
        fields = np.asarray(fields, dtype=float)
        batch = fields.reshape((-1,) + self.grid.shape)
        axes = tuple(range(1, self.grid.dimension + 1))
        c = np.sqrt(self.grid.cell_volume) * scipy.fft.dstn(batch, type=1, norm="ortho", axes=axes)
        c *= self.eigenvalues ** (-0.5 * delta)
        return c.reshape(len(batch), -1)

    def eigenfield(self, *mode: int) -> np.ndarray:
        """L2-normalised eigenfield for 1-based mode indices (one per axis)."""
        if len(mode) != self.grid.dimension:
            raise ValueError(f"need {self.grid.dimension} mode indices")
        c = np.zeros(self.grid.shape)
        c[tuple(k - 1 for k in mode)] = 1.0
        return self.from_spectral(c)

    def eigenvalue(self, *mode: int) -> float:
        return float(self.eigenvalues[tuple(k - 1 for k in mode)])


def build_operators(grid: GridSpec) -> DiscreteOperators:
    """Assemble the centred-difference Dirichlet Laplacian for ``grid``."""
    if grid.dimension == 1:
        (n,), (h,) = grid.counts, grid.spacing
        lap = _second_difference(n, h)
        eig = _axis_eigenvalues(n, grid.lengths[0])
    else:
        (nx, ny), (hx, hy) = grid.counts, grid.spacing
        lap = sp.kron(_second_difference(nx, hx), sp.identity(ny)) + sp.kron(
            sp.identity(nx), _second_difference(ny, hy)
        )
        ex = _axis_eigenvalues(nx, grid.lengths[0])
        ey = _axis_eigenvalues(ny, grid.lengths[1])
        eig = ex[:, None] + ey[None, :]
    lap = sp.csc_matrix(lap)
    eig.setflags(write=False)
    return DiscreteOperators(grid, lap, eig, spla.splu(lap))


def inner_l2(f: np.ndarray, g: np.ndarray, grid: GridSpec) -> float:
    """Midpoint-rule L2 inner product."""
    return grid.cell_volume * float(np.dot(grid.check(f), grid.check(g)))


def norm_l2(f: np.ndarray, grid: GridSpec) -> float:
    return float(np.sqrt(max(inner_l2(f, f, grid), 0.0)))


def inner_h1(f: np.ndarray, g: np.ndarray, ops: DiscreteOperators) -> float:
    return -inner_l2(f, ops.apply(g), ops.grid)


def norm_h1(f: np.ndarray, ops: DiscreteOperators) -> float:
    """Discrete ``||grad f||``."""
    return float(np.sqrt(max(inner_h1(f, f, ops), 0.0)))


def inner_hm1(f: np.ndarray, g: np.ndarray, ops: DiscreteOperators) -> float:
    # (Lap^-1 f, Lap^-1 g)_1 = -(Lap^-1 f, g)
    return -inner_l2(ops.solve(f), g, ops.grid)


def norm_hm1(f: np.ndarray, ops: DiscreteOperators) -> float:
    """``||Lap^-1 f||_1`` via an exact sparse solve."""
    return norm_h1(ops.solve(f), ops)


def norm_hmdelta(f: np.ndarray, ops: DiscreteOperators, delta: float) -> float:
    """Spectral H^-delta norm, ``(sum_k lambda_k^-delta c_k^2)^(1/2)``, for ``0 < delta <= 1``."""
    if not 0.0 < delta <= 1.0:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    c = ops.to_spectral(f)
    return float(np.sqrt(np.sum(ops.eigenvalues ** (-delta) * c**2)))


def frechet_prenorm(interval_sups: Sequence[float]) -> tuple[float, float]:
    """Truncated Frechet pre-norm on ``C([0, inf); E)``.

    ``interval_sups[i-1]`` is the sup norm of the curve over ``[0, i]``.
    Returns the partial sum and the bound ``2**-I`` on the omitted tail.
    """
    a = np.asarray(interval_sups, dtype=float)
    if a.ndim != 1:
        raise ValueError("interval sups must be a 1-D sequence")
    if np.any(a < 0) or not np.all(np.isfinite(a)):
        raise ValueError("interval sups must be finite and nonnegative")
    if np.any(np.diff(a) < 0):
        raise ValueError("interval sups must be nondecreasing in the interval length")
    i = np.arange(1, a.size + 1)
    return float(np.sum(2.0**-i * a / (1.0 + a))), float(2.0 ** -a.size)
