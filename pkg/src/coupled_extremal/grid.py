"""Periodic grids on the flat unit torus and the spectral calculus on them.

A grid of complex dimension ``ndim`` samples the real torus ``(R/Z)^(2*ndim)``
with ``N`` points per real axis.  Axes are ordered ``(x1, y1, x2, y2, ...)``
with ``z_k = x_k + i*y_k``.  The reference measure is Lebesgue measure, so
every quadrature weight equals ``h**(2*ndim)`` and the total volume is one.

Derivatives are spectral.  The Laplacian keeps the Nyquist mode (symbol
``-4*pi^2*|k|^2``); first derivatives zero it, and the complex Hessian is
built from products of first-derivative symbols so that discrete Parseval
identities hold exactly.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import ExponentClampWarning, MeanNotZero

EXP_CLAMP = 40.0


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``resolution`` samples per real axis."""

    ndim: int
    resolution: int

    def __post_init__(self):
        if self.ndim not in (1, 2):
            raise ValueError(f"ndim must be 1 or 2, got {self.ndim}")
        if self.resolution < 8 or self.resolution % 2:
            raise ValueError(f"resolution must be even and >= 8, got {self.resolution}")

    @property
    def spacing(self) -> float:
        return 1.0 / self.resolution

    @property
    def real_dim(self) -> int:
        return 2 * self.ndim

    @property
    def shape(self) -> tuple:
        return (self.resolution,) * self.real_dim

    @property
    def size(self) -> int:
        return self.resolution**self.real_dim

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.real_dim

    @cached_property
    def coordinates(self) -> tuple:
        x = np.arange(self.resolution) * self.spacing
        return tuple(np.meshgrid(*([x] * self.real_dim), indexing="ij"))

    @cached_property
    def _wavenumbers(self) -> tuple:
        # rfft layout: full frequencies on leading axes, half on the last one
        n = self.resolution
        full = np.fft.fftfreq(n, 1.0 / n)
        half = np.fft.rfftfreq(n, 1.0 / n)
        axes = [full] * (self.real_dim - 1) + [half]
        return tuple(np.meshgrid(*axes, indexing="ij", sparse=True))

    @cached_property
    def laplacian_symbol(self) -> np.ndarray:
        return -4.0 * np.pi**2 * sum(k**2 for k in self._wavenumbers)

    @cached_property
    def derivative_symbols(self) -> tuple:
        """Symbols ``2*pi*i*k`` of d/dx_a with the Nyquist mode zeroed."""
        nyq = self.resolution // 2
        out = []
        for k in self._wavenumbers:
            kk = np.where(np.abs(k) == nyq, 0.0, k)
            out.append(2j * np.pi * kk)
        return tuple(out)

    def fft(self, values: np.ndarray) -> np.ndarray:
        return np.fft.rfftn(values)

    def ifft(self, coeffs: np.ndarray) -> np.ndarray:
        return np.fft.irfftn(coeffs, s=self.shape, axes=tuple(range(self.real_dim)))

    def field(self, values) -> "ScalarField":
        return ScalarField(self, values)

    def constant(self, c: float) -> "ScalarField":
        return ScalarField(self, np.full(self.shape, float(c)))

    def zeros(self) -> "ScalarField":
        return self.constant(0.0)

    def cosine_series(self, terms, constant: float = 0.0) -> "ScalarField":
        """Field ``constant + sum amp * cos(2*pi*(k . x))`` over ``terms``.

        ``terms`` is an iterable of ``(wavevector, amplitude)`` with one
        integer wavenumber per real axis.
        """
        vals = np.full(self.shape, float(constant))
        for k, amp in terms:
            k = tuple(int(v) for v in k)
            if len(k) != self.real_dim:
                raise ValueError(f"wavevector {k} needs {self.real_dim} components")
            phase = sum(ki * xi for ki, xi in zip(k, self.coordinates))
            vals = vals + float(amp) * np.cos(2.0 * np.pi * phase)
        return ScalarField(self, vals)


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Real field sampled on every point of a :class:`Grid`.

    Values are stored read-only; arithmetic returns new fields.
    """

    grid: Grid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != self.grid.shape:
            if vals.size != self.grid.size:
                raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
            vals = vals.reshape(self.grid.shape)
        if not np.all(np.isfinite(vals)):
            raise ValueError("field values must be finite")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)

    def _coerce(self, other):
        if isinstance(other, ScalarField):
            if other.grid != self.grid:
                raise ValueError("fields live on different grids")
            return other.values
        return other

    def __add__(self, other):
        return ScalarField(self.grid, self.values + self._coerce(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - self._coerce(other))

    def __rsub__(self, other):
        return ScalarField(self.grid, self._coerce(other) - self.values)

    def __mul__(self, other):
        return ScalarField(self.grid, self.values * self._coerce(other))

    __rmul__ = __mul__

    def __truediv__(self, other):
        return ScalarField(self.grid, self.values / self._coerce(other))

    def __neg__(self):
        return ScalarField(self.grid, -self.values)

    def mean(self) -> float:
        return integrate(self)

    def sup(self) -> float:
        return float(self.values.max())

    def inf(self) -> float:
        return float(self.values.min())

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())


def integrate(f: ScalarField) -> float:
    """Integral against the unit-volume reference measure."""
    return float(f.values.sum() * f.grid.cell_volume)


def laplacian(f: ScalarField) -> ScalarField:
    """Spectral Laplacian; the result has zero mean up to round-off."""
    g = f.grid
    coeffs = g.fft(f.values) * g.laplacian_symbol
    return ScalarField(g, g.ifft(coeffs))


def poisson_solve(rhs: ScalarField, tol_mean: float = 1e-10) -> ScalarField:
    """Mean-zero ``u`` with ``laplacian(u) = rhs - mean(rhs)``.

    Raises :class:`MeanNotZero` when ``|mean(rhs)| > tol_mean``.
    """
    m = integrate(rhs)
    if abs(m) > tol_mean:
        raise MeanNotZero(m, tol_mean)
    g = rhs.grid
    sym = g.laplacian_symbol.copy()
    sym.flat[0] = 1.0
    coeffs = g.fft(rhs.values) / sym
    coeffs.flat[0] = 0.0
    return ScalarField(g, g.ifft(coeffs))


def gradient(f: ScalarField) -> list:
    """Spectral partial derivatives along each real axis."""
    g = f.grid
    coeffs = g.fft(f.values)
    return [ScalarField(g, g.ifft(coeffs * d)) for d in g.derivative_symbols]


def gradient_sup(f: ScalarField) -> float:
    """Sup over the grid of the Euclidean norm of the spectral gradient."""
    sq = sum(d.values**2 for d in gradient(f))
    return float(np.sqrt(sq.max()))


def complex_hessian(f: ScalarField) -> np.ndarray:
    """Complex Hessian ``H_kl = 4 d^2 f / dz_k dzbar_l`` as an array.

    Shape ``(ndim, ndim) + grid.shape``; Hermitian at each point.  With this
    normalization ``trace(H)`` is the real Laplacian.
    """
    g = f.grid
    coeffs = g.fft(f.values)
    d = g.derivative_symbols

    def second(a, b):
        return g.ifft(coeffs * d[a] * d[b])

    n = g.ndim
    H = np.empty((n, n) + g.shape, dtype=complex)
    for k in range(n):
        for l in range(k, n):
            xk, yk, xl, yl = 2 * k, 2 * k + 1, 2 * l, 2 * l + 1
            re = second(xk, xl) + second(yk, yl)
            im = second(xk, yl) - second(yk, xl)
            H[k, l] = re + 1j * im
            H[l, k] = re - 1j * im
    return H


def sup_norm(f: ScalarField) -> float:
    return f.sup_norm()


def sup(f: ScalarField) -> float:
    return f.sup()


def add(f: ScalarField, g: ScalarField) -> ScalarField:
    return f + g


def scale(c: float, f: ScalarField) -> ScalarField:
    return f * float(c)


def maximum(f: ScalarField, g: ScalarField) -> ScalarField:
    return ScalarField(f.grid, np.maximum(f.values, f._coerce(g)))


def clamped_exp(x: np.ndarray, limit: float = EXP_CLAMP):
    """``exp(min(x, limit))`` and whether the clamp was active."""
    clamped = bool(np.any(x > limit))
    return np.exp(np.minimum(x, limit)), clamped


def exp(f: ScalarField, limit: float = EXP_CLAMP):
    """Pointwise exponential with the overflow guard.

    Returns ``(field, clamped)``; a :class:`ExponentClampWarning` is issued
    when any exponent exceeded ``limit``.
    """
    vals, clamped = clamped_exp(f.values, limit)
    if clamped:
        warnings.warn(f"exponent clamped at {limit}", ExponentClampWarning, stacklevel=2)
    return ScalarField(f.grid, vals), clamped


def log_mean_exp(x: np.ndarray, cell_volume: float) -> float:
    """``log(integral of exp(x))`` with the max-shift for stability."""
    top = float(x.max())
    return top + float(np.log(np.exp(x - top).sum() * cell_volume))


def spectral_support(f: ScalarField, rel_tol: float = 1e-12) -> int:
    """Largest per-axis |wavenumber| carrying a non-negligible coefficient."""
    g = f.grid
    coeffs = np.abs(g.fft(f.values))
    cutoff = rel_tol * max(coeffs.max(), 1e-300)
    mask = coeffs > cutoff
    if not mask.any():
        return 0
    kmax = 0
    for k in g._wavenumbers:
        kk = np.broadcast_to(np.abs(k), mask.shape)
        kmax = max(kmax, int(kk[mask].max()))
    return kmax


def random_band_limited(grid: Grid, rng: np.random.Generator, kmax: int | None = None,
                        amplitude: float = 1.0) -> ScalarField:
    """Seeded Gaussian random trigonometric field with frequencies <= ``kmax``.

    ``kmax`` defaults to ``N // 8``.  The mean is removed and the result
    scaled to sup-norm ``amplitude``.
    """
    if kmax is None:
        kmax = grid.resolution // 8
    shape = grid.fft(np.zeros(grid.shape)).shape
    coeffs = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    mask = np.ones(shape, dtype=bool)
    for k in grid._wavenumbers:
        mask &= np.abs(k) <= kmax
    decay = 1.0 / (1.0 + sum(k**2 for k in grid._wavenumbers))
    coeffs = np.where(mask, coeffs * decay, 0.0)
    coeffs.flat[0] = 0.0
    vals = grid.ifft(coeffs)
    top = np.abs(vals).max()
    if top == 0.0:
        return grid.zeros()
    return ScalarField(grid, vals * (amplitude / top))
