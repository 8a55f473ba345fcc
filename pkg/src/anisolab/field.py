"""Scalar and vector fields stored as normalized Fourier coefficients.

Fields are value objects: operations return new instances and never
mutate coefficient arrays in place.  Construction from real samples goes
through Grid.forward, so Hermitian symmetry holds by construction;
spectral operations only ever apply real multipliers or linear
combinations, which preserve it.
"""

from __future__ import annotations

import numpy as np

from .grid import Grid

__all__ = [
    "ScalarField",
    "VectorField",
    "from_values",
    "from_function",
    "derivative",
    "gradient",
    "gradient_h",
    "divergence",
    "divergence_h",
    "curl_h",
    "dealiased_product",
    "translate",
    "random_band_limited",
    "random_band_limited_vector",
]


class ScalarField:
    __slots__ = ("grid", "coef")

    def __init__(self, grid: Grid, coef: np.ndarray):
        if coef.shape != grid.shape:
            raise ValueError(f"coef shape {coef.shape} != grid {grid.shape}")
        self.grid = grid
        self.coef = np.ascontiguousarray(coef, dtype=np.complex128)

    def values(self) -> np.ndarray:
        return self.grid.inverse(self.coef)

    def copy(self) -> "ScalarField":
        return ScalarField(self.grid, self.coef.copy())

    def l2(self) -> float:
        """||f||_{L^2} with the box quadrature weight."""
        return float(np.sqrt(self.grid.vol * np.sum(np.abs(self.coef) ** 2)))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values())))

    def lp(self, p: float) -> float:
        if p == np.inf:
            return self.linf()
        v = np.abs(self.values()) ** p
        return float((self.grid.dV * v.sum()) ** (1.0 / p))

    def mean(self) -> float:
        return float(self.coef.flat[0].real)

    def dealiased(self) -> "ScalarField":
        return ScalarField(self.grid, self.coef * self.grid.dealias_mask)

    def __add__(self, other):
        self._check(other)
        return ScalarField(self.grid, self.coef + other.coef)

    def __sub__(self, other):
        self._check(other)
        return ScalarField(self.grid, self.coef - other.coef)

    def __mul__(self, a):
        if isinstance(a, ScalarField):
            raise TypeError("use dealiased_product for field products")
        return ScalarField(self.grid, self.coef * a)

    __rmul__ = __mul__

    def __neg__(self):
        return ScalarField(self.grid, -self.coef)

    def _check(self, other):
        if not self.grid.compatible(other.grid):
            raise ValueError("fields live on different grids")


class VectorField:
    """Tuple of scalar components on one grid (2 or 3 components)."""

    __slots__ = ("grid", "components")

    def __init__(self, components):
        components = tuple(components)
        if len(components) not in (2, 3):
            raise ValueError("vector fields have 2 or 3 components")
        g = components[0].grid
        for c in components[1:]:
            if not g.compatible(c.grid):
                raise ValueError("components live on different grids")
        self.grid = g
        self.components = components

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def __iter__(self):
        return iter(self.components)

    def copy(self):
        return VectorField(tuple(c.copy() for c in self.components))

    def l2(self) -> float:
        return float(np.sqrt(sum(c.l2() ** 2 for c in self.components)))

    def linf(self) -> float:
        """Pointwise-magnitude sup norm."""
        mag_sq = sum(c.values() ** 2 for c in self.components)
        return float(np.sqrt(mag_sq.max()))

    def values(self):
        return tuple(c.values() for c in self.components)

    def __add__(self, other):
        return VectorField(tuple(a + b for a, b in zip(self, other)))

    def __sub__(self, other):
        return VectorField(tuple(a - b for a, b in zip(self, other)))

    def __mul__(self, a):
        return VectorField(tuple(c * a for c in self.components))

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(tuple(-c for c in self.components))


def from_values(grid: Grid, values: np.ndarray) -> ScalarField:
    return ScalarField(grid, grid.forward(np.asarray(values, dtype=np.float64)))

def from_function(grid: Grid, fn) -> ScalarField:
    x1, x2, x3 = grid.meshgrid()
    return from_values(grid, fn(x1, x2, x3))


def derivative(f: ScalarField, axis: int, order: int = 1) -> ScalarField:
    """Spectral partial derivative along axis in {0, 1, 2}."""
    g = f.grid
    xi = (g.xi1, g.xi2, g.xi3)[axis]
    return ScalarField(g, f.coef * (1j * xi) ** order)


def gradient(f: ScalarField) -> VectorField:
    return VectorField(tuple(derivative(f, a) for a in range(3)))


def gradient_h(f: ScalarField) -> VectorField:
    return VectorField((derivative(f, 0), derivative(f, 1)))


def divergence(u: VectorField) -> ScalarField:
    if len(u) != 3:
        raise ValueError("divergence expects a 3-component field")
    return derivative(u[0], 0) + derivative(u[1], 1) + derivative(u[2], 2)


def divergence_h(uh: VectorField) -> ScalarField:
    return derivative(uh[0], 0) + derivative(uh[1], 1)


def curl_h(uh: VectorField) -> ScalarField:
    """curl_h u = d1 u^2 - d2 u^1 (works for 2- or 3-component input)."""
    return derivative(uh[1], 0) - derivative(uh[0], 1)


def dealiased_product(f: ScalarField, g: ScalarField) -> ScalarField:
    """Pointwise product with 2/3-rule truncation.

    Exact (to roundoff) for inputs already supported inside the dealias
    mask; see the grid module docstring for the aliasing argument.
    """
    f._check(g)
    grid = f.grid
    prod = grid.inverse(f.coef) * grid.inverse(g.coef)
    return ScalarField(grid, grid.forward(prod) * grid.dealias_mask)


def translate(f: ScalarField, shift) -> ScalarField:
    """Translate f(x) -> f(x - shift); shift need not be a grid multiple."""
    g = f.grid
    phase = np.exp(
        -1j * (g.xi1 * shift[0] + g.xi2 * shift[1] + g.xi3 * shift[2])
    )
    return ScalarField(g, f.coef * phase)


def random_band_limited(
    grid: Grid,
    rng: np.random.Generator,
    spectrum=None,
    dealias: bool = True,
) -> ScalarField:
    """White noise shaped by a real spectral envelope.

    spectrum(grid) may return a broadcastable nonnegative multiplier; by
    default a smooth isotropic bell keeps the field comfortably inside
    the dealias region.  Hermitian symmetry comes from starting in
    physical space.
    """
    noise = rng.standard_normal(grid.shape)
    c = grid.forward(noise)
    if spectrum is None:
        keep = min(
            k * 2.0 * np.pi / L for k, L in zip(grid.dealias_keep, grid.box)
        )
        env = np.exp(-(grid.xi_sq) / (0.3 * keep) ** 2)
    else:
        env = spectrum(grid)
    c = c * env
    f = ScalarField(grid, c)
    if dealias:
        f = f.dealiased()
    n = f.l2()
    if n > 0:
        f = f * (1.0 / n)
    return f


def random_band_limited_vector(
    grid: Grid,
    rng: np.random.Generator,
    ncomp: int = 3,
    spectrum=None,
) -> VectorField:
    return VectorField(
        tuple(random_band_limited(grid, rng, spectrum) for _ in range(ncomp))
    )
