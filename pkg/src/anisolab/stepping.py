"""Integrating-factor time stepping for the coupled velocity systems.

Four systems march on one grid (w is the planar velocity, two components
and no vertical part; g the linear corrector; v the remainder):

  full      d_t u + div(u (x) u)                  = Lap u - grad p
  planar    d_t w + div_h(w (x) w)                = Lap w - grad_h pb
  corrector d_t g + div_h(w g)                    = Lap g - grad pt
  remainder d_t v + div((v+g) (x) u) + div_h(w v) = Lap v - grad q - (0,0,d3 pb)

with u, g, v divergence-free in 3-D and w horizontally divergence-free.
Advection is written in divergence form, which equals the convective
form for divergence-free advecting fields and makes the spatial energy
identity exact: with dealiased products, <y, div(a (x) y)> vanishes to
roundoff, so the only energy error is the time discretization.

The four right sides sum, mode by mode, to the full system's right side
whenever (w, 0) + g + v recomposes u exactly, so the recomposition
residual measures pure time-discretization error.  To keep that error
honest (rather than cancelling it by stepping one monolithic system),
the coupled stepper advances the systems sequentially and feeds each one
cubic Hermite interpolants of its driver fields at the Runge-Kutta stage
times; the interpolant midpoint error matches the scheme order, so the
residual decreases like dt^4.

Diffusion is exact: every stage multiplies by exp(-|xi|^2 dt'), so pure
heat decay carries no time-stepping error at any dt, and stiffness never
limits the step.  The only step restriction is advective (CFL).

Internally a step runs on the real-FFT half spectrum (the fields are
real, so the full spectrum is redundant); accepted states are expanded
back to the canonical full-complex containers on the way out.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.fft as _sfft

from .field import ScalarField, VectorField
from .grid import Grid, fft_workers
from .project import assert_divergence_free, helmholtz_h, horizontal_mean_part
from .families import tilde_u0

__all__ = [
    "StepperConfig",
    "SolverState",
    "BlowUpError",
    "StepRejectedError",
    "PressureSplitError",
    "initial_state",
    "zero_vector",
    "step_ns",
    "step_bar",
    "step_tilde",
    "step_v",
    "recompose_check",
    "v_gap",
    "pressure_ns",
    "CoupledStepper",
    "RunInfo",
    "run_coupled",
]

DIV_STEP_TOL = 1e-10
PRESSURE_SPLIT_TOL = 1e-9
BLOWUP_FACTOR = 1e6


class BlowUpError(RuntimeError):
    """Run left the trusted regime (NaN or explosive amplitude growth).

    Carries the last valid state so callers can dump it.
    """

    def __init__(self, message: str, state: "SolverState"):
        super().__init__(message)
        self.state = state


class StepRejectedError(RuntimeError):
    """CFL halving exhausted the retry budget."""


class PressureSplitError(RuntimeError):
    """Corrector pressure disagrees with its two-part elliptic split.

    This identity is exact for dealiased products, so a violation means
    the discretization itself is inconsistent, not that dt is too large.
    """


@dataclass(frozen=True)
class StepperConfig:
    dt: float
    end_time: float
    scheme: str = "ifrk4"
    cfl_safety: float = 0.4
    max_halvings: int = 20
    div_tol: float = DIV_STEP_TOL
    pressure_split_tol: float = PRESSURE_SPLIT_TOL
    blowup_factor: float = BLOWUP_FACTOR
    check_pressure_split: bool = True

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.end_time <= 0:
            raise ValueError(f"end_time must be positive, got {self.end_time}")
        if self.scheme != "ifrk4":
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.cfl_safety <= 1:
            raise ValueError("cfl_safety must lie in (0, 1]")


@dataclass
class SolverState:
    """Clock plus the four velocity blocks and their diagnosed pressures.

    Pressures are byproducts of the projections (None before the first
    step); velocities are authoritative.
    """

    t: float
    u: VectorField
    ubar_h: VectorField
    utilde: VectorField
    v: VectorField
    pbar: ScalarField | None = None
    ptilde: ScalarField | None = None
    ptilde_1: ScalarField | None = None
    ptilde_2: ScalarField | None = None
    q: ScalarField | None = None

    @property
    def grid(self) -> Grid:
        return self.u.grid

    def recomposed(self) -> VectorField:
        """(planar, 0) + corrector + remainder as a 3-component field."""
        zero = ScalarField(self.grid, np.zeros(self.grid.shape, complex))
        bar3 = VectorField((self.ubar_h[0], self.ubar_h[1], zero))
        return bar3 + self.utilde + self.v

    def v_by_subtraction(self) -> VectorField:
        zero = ScalarField(self.grid, np.zeros(self.grid.shape, complex))
        bar3 = VectorField((self.ubar_h[0], self.ubar_h[1], zero))
        return self.u - bar3 - self.utilde

    def check_divergence(self, tol: float = DIV_STEP_TOL):
        assert_divergence_free(self.u, tol, "full velocity")
        assert_divergence_free(self.ubar_h, tol, "planar velocity")
        assert_divergence_free(self.utilde, tol, "corrector")
        assert_divergence_free(self.v, tol, "remainder")


def zero_vector(grid: Grid, n: int = 3) -> VectorField:
    return VectorField(
        tuple(ScalarField(grid, np.zeros(grid.shape, complex)) for _ in range(n))
    )


def initial_state(u0: VectorField, tol: float = 1e-10) -> SolverState:
    """Split initial data into the planar / corrector / remainder blocks.

    The planar block takes the horizontal Biot-Savart part of u0^h; the
    corrector takes the gradient part plus u0^3.  On the periodic box the
    per-plane horizontal means of u0^h (absent on the whole space) carry
    no Biot-Savart content; they are folded into the corrector so the
    decomposition is exact at t = 0.  The remainder starts at zero.
    """
    if len(u0) != 3:
        raise ValueError("initial_state expects a 3-component field")
    assert_divergence_free(u0, tol, "initial data")
    uh = VectorField((u0[0], u0[1]))
    curl_part, _ = helmholtz_h(uh)
    tilde = tilde_u0(u0, tol=tol)
    mean_line = horizontal_mean_part(uh)
    tilde = VectorField(
        (tilde[0] + mean_line[0], tilde[1] + mean_line[1], tilde[2])
    )
    return SolverState(
        t=0.0,
        u=u0.copy(),
        ubar_h=curl_part,
        utilde=tilde,
        v=zero_vector(u0.grid),
    )


# ---------------------------------------------------------------------------
# half-spectrum workspace

class _SpecOps:
    """Real-FFT workspace: wavenumbers, masks and transforms restricted
    to the non-redundant half of the spectrum."""

    def __init__(self, grid: Grid):
        n1, n2, n3 = grid.shape
        self.grid = grid
        self.nh = n3 // 2 + 1
        self.xi = (grid.xi1, grid.xi2, grid.xi3[..., : self.nh])
        self.xi_sq = grid.xi_sq[..., : self.nh]
        self.mask = grid.dealias_mask[..., : self.nh]
        self.inv3 = np.zeros_like(self.xi_sq)
        np.divide(1.0, self.xi_sq, out=self.inv3, where=self.xi_sq != 0)
        self.invh = np.zeros_like(grid.xi_h_sq)
        np.divide(1.0, grid.xi_h_sq, out=self.invh, where=grid.xi_h_sq != 0)
        self._flip1 = (-np.arange(n1)) % n1
        self._flip2 = (-np.arange(n2)) % n2
        self._tail_src = n3 - np.arange(self.nh, n3)

    def r2c(self, w: np.ndarray) -> np.ndarray:
        return _sfft.rfftn(w, workers=fft_workers()) / self.grid.ntot

    def c2r(self, H: np.ndarray) -> np.ndarray:
        return _sfft.irfftn(
            H * self.grid.ntot, s=self.grid.shape, workers=fft_workers()
        )

    def half(self, coef: np.ndarray) -> np.ndarray:
        return np.ascontiguousarray(coef[..., : self.nh])

    def full(self, H: np.ndarray) -> np.ndarray:
        """Expand a half-spectrum array to the full grid via conjugate
        symmetry (the inverse of `half` for spectra of real fields)."""
        out = np.empty(self.grid.shape, complex)
        out[..., : self.nh] = H
        out[..., self.nh :] = np.conj(
            H[np.ix_(self._flip1, self._flip2, self._tail_src)]
        )
        return out

    def half_stack(self, u: VectorField) -> np.ndarray:
        return np.stack([self.half(c.coef) for c in u])

    def full_vector(self, A: np.ndarray) -> VectorField:
        return VectorField(
            tuple(
                ScalarField(self.grid, self.full(A[i]))
                for i in range(A.shape[0])
            )
        )

    def phys(self, C: np.ndarray) -> list:
        return [self.c2r(C[i]) for i in range(C.shape[0])]


@lru_cache(maxsize=4)
def _ops_for(grid: Grid) -> _SpecOps:
    return _SpecOps(grid)


# ---------------------------------------------------------------------------
# right-hand sides (divergence-form advection, dealiased, projected)

def _rhs_full(ops: _SpecOps, U: np.ndarray) -> np.ndarray:
    """-P div(u (x) u) from the half-spectrum stack U (3, ...)."""
    w = ops.phys(U)
    prod = {}
    for m in range(3):
        for j in range(m, 3):
            prod[m, j] = ops.r2c(w[m] * w[j]) * ops.mask
    xi = ops.xi
    A = np.empty_like(U)
    for j in range(3):
        s = 0.0
        for m in range(3):
            s = s + (1j * xi[m]) * prod[min(m, j), max(m, j)]
        A[j] = s
    s = (xi[0] * A[0] + xi[1] * A[1] + xi[2] * A[2]) * ops.inv3
    for j in range(3):
        A[j] -= xi[j] * s
    return -A


def _rhs_bar(ops: _SpecOps, B: np.ndarray):
    """-P_h div_h(w (x) w); returns (F, pbar_hat, w_physical)."""
    wb = ops.phys(B)
    p11 = ops.r2c(wb[0] * wb[0]) * ops.mask
    p12 = ops.r2c(wb[0] * wb[1]) * ops.mask
    p22 = ops.r2c(wb[1] * wb[1]) * ops.mask
    xi1, xi2 = ops.xi[0], ops.xi[1]
    A = np.empty_like(B)
    A[0] = (1j * xi1) * p11 + (1j * xi2) * p12
    A[1] = (1j * xi1) * p12 + (1j * xi2) * p22
    s = (xi1 * A[0] + xi2 * A[1]) * ops.invh
    pbar_hat = 1j * s
    A[0] -= xi1 * s
    A[1] -= xi2 * s
    return -A, pbar_hat, wb


def _rhs_tilde(ops: _SpecOps, G: np.ndarray, wb: list):
    """-P div_h(w g) for the corrector stack G; returns (F, ptilde_hat)."""
    wg = ops.phys(G)
    xi = ops.xi
    A = np.empty_like(G)
    for j in range(3):
        q1 = ops.r2c(wb[0] * wg[j]) * ops.mask
        q2 = ops.r2c(wb[1] * wg[j]) * ops.mask
        A[j] = (1j * xi[0]) * q1 + (1j * xi[1]) * q2
    s = (xi[0] * A[0] + xi[1] * A[1] + xi[2] * A[2]) * ops.inv3
    ptilde_hat = 1j * s
    for j in range(3):
        A[j] -= xi[j] * s
    return -A, ptilde_hat


class _DriverEval:
    """Physical samples and planar pressure of the driver fields at one
    stage time, shared by the corrector and remainder right sides."""

    __slots__ = ("wu", "wg", "wb", "pbar_hat")

    def __init__(self, ops, U, G, B, wb=None, pbar_hat=None):
        self.wu = ops.phys(U)
        self.wg = ops.phys(G)
        self.wb = wb if wb is not None else ops.phys(B)
        if pbar_hat is None:
            p11 = ops.r2c(self.wb[0] * self.wb[0]) * ops.mask
            p12 = ops.r2c(self.wb[0] * self.wb[1]) * ops.mask
            p22 = ops.r2c(self.wb[1] * self.wb[1]) * ops.mask
            xi1, xi2 = ops.xi[0], ops.xi[1]
            dd = xi1 * xi1 * p11 + 2.0 * (xi1 * xi2) * p12 + xi2 * xi2 * p22
            pbar_hat = -dd * ops.invh
        self.pbar_hat = pbar_hat

    def speed(self) -> float:
        mag_sq = self.wu[0] ** 2 + self.wu[1] ** 2 + self.wu[2] ** 2
        return float(np.sqrt(mag_sq.max()))


def _rhs_v(ops: _SpecOps, V: np.ndarray, drv: _DriverEval):
    """Remainder right side -P(div((v+g)(x)u) + div_h(w v) + (0,0,d3 pb)).

    Returns (F, q_hat)."""
    wv = ops.phys(V)
    adv = [wv[m] + drv.wg[m] for m in range(3)]
    xi = ops.xi
    A = np.empty_like(V)
    for j in range(3):
        s = 0.0
        for m in range(3):
            s = s + (1j * xi[m]) * (ops.r2c(adv[m] * drv.wu[j]) * ops.mask)
        for m in range(2):
            s = s + (1j * xi[m]) * (ops.r2c(drv.wb[m] * wv[j]) * ops.mask)
        A[j] = s
    A[2] += (1j * xi[2]) * drv.pbar_hat
    s = (xi[0] * A[0] + xi[1] * A[1] + xi[2] * A[2]) * ops.inv3
    q_hat = 1j * s
    for j in range(3):
        A[j] -= xi[j] * s
    return -A, q_hat


def _tilde_pressure_split(ops: _SpecOps, B, bundle):
    """ptilde_1 from the horizontal advection of the planar field,
    ptilde_2 from its vertical shear, each by its own Poisson solve."""
    xi = ops.xi
    wg = bundle.wg
    d_bar = {
        (m, i): ops.c2r((1j * xi[m]) * B[i])
        for m in range(3) for i in range(2)
    }
    div1 = 0.0
    div2 = 0.0
    for i in range(2):
        v1 = wg[0] * d_bar[0, i] + wg[1] * d_bar[1, i]
        v2 = wg[2] * d_bar[2, i]
        div1 = div1 + (1j * xi[i]) * (ops.r2c(v1) * ops.mask)
        div2 = div2 + (1j * xi[i]) * (ops.r2c(v2) * ops.mask)
    return div1 * ops.inv3, div2 * ops.inv3


def pressure_ns(u: VectorField) -> ScalarField:
    """Diagnosed full-system pressure, (-Lap)^{-1} div div(u (x) u)."""
    grid = u.grid
    ops = _ops_for(grid)
    U = ops.half_stack(u)
    w = ops.phys(U)
    dd = 0.0
    for m in range(3):
        for j in range(m, 3):
            p = ops.r2c(w[m] * w[j]) * ops.mask
            fac = 1.0 if m == j else 2.0
            dd = dd + fac * (ops.xi[m] * ops.xi[j]) * p
    # -Lap p = div div(u (x) u) = -sum xi_m xi_j (u^m u^j)^
    return ScalarField(grid, ops.full(-dd * ops.inv3))


# ---------------------------------------------------------------------------
# integrating-factor RK4 machinery

def _if_rk4(E1, E2, h, y0, rhs_0, rhs_mid, rhs_end, k1=None):
    """One classical RK4 step in the exp(-|xi|^2 t) gauge.

    rhs_* are callables taking a coefficient stack; the three slots let
    the caller bind time-dependent drivers at the stage times.
    """
    if k1 is None:
        k1 = rhs_0(y0)
    a = E1 * (y0 + (0.5 * h) * k1)
    k2 = rhs_mid(a)
    b = E1 * y0 + (0.5 * h) * k2
    k3 = rhs_mid(b)
    c = E2 * y0 + h * (E1 * k3)
    k4 = rhs_end(c)
    return E2 * y0 + (h / 6.0) * (E2 * k1 + 2.0 * E1 * (k2 + k3) + k4), k1


def _hermite_mid(c0, c1, d0, d1, h):
    # cubic Hermite interpolant evaluated at the interval midpoint
    return 0.5 * (c0 + c1) + (h / 8.0) * (d0 - d1)


@dataclass
class RunInfo:
    steps: int = 0
    cfl_rejections: int = 0
    dt_history: list = dc_field(default_factory=list)
    blew_up: bool = False
    message: str = ""


class CoupledStepper:
    """Advances all four systems across one step, Hermite-coupling the
    drivers at stage times.  Stateful: caches the accepted endpoint right
    sides so each system pays three fresh evaluations per step."""

    def __init__(self, state: SolverState, cfg: StepperConfig):
        self.cfg = cfg
        self.grid = state.grid
        self.ops = _ops_for(state.grid)
        self.dx = min(L / n for L, n in zip(self.grid.box, self.grid.shape))
        self.info = RunInfo()
        self._exp_cache = {}
        self._cache_state = None
        self._cache = None
        ops = self.ops
        bundle = _DriverEval(
            ops, ops.half_stack(state.u), ops.half_stack(state.utilde),
            ops.half_stack(state.ubar_h),
        )
        self._initial_linf = bundle.speed()

    def _exps(self, h: float):
        pair = self._exp_cache.get(h)
        if pair is None:
            E1 = np.exp(-self.ops.xi_sq * (0.5 * h))
            pair = (E1, E1 * E1)
            self._exp_cache[h] = pair
            if len(self._exp_cache) > 8:
                self._exp_cache.pop(next(iter(self._exp_cache)))
        return pair

    def advance(self, state: SolverState) -> SolverState:
        cfg, grid, ops = self.cfg, self.grid, self.ops
        U0, B0 = ops.half_stack(state.u), ops.half_stack(state.ubar_h)
        G0, V0 = ops.half_stack(state.utilde), ops.half_stack(state.v)

        cached = self._cache if self._cache_state is state else None
        if cached is None:
            bundle0 = _DriverEval(ops, U0, G0, B0)
            FU0 = _rhs_full(ops, U0)
            FB0, _, _ = _rhs_bar(ops, B0)
            FG0, _ = _rhs_tilde(ops, G0, bundle0.wb)
            FV0, _ = _rhs_v(ops, V0, bundle0)
        else:
            bundle0 = cached["bundle"]
            FU0, FB0 = cached["FU"], cached["FB"]
            FG0, FV0 = cached["FG"], cached["FV"]

        h = min(cfg.dt, cfg.end_time - state.t)
        if h <= 0:
            return state
        speed = bundle0.speed()
        if speed > 1e-14:
            dt_lim = cfg.cfl_safety * self.dx / speed
            n = 0
            while h > dt_lim:
                h *= 0.5
                n += 1
                if n > cfg.max_halvings:
                    raise StepRejectedError(
                        f"CFL needs dt <= {dt_lim:.3e}; halving budget "
                        f"({cfg.max_halvings}) exhausted at t = {state.t:.6f}"
                    )
            self.info.cfl_rejections += n
        E1, E2 = self._exps(h)
        xi_sq = ops.xi_sq

        # full system, self-contained
        rhs_u = lambda Y: _rhs_full(ops, Y)
        U1, _ = _if_rk4(E1, E2, h, U0, rhs_u, rhs_u, rhs_u, k1=FU0)
        FU1 = _rhs_full(ops, U1)

        # planar system, self-contained
        rhs_b = lambda Y: _rhs_bar(ops, Y)[0]
        B1, _ = _if_rk4(E1, E2, h, B0, rhs_b, rhs_b, rhs_b, k1=FB0)
        FB1, pbar1_hat, wb1 = _rhs_bar(ops, B1)

        # Hermite endpoint derivatives include the diffusion part
        dU0, dU1 = -xi_sq * U0 + FU0, -xi_sq * U1 + FU1
        dB0, dB1 = -xi_sq * B0 + FB0, -xi_sq * B1 + FB1
        Umid = _hermite_mid(U0, U1, dU0, dU1, h)
        Bmid = _hermite_mid(B0, B1, dB0, dB1, h)

        wb_mid = ops.phys(Bmid)

        # corrector, advected by the interpolated planar field
        G1, _ = _if_rk4(
            E1, E2, h, G0,
            lambda Y: _rhs_tilde(ops, Y, bundle0.wb)[0],
            lambda Y: _rhs_tilde(ops, Y, wb_mid)[0],
            lambda Y: _rhs_tilde(ops, Y, wb1)[0],
            k1=FG0,
        )
        FG1, ptilde1_hat = _rhs_tilde(ops, G1, wb1)

        dG0, dG1 = -xi_sq * G0 + FG0, -xi_sq * G1 + FG1
        Gmid = _hermite_mid(G0, G1, dG0, dG1, h)

        bundle_mid = _DriverEval(ops, Umid, Gmid, Bmid, wb=wb_mid)
        bundle1 = _DriverEval(ops, U1, G1, B1, wb=wb1, pbar_hat=pbar1_hat)

        # remainder, driven by all three
        V1, _ = _if_rk4(
            E1, E2, h, V0,
            lambda Y: _rhs_v(ops, Y, bundle0)[0],
            lambda Y: _rhs_v(ops, Y, bundle_mid)[0],
            lambda Y: _rhs_v(ops, Y, bundle1)[0],
            k1=FV0,
        )
        FV1, q1_hat = _rhs_v(ops, V1, bundle1)

        for name, arr in (("u", U1), ("planar", B1), ("corrector", G1),
                          ("remainder", V1)):
            if not np.all(np.isfinite(arr)):
                raise BlowUpError(
                    f"non-finite coefficients in the {name} block at "
                    f"t = {state.t + h:.6f}", state,
                )
        new_linf = bundle1.speed()
        if new_linf > cfg.blowup_factor * max(self._initial_linf, 1e-300):
            raise BlowUpError(
                f"amplitude {new_linf:.3e} exceeds {cfg.blowup_factor:.0e} x "
                f"initial ({self._initial_linf:.3e}) at t = {state.t + h:.6f}",
                state,
            )

        state1 = SolverState(
            t=state.t + h,
            u=ops.full_vector(U1),
            ubar_h=ops.full_vector(B1),
            utilde=ops.full_vector(G1),
            v=ops.full_vector(V1),
            pbar=ScalarField(grid, ops.full(pbar1_hat)),
            ptilde=ScalarField(grid, ops.full(ptilde1_hat)),
            q=ScalarField(grid, ops.full(q1_hat)),
        )
        if cfg.check_pressure_split:
            p1_hat, p2_hat = _tilde_pressure_split(ops, B1, bundle1)
            state1.ptilde_1 = ScalarField(grid, ops.full(p1_hat))
            state1.ptilde_2 = ScalarField(grid, ops.full(p2_hat))
            resid = _half_weighted_l2(ops, ptilde1_hat - p1_hat - p2_hat)
            if resid > cfg.pressure_split_tol:
                raise PressureSplitError(
                    f"corrector pressure split residual {resid:.3e} > "
                    f"{cfg.pressure_split_tol:.1e} at t = {state1.t:.6f}"
                )
        state1.check_divergence(cfg.div_tol)

        self._cache_state = state1
        self._cache = {
            "bundle": bundle1, "FU": FU1, "FB": FB1, "FG": FG1, "FV": FV1,
        }
        self.info.steps += 1
        self.info.dt_history.append(h)
        return state1


def _half_weighted_l2(ops: _SpecOps, diff: np.ndarray) -> float:
    """|| grad of the scalar with half-spectrum coefficients diff ||_L2."""
    w = np.full(ops.xi_sq.shape, 2.0)
    w[..., 0] = 1.0
    if ops.grid.shape[2] % 2 == 0:
        w[..., -1] = 1.0
    total = np.sum(w * ops.xi_sq * np.abs(diff) ** 2)
    return float(np.sqrt(ops.grid.vol * total))


def run_coupled(state: SolverState, cfg: StepperConfig, observer=None):
    """March all four systems to cfg.end_time; returns (state, RunInfo).

    observer(state), when given, fires after every accepted step.  On
    blow-up the last valid state comes back with info.blew_up set.
    """
    stepper = CoupledStepper(state, cfg)
    try:
        while state.t < cfg.end_time - 1e-12 * max(1.0, cfg.end_time):
            state = stepper.advance(state)
            if observer is not None:
                observer(state)
    except BlowUpError as err:
        stepper.info.blew_up = True
        stepper.info.message = str(err)
        return err.state, stepper.info
    return state, stepper.info


# ---------------------------------------------------------------------------
# standalone single-system steps (isolation entry points; drivers frozen)

def _single_step_sizes(state, cfg, speed, grid):
    h = min(cfg.dt, cfg.end_time - state.t)
    dx = min(L / n for L, n in zip(grid.box, grid.shape))
    n = 0
    if speed > 1e-14:
        dt_lim = cfg.cfl_safety * dx / speed
        while h > dt_lim:
            h *= 0.5
            n += 1
            if n > cfg.max_halvings:
                raise StepRejectedError(
                    f"CFL halving budget exhausted at t = {state.t:.6f}"
                )
    return h, n


def step_ns(state: SolverState, cfg: StepperConfig) -> SolverState:
    """One step of the full system only; other blocks ride along."""
    grid = state.grid
    ops = _ops_for(grid)
    U0 = ops.half_stack(state.u)
    h, _ = _single_step_sizes(state, cfg, state.u.linf(), grid)
    E1 = np.exp(-ops.xi_sq * (0.5 * h))
    rhs = lambda Y: _rhs_full(ops, Y)
    U1, _ = _if_rk4(E1, E1 * E1, h, U0, rhs, rhs, rhs)
    if not np.all(np.isfinite(U1)):
        raise BlowUpError(f"non-finite at t = {state.t + h:.6f}", state)
    out = SolverState(
        t=state.t + h, u=ops.full_vector(U1), ubar_h=state.ubar_h,
        utilde=state.utilde, v=state.v,
    )
    assert_divergence_free(out.u, cfg.div_tol, "full velocity")
    return out


def step_bar(state: SolverState, cfg: StepperConfig) -> SolverState:
    grid = state.grid
    ops = _ops_for(grid)
    B0 = ops.half_stack(state.ubar_h)
    h, _ = _single_step_sizes(state, cfg, state.ubar_h.linf(), grid)
    E1 = np.exp(-ops.xi_sq * (0.5 * h))
    rhs = lambda Y: _rhs_bar(ops, Y)[0]
    B1, _ = _if_rk4(E1, E1 * E1, h, B0, rhs, rhs, rhs)
    if not np.all(np.isfinite(B1)):
        raise BlowUpError(f"non-finite at t = {state.t + h:.6f}", state)
    _, pbar_hat, _ = _rhs_bar(ops, B1)
    out = SolverState(
        t=state.t + h, u=state.u, ubar_h=ops.full_vector(B1),
        utilde=state.utilde, v=state.v,
        pbar=ScalarField(grid, ops.full(pbar_hat)),
    )
    assert_divergence_free(out.ubar_h, cfg.div_tol, "planar velocity")
    return out


def step_tilde(state: SolverState, cfg: StepperConfig) -> SolverState:
    """One corrector step with the planar driver frozen at state.ubar_h.

    The coupled runner interpolates the driver in time instead; this
    entry point exists for linearity and frozen-driver convergence tests.
    Also refreshes the pressure split fields and checks their identity.
    """
    grid = state.grid
    ops = _ops_for(grid)
    G0 = ops.half_stack(state.utilde)
    B = ops.half_stack(state.ubar_h)
    wb = ops.phys(B)
    h, _ = _single_step_sizes(state, cfg, state.ubar_h.linf(), grid)
    E1 = np.exp(-ops.xi_sq * (0.5 * h))
    rhs = lambda Y: _rhs_tilde(ops, Y, wb)[0]
    G1, _ = _if_rk4(E1, E1 * E1, h, G0, rhs, rhs, rhs)
    if not np.all(np.isfinite(G1)):
        raise BlowUpError(f"non-finite at t = {state.t + h:.6f}", state)
    _, ptilde_hat = _rhs_tilde(ops, G1, wb)
    out = SolverState(
        t=state.t + h, u=state.u, ubar_h=state.ubar_h,
        utilde=ops.full_vector(G1), v=state.v,
        ptilde=ScalarField(grid, ops.full(ptilde_hat)),
    )
    if cfg.check_pressure_split:
        bundle = _DriverEval(ops, ops.half_stack(state.u), G1, B, wb=wb)
        p1_hat, p2_hat = _tilde_pressure_split(ops, B, bundle)
        out.ptilde_1 = ScalarField(grid, ops.full(p1_hat))
        out.ptilde_2 = ScalarField(grid, ops.full(p2_hat))
        resid = _half_weighted_l2(ops, ptilde_hat - p1_hat - p2_hat)
        if resid > cfg.pressure_split_tol:
            raise PressureSplitError(
                f"corrector pressure split residual {resid:.3e} > "
                f"{cfg.pressure_split_tol:.1e}"
            )
    assert_divergence_free(out.utilde, cfg.div_tol, "corrector")
    return out


def step_v(state: SolverState, cfg: StepperConfig) -> SolverState:
    """One remainder step with u, planar and corrector drivers frozen."""
    grid = state.grid
    ops = _ops_for(grid)
    V0 = ops.half_stack(state.v)
    bundle = _DriverEval(
        ops, ops.half_stack(state.u), ops.half_stack(state.utilde),
        ops.half_stack(state.ubar_h),
    )
    h, _ = _single_step_sizes(state, cfg, bundle.speed(), grid)
    E1 = np.exp(-ops.xi_sq * (0.5 * h))
    rhs = lambda Y: _rhs_v(ops, Y, bundle)[0]
    V1, _ = _if_rk4(E1, E1 * E1, h, V0, rhs, rhs, rhs)
    if not np.all(np.isfinite(V1)):
        raise BlowUpError(f"non-finite at t = {state.t + h:.6f}", state)
    _, q_hat = _rhs_v(ops, V1, bundle)
    out = SolverState(
        t=state.t + h, u=state.u, ubar_h=state.ubar_h,
        utilde=state.utilde, v=ops.full_vector(V1),
        q=ScalarField(grid, ops.full(q_hat)),
    )
    assert_divergence_free(out.v, cfg.div_tol, "remainder")
    return out


def recompose_check(state: SolverState) -> float:
    """Relative defect of u against (planar, 0) + corrector + remainder."""
    diff = state.u - state.recomposed()
    denom = state.u.l2()
    if denom == 0.0:
        return diff.l2()
    return diff.l2() / denom


def v_gap(state: SolverState) -> float:
    """Distance between the evolved remainder and the subtraction route.

    Normalized by the full flow's amplitude, not the remainder's: on
    runs whose remainder is machine zero the two routes differ only in
    roundoff debris, and a remainder-relative gap would read O(1) there.
    """
    sub = state.v_by_subtraction()
    gap = (state.v - sub).l2()
    denom = state.u.l2()
    return gap / denom if denom > 0 else gap
