"""The comparison Sturm-Liouville problem for lambda_1(d, k).

``lambda_1(d, k)`` is the first nonzero Neumann eigenvalue of

    (y' cos(sqrt(k) x))' + mu cos(sqrt(k) x) y = 0,   y'(+-d/2) = 0.

With ``k = 1`` the substitution ``tanh(u) = sin(x)`` turns it into

    y'' + mu sech^2(u) y = 0,   y'(+-T) = 0,   tanh(T) = sin(d/2),

which stays regular at ``d = pi`` after truncating ``T`` at :data:`T_MAX`.
Both forms are discretized with a cell-centred three-point stencil, giving
a sparse symmetric tridiagonal generalized eigenproblem ``A y = mu M y`` with a
positive diagonal mass matrix.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import make_interp_spline
from scipy import sparse
from scipy.sparse.linalg import eigsh

from .errors import ConvergenceError, DegenerateFunctionError, RefinementError

T_MAX = 20.0  # sech^2(20) < 5e-18
SHIFT_TOL = 1e-5
REFINE_FAIL = 1e-4
N_MAX = 1 << 18
UPPER_THRESHOLD = 2 * math.asin(math.tanh(1.5))


@dataclass(frozen=True)
class SLProblem:
    """Weighted Neumann problem on (-d/2, d/2) with weight cos(sqrt(k) x)."""

    d: float
    k: float = 1.0
    n: int = 512

    def __post_init__(self):
        if self.n < 256:
            raise ValueError("grid size must be at least 256")
        if self.k < 0:
            raise ValueError("curvature bound must be non-negative")
        if not self.d > 0:
            raise ValueError("interval length must be positive")
        if self.k > 0 and self.d * math.sqrt(self.k) > math.pi * (1 + 1e-12):
            raise ValueError("need d <= pi / sqrt(k) so the weight stays positive")

    @property
    def scaled_d(self):
        return min(self.d * math.sqrt(self.k), math.pi)

    def transformed(self):
        """The equivalent problem in the ``u`` variable (k > 0 only)."""
        if self.k == 0:
            raise ValueError("the transformed problem needs k > 0")
        return TransformedSLP.from_d(self.scaled_d, n=self.n, scale=self.k)


@dataclass(frozen=True)
class TransformedSLP:
    """``y'' + mu sech^2(u) y = 0`` on [-T, T] with Neumann conditions.

    ``scale`` multiplies the eigenvalue, so that a problem built from
    ``(d, k)`` returns ``lambda_1(d, k) = k lambda_1(d sqrt(k), 1)``.
    """

    T: float
    n: int = 4096
    scale: float = 1.0

    def __post_init__(self):
        if not (0 < self.T < math.inf):
            raise ValueError("truncation bound must be finite and positive")
        if self.n < 256:
            raise ValueError("grid size must be at least 256")

    @classmethod
    def from_d(cls, d, n=4096, scale=1.0, T_max=T_MAX):
        s = math.sin(d / 2)
        T = T_max if s >= math.tanh(T_max) else min(math.atanh(s), T_max)
        return cls(T, n, scale)


# ---------------------------------------------------------------------------
# discretization


def _grid(lo, hi, n):
    h = (hi - lo) / n
    return lo + (np.arange(n) + 0.5) * h, lo + np.arange(n + 1) * h, h


def _operators(prob, n):
    """Cell centres, stiffness (diag, offdiag) and mass of the discrete problem."""
    if isinstance(prob, TransformedSLP):
        x, faces, h = _grid(-prob.T, prob.T, n)
        flux = np.ones(n - 1)
        mass = h / np.cosh(x) ** 2
    else:
        x, faces, h = _grid(-prob.d / 2, prob.d / 2, n)
        r = math.sqrt(prob.k)
        flux = np.cos(r * faces[1:-1])
        mass = h * np.cos(r * x)
    stiff = flux / h
    diag = np.zeros(n)
    diag[:-1] += stiff
    diag[1:] += stiff
    return x, diag, -stiff, mass


def _solve(prob, n, modes=4):
    """Smallest odd eigenpair of the discrete problem at grid size ``n``.

    Shift-invert Lanczos on the pencil ``(A, M)``; the mass matrix spans
    many orders of magnitude on long transformed intervals, so it is not
    folded into the stiffness matrix.
    """
    x, diag, off, mass = _operators(prob, n)
    A = sparse.diags([off, diag, off], [-1, 0, 1], format="csc")
    M = sparse.diags(mass, format="csc")
    v0 = np.linspace(-1.0, 1.0, n) + 0.5
    vals, vecs = eigsh(A, k=modes, M=M, sigma=-0.5, which="LM", v0=v0, tol=1e-14)
    order = np.argsort(vals)
    for mu, y in zip(vals[order], vecs.T[order]):
        if np.linalg.norm(y + y[::-1]) < 1e-6 * np.linalg.norm(y):
            if y[-1] < 0:
                y = -y
            return float(mu), x, y
    raise ConvergenceError("no odd eigenvector among the lowest modes", last=vals)


def _refined(prob):
    n = prob.n
    mu, x, y = _solve(prob, n)
    prev, shift = mu, math.inf
    while True:
        if 2 * n > N_MAX:
            if shift > REFINE_FAIL:
                raise RefinementError(f"eigenvalue still moves by {shift:.2e} at n={n}", prev, mu)
            return mu, x, y, n, shift
        prev = mu
        n *= 2
        mu, x, y = _solve(prob, n)
        shift = abs(mu - prev)
        if shift < SHIFT_TOL:
            return mu, x, y, n, shift


@dataclass
class EigenResult:
    """First nonzero eigenvalue with its eigenfunction and refinement data."""

    mu: float
    grid: np.ndarray
    eigenfunction: np.ndarray
    n: int
    grid_shift: float
    alternate: float | None = None
    discrepancy: float | None = None
    meta: dict = field(default_factory=dict)

    def __float__(self):
        return self.mu

    def to_dict(self):
        return {
            "mu": self.mu,
            "n": self.n,
            "grid_shift": self.grid_shift,
            "alternate": self.alternate,
            "discrepancy": self.discrepancy,
            **self.meta,
        }


def slp_first_eigenvalue(prob, cross_check=True):
    """First nonzero Neumann eigenvalue of an :class:`SLProblem` or
    :class:`TransformedSLP`.

    The grid is doubled from ``prob.n`` until the eigenvalue moves by less
    than 1e-5.  For ``SLProblem`` with ``k > 0`` the transformed problem is
    solved too and the difference is stored in ``discrepancy``; at ``d = pi``
    the transformed value is returned because the weight vanishes at the ends.
    """
    if isinstance(prob, TransformedSLP):
        mu, x, y, n, shift = _refined(prob)
        return EigenResult(prob.scale * mu, x, y, n, prob.scale * shift, meta={"T": prob.T})
    mu, x, y, n, shift = _refined(prob)
    res = EigenResult(mu, x, y, n, shift)
    if prob.k > 0 and cross_check:
        tp = prob.transformed()
        alt = slp_first_eigenvalue(tp)
        res.alternate = alt.mu
        res.discrepancy = abs(alt.mu - mu)
        res.meta["T"] = tp.T
        if prob.scaled_d >= math.pi * (1 - 1e-12):
            res.meta["original"] = mu
            res.mu, res.alternate = alt.mu, mu
    return res


# ---------------------------------------------------------------------------
# Rayleigh quotient


def _gauss_cells(knots, order=8):
    g, w = np.polynomial.legendre.leggauss(order)
    a, b = knots[:-1, None], knots[1:, None]
    pts = 0.5 * (a + b) + 0.5 * (b - a) * g
    return pts.ravel(), (0.5 * (b - a) * w).ravel()


@dataclass
class RayleighValue:
    value: float
    numerator: float
    gradient_form: float
    denominator: float
    discrepancy: float

    def __float__(self):
        return self.value


def rayleigh_quotient(y, T, u=None, neumann_tol=1e-8, agree_tol=1e-8):
    """``int -y y'' / int y^2 sech^2`` over [-T, T].

    ``y`` is either a callable or samples on ``u`` (default: a uniform grid
    on [-T, T]).  Samples are interpolated by a quintic spline; integrals use
    8-point Gauss-Legendre on every grid cell.  The Dirichlet form
    ``int y'^2`` is computed too and must agree with ``-int y y''`` up to the
    boundary term ``[y y']``, which Neumann conditions make negligible.
    """
    if callable(y):
        u = np.linspace(-T, T, 20001) if u is None else np.asarray(u, dtype=float)
        samples = np.asarray(y(u), dtype=float)
    else:
        samples = np.asarray(y, dtype=float)
        u = np.linspace(-T, T, len(samples)) if u is None else np.asarray(u, dtype=float)
    spl = make_interp_spline(u, samples, k=5)
    d1, d2 = spl.derivative(1), spl.derivative(2)
    ends = d1(np.array([u[0], u[-1]]))
    if np.max(np.abs(ends)) > neumann_tol:
        raise ValueError(f"y'(+-T) = {ends} violates the Neumann condition")
    q, w = _gauss_cells(u)
    yq, d1q, d2q = spl(q), d1(q), d2(q)
    num = float(np.sum(w * -yq * d2q))
    grad = float(np.sum(w * d1q * d1q))
    den = float(np.sum(w * yq * yq / np.cosh(q) ** 2))
    boundary = float(spl(u[-1]) * ends[1] - spl(u[0]) * ends[0])
    disc = abs(num - grad + boundary)
    if disc > agree_tol * max(1.0, abs(grad)):
        raise ArithmeticError(f"numerator forms disagree by {disc:.2e}")
    if den < 1e-14:
        raise DegenerateFunctionError(f"weighted norm {den:.2e} is too small")
    return RayleighValue(num / den, num, grad, den, disc)


def test_function_quotient(T):
    """Closed-form quotient of ``y_T = tanh(u) - u sech^2(T)``.

    Uses ``int tanh^2 sech^2 = (2/3) tanh^3 T`` and
    ``int 2u tanh sech^2 = 2 tanh T - 2 T sech^2 T``; the remaining moment
    ``int u^2 sech^2`` is integrated numerically.
    """
    t, s2 = math.tanh(T), 1 / math.cosh(T) ** 2
    cross = s2 * (2 * t - 2 * T * s2)
    q, w = _gauss_cells(np.linspace(-T, T, 401))
    moment = float(np.sum(w * q * q / np.cosh(q) ** 2))
    num = (2 / 3) * 2 * t**3 - cross
    den = (1 / 3) * 2 * t**3 - cross + s2 * s2 * moment
    return num / den


test_function_quotient.__test__ = False


# ---------------------------------------------------------------------------
# bounds and behaviour at d = pi


def _A(d):
    s, c2 = math.sin(d / 2), math.cos(d / 2) ** 2
    # atanh(s) cos^2 written so that it stays finite as s -> 1
    tail = 0.5 * c2 * math.log((1 + s) ** 2 / c2) if c2 > 0 else 0.0
    core = s - tail
    return 6 * core / (s**3 - 3 * c2 * core)


def eigenvalue_bounds(d):
    """``(lower, upper)`` for ``mu(d) = lambda_1(d, 1)``.

    ``lower = 2 + 2(1 - sin(d/2))``; ``upper = 2 + cos^2(d/2) A(d)`` comes from
    the test function ``tanh(u) - u sech^2(T)`` and is ``None`` below
    ``d = 2 arcsin(tanh(3/2))`` where the estimate is not valid.
    """
    if not (0 < d <= math.pi + 1e-12):
        raise ValueError("need 0 < d <= pi")
    d = min(d, math.pi)
    lower = 2 + 2 * (1 - math.sin(d / 2))
    if d < UPPER_THRESHOLD:
        return lower, None
    return lower, 2 + math.cos(d / 2) ** 2 * _A(d)


def mu(d, n=4096):
    """``lambda_1(d, 1)`` from the transformed problem."""
    return slp_first_eigenvalue(TransformedSLP.from_d(d, n=n)).mu


def mu_extrapolated(d, n=8192):
    """``lambda_1(d, 1)`` on grids ``n`` and ``2n`` combined by Richardson.

    A fixed grid keeps the discretization error smooth in ``d``, which
    matters when differences of nearby values are divided by ``h^2``.
    """
    prob = TransformedSLP.from_d(d, n=n)
    coarse = _solve(prob, n)[0]
    fine = _solve(prob, 2 * n)[0]
    return (4 * fine - coarse) / 3


@dataclass
class TaylorEstimate:
    """Derivatives of ``mu`` at ``d = pi`` from one-sided differences.

    ``first`` and ``second`` are Richardson-extrapolated; ``coefficient`` is
    the fitted ``c`` in ``mu(d) = mu(pi) + c (pi - d)^2 + ...`` and equals
    ``second / 2``.  ``table`` lists ``(d, mu)`` pairs.
    """

    first: float
    second: float
    coefficient: float
    mu_pi: float
    h: float
    table: list
    raw: dict
    interval: tuple = (0.25, 1.5)
    stable: bool = True

    def to_dict(self):
        return {
            "mu_prime": self.first,
            "mu_second": self.second,
            "quadratic_coefficient": self.coefficient,
            "mu_pi": self.mu_pi,
            "h": self.h,
            "interval": list(self.interval),
            "stable": self.stable,
            "raw": self.raw,
            "table": [list(r) for r in self.table],
        }


def taylor_at_pi(h=0.02, n=8192):
    """One-sided derivative estimates of ``mu`` at ``d = pi``.

    Samples ``mu(pi - j h/2)`` for ``j = 0..8`` and combines the second-order
    one-sided stencils at steps ``h`` and ``h/2`` by Richardson extrapolation.
    A quadratic fit in ``pi - d`` gives ``mu(pi)`` and the Taylor coefficient.
    """
    if h > 0.02:
        raise ValueError("step must be at most 0.02")
    k = h / 2
    ds = [math.pi - j * k for j in range(9)]
    vals = np.array([mu_extrapolated(d, n) for d in ds])

    def stencils(step):
        m = vals[:: step][:4]
        H = step * k
        # derivatives in d at pi, samples at pi - j H
        d1 = -(3 * m[0] - 4 * m[1] + m[2]) / (2 * H)
        d2 = (2 * m[0] - 5 * m[1] + 4 * m[2] - m[3]) / H**2
        return d1, d2

    d1h, d2h = stencils(2)
    d1k, d2k = stencils(1)
    first = (4 * d1k - d1h) / 3
    second = (4 * d2k - d2h) / 3
    x = math.pi - np.array(ds)
    coef = np.polynomial.polynomial.polyfit(x, vals, 4)
    raw = {"first": [float(d1h), float(d1k)], "second": [float(d2h), float(d2k)]}
    stable = bool(abs(d1k - first) <= abs(d1h - first) + 1e-12 and abs(d2k - second) <= abs(d2h - second) + 1e-12)
    est = TaylorEstimate(float(first), float(second), float(coef[2]), float(coef[0]), h, list(zip(ds, vals.tolist())), raw, stable=stable)
    if not stable:
        warnings.warn(f"unstable derivative estimates under refinement: {raw}", RuntimeWarning, stacklevel=2)
    return est


# ---------------------------------------------------------------------------
# consistency helpers


def normalized_eigenfunction(res):
    """Eigenfunction scaled so that ``int y^2 sech^2 du = 1`` (transformed grid)."""
    u, y = res.grid, res.eigenfunction
    h = u[1] - u[0]
    norm = math.sqrt(float(np.sum(y * y / np.cosh(u) ** 2) * h))
    return y / norm
