"""All-pole (LPC) analysis and resynthesis.

Conventions: ``A(z) = 1 + a1 z^-1 + ... + ap z^-p``. The inverse filter maps
speech to residual, ``1/A(z)`` maps the residual back. Poles are the roots of
the monic polynomial ``z^p + a1 z^(p-1) + ... + ap``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter, lfiltic

from .errors import (
    ConjugateMismatch,
    DegenerateFrame,
    InvalidLag,
    RootFindingDiverged,
    UnstableFilter,
)

ENERGY_EPS = 1e-12
CONJ_EPS = 1e-6
STABILITY_EPS = 1e-9
IMAG_RESIDUE = 1e-8
MAX_ITER = 200
STEP_TOL = 1e-12
POLISH_STEPS = 2


def default_order(sample_rate_hz: int) -> int:
    return int(sample_rate_hz) // 1000 + 4


@dataclass(frozen=True)
class LpcModel:
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=np.float64).reshape(-1)
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("LPC coefficients must be finite")
        coeffs.flags.writeable = False
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def order(self) -> int:
        return self.coeffs.shape[0]

    @property
    def polynomial(self) -> np.ndarray:
        """``[1, a1, ..., ap]``, usable both as FIR taps and as monic root polynomial."""
        return np.concatenate(([1.0], self.coeffs))


@dataclass(frozen=True)
class PoleSet:
    """Poles stored in polar form so radii survive angle edits bit-for-bit."""

    radii: np.ndarray
    angles: np.ndarray

    def __post_init__(self):
        radii = np.array(self.radii, dtype=np.float64).reshape(-1)
        angles = np.array(self.angles, dtype=np.float64).reshape(-1)
        if radii.shape != angles.shape:
            raise ValueError("radii and angles must have the same length")
        if not (np.all(np.isfinite(radii)) and np.all(radii >= 0)):
            raise ValueError("pole radii must be finite and non-negative")
        radii.flags.writeable = False
        angles.flags.writeable = False
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "angles", angles)

    def __len__(self) -> int:
        return self.radii.shape[0]

    @property
    def poles(self) -> np.ndarray:
        return self.radii * np.exp(1j * self.angles)

    @classmethod
    def from_complex(cls, poles) -> "PoleSet":
        poles = np.asarray(poles, dtype=np.complex128)
        return cls(np.abs(poles), np.angle(poles))


def autocorrelate(frame, max_lag: int) -> np.ndarray:
    """``r[k] = sum_n x[n] x[n+k]`` for ``k = 0..max_lag``."""
    x = np.asarray(frame, dtype=np.float64)
    if max_lag < 0 or max_lag >= len(x):
        raise InvalidLag(f"max_lag must lie in [0, {len(x) - 1}], got {max_lag}")
    full = np.correlate(x, x, mode="full")
    return full[len(x) - 1:len(x) + max_lag].copy()


def levinson_durbin(autocorr, order: int) -> LpcModel:
    """Solve the LPC normal equations by the Levinson-Durbin recursion.

    Raises DegenerateFrame when ``r[0]`` is at the silence floor or when the
    prediction error collapses (numerically singular Toeplitz system).
    """
    r = np.asarray(autocorr, dtype=np.float64)
    if len(r) < order + 1:
        raise InvalidLag(f"need {order + 1} autocorrelation lags, got {len(r)}")
    if r[0] <= ENERGY_EPS:
        raise DegenerateFrame(f"frame energy {r[0]:.3g} is below {ENERGY_EPS:g}")
    a = np.zeros(order + 1)
    a[0] = 1.0
    error = r[0]
    for i in range(1, order + 1):
        k = -np.dot(a[:i], r[i:0:-1]) / error
        a[1:i + 1] = a[1:i + 1] + k * a[i - 1::-1][:i]
        error *= 1.0 - k * k
        if error <= ENERGY_EPS * r[0] * 1e-3:
            raise DegenerateFrame(f"prediction error vanished at order {i}")
    return LpcModel(a[1:])


def _root_bound(poly: np.ndarray) -> float:
    # Fujiwara's bound on root magnitudes of a monic polynomial.
    degree = len(poly) - 1
    terms = [abs(poly[k]) ** (1.0 / k) for k in range(1, degree)]
    terms.append(abs(poly[degree] / 2.0) ** (1.0 / degree))
    return 2.0 * max(terms)


def _polish(poly: np.ndarray, z: np.ndarray, steps: int = POLISH_STEPS) -> np.ndarray:
    """Newton steps with p and p' evaluated in extended precision.

    Double-precision roots of clustered polynomials carry independent rounding
    noise that, once multiplied back out, shows up as coefficient errors far
    above machine precision. A couple of steps with a more accurate residual
    remove most of it. Where ``longdouble`` is plain double this is a no-op.
    """
    c = poly.astype(np.clongdouble)
    w = z.astype(np.clongdouble)
    for _ in range(steps):
        p = np.zeros_like(w)
        dp = np.zeros_like(w)
        for ck in c:
            dp = dp * w + p
            p = p * w + ck
        with np.errstate(divide="ignore", invalid="ignore"):
            step = p / dp
        w = np.where(np.isfinite(step), w - step, w)
    return w.astype(np.complex128)


def aberth_roots(poly, max_iter: int = MAX_ITER, tol: float = STEP_TOL) -> np.ndarray:
    """Roots of a monic polynomial ``[1, c1, ..., cn]`` by Aberth-Ehrlich iteration.

    All roots are refined simultaneously. A root is frozen once its step drops
    below ``tol`` (scaled by ``max(1, |z|)``) or its residual reaches the
    rounding floor of Horner evaluation, where further steps are noise. The
    converged roots then get a short extended-precision Newton polish.
    """
    poly = np.asarray(poly, dtype=np.complex128)
    degree = len(poly) - 1
    if degree == 0:
        return np.zeros(0, dtype=np.complex128)
    if degree == 1:
        return np.array([-poly[1]])
    exponents = np.arange(degree, -1, -1)
    deriv = np.concatenate((poly[:-1] * exponents[:-1], [0.0]))
    abs_poly = np.abs(poly)

    radius = _root_bound(poly)
    if radius == 0.0:
        return np.zeros(degree, dtype=np.complex128)
    center = -poly[1] / degree
    # Offset the start angles so no guess sits on the real axis.
    theta = 2.0 * np.pi * np.arange(degree) / degree + 0.4
    # |c_n| ** (1/n) is the geometric mean of the root moduli; for LPC
    # polynomials (roots near the unit circle) starting there roughly halves
    # the iteration count compared with the bound itself.
    start = abs(poly[-1]) ** (1.0 / degree)
    if not 0.0 < start < 0.5 * radius:
        start = 0.5 * radius
    z = center + start * np.exp(1j * theta)
    active = np.ones(degree, dtype=bool)
    eps = np.finfo(np.float64).eps
    diagonal = np.eye(degree, dtype=bool)

    for _ in range(max_iter):
        powers = z[:, None] ** exponents
        p = powers @ poly
        dp = (powers[:, 1:] @ deriv[:-1]) if degree > 1 else deriv[0]
        floor = 4.0 * eps * (np.abs(powers) @ abs_poly)
        active &= np.abs(p) > floor
        if not active.any():
            return _polish(poly, z)
        diff = z[:, None] - z[None, :]
        diff[diagonal] = np.inf
        with np.errstate(divide="ignore", invalid="ignore"):
            repulsion = (1.0 / diff).sum(axis=1)
            ratio = p / dp
            step = ratio / (1.0 - ratio * repulsion)
        step = np.where(active, step, 0.0)
        if not np.all(np.isfinite(step)):
            raise RootFindingDiverged("non-finite Aberth step")
        z = z - step
        small = np.abs(step) <= tol * np.maximum(1.0, np.abs(z))
        active &= ~small
        if not active.any():
            return _polish(poly, z)
    raise RootFindingDiverged(f"Aberth iteration did not converge within {max_iter} iterations")


def _match_mirrors(upper: np.ndarray, lower: np.ndarray) -> np.ndarray:
    """Greedy nearest-conjugate matching; returns the lower index chosen for each upper root."""
    if not len(upper):
        return np.zeros(0, dtype=int)
    distance = np.abs(upper[:, None] - np.conj(lower)[None, :])
    best = distance.argmin(axis=1)
    if len(set(best.tolist())) == len(best):
        return best
    taken = np.zeros(len(lower), dtype=bool)
    for i in range(len(upper)):
        row = np.where(taken, np.inf, distance[i])
        best[i] = int(row.argmin())
        taken[best[i]] = True
    return best


def _pair_conjugates(roots: np.ndarray, eps: float = CONJ_EPS) -> PoleSet:
    """Snap near-real roots to the axis and match the rest into exact conjugate pairs.

    Pairs are matched greedily: each upper-half root, in increasing angle
    order, takes the nearest unmatched mirror image from the lower half.
    """
    real = np.abs(roots.imag) <= eps
    upper = roots[roots.imag > eps]
    upper = upper[np.lexsort((np.abs(upper), np.angle(upper)))]
    lower = roots[roots.imag < -eps]
    if len(upper) != len(lower):
        raise ConjugateMismatch(f"{len(upper)} upper-half roots but {len(lower)} lower-half roots")
    merged = 0.5 * (upper + np.conj(lower[_match_mirrors(upper, lower)]))
    r, phi = np.abs(merged), np.abs(np.angle(merged))
    radii = np.repeat(r, 2).tolist()
    angles = np.column_stack((phi, -phi)).reshape(-1).tolist()
    for x in sorted(roots[real].real, reverse=True):
        radii.append(abs(x))
        angles.append(0.0 if x >= 0 else np.pi)
    return PoleSet(radii, angles)


def lpc_to_poles(model: LpcModel) -> PoleSet:
    poly = model.polynomial
    # Trailing zero coefficients are exact roots at the origin.
    n_zero = 0
    while len(poly) - n_zero > 1 and poly[len(poly) - 1 - n_zero] == 0.0:
        n_zero += 1
    roots = aberth_roots(poly[:len(poly) - n_zero])
    roots = np.concatenate((roots, np.zeros(n_zero)))
    return _pair_conjugates(roots)


def check_conjugate_closure(poles: PoleSet, eps: float = CONJ_EPS) -> None:
    z = poles.poles
    upper = z[z.imag > eps]
    lower = z[z.imag < -eps]
    if len(upper) != len(lower):
        raise ConjugateMismatch(f"{len(upper)} upper-half poles but {len(lower)} lower-half poles")
    if not len(upper):
        return
    chosen = _match_mirrors(upper, lower)
    gaps = np.abs(upper - np.conj(lower[chosen]))
    bad = gaps > eps * np.maximum(1.0, np.abs(upper))
    if bad.any():
        raise ConjugateMismatch(f"pole {upper[bad][0]:.6g} has no conjugate partner")


def poles_to_lpc(poles: PoleSet) -> LpcModel:
    check_conjugate_closure(poles)
    poly = np.array([1.0 + 0.0j])
    for pole in poles.poles:
        poly = np.convolve(poly, [1.0, -pole])
    residue = np.max(np.abs(poly.imag)) if len(poly) else 0.0
    if residue >= IMAG_RESIDUE:
        raise ConjugateMismatch(f"expanded polynomial has imaginary residue {residue:.3g}")
    return LpcModel(poly.real[1:])


def reflection_coefficients(model: LpcModel) -> np.ndarray:
    """Step-down recursion; all ``|k| < 1`` iff every pole is inside the unit circle."""
    a = model.polynomial.copy()
    ks = np.zeros(model.order)
    for i in range(model.order, 0, -1):
        k = a[i]
        ks[i - 1] = k
        if abs(k) >= 1.0:
            break
        a = (a[:i + 1] - k * a[:i + 1][::-1]) / (1.0 - k * k)
        a = a[:i]
    return ks


def is_stable(model: LpcModel, eps: float = STABILITY_EPS) -> bool:
    return bool(np.all(np.abs(reflection_coefficients(model)) < 1.0 - eps))


def inverse_filter(frame, model: LpcModel) -> np.ndarray:
    """Residual ``e[n] = x[n] + sum_k a_k x[n-k]`` with zero initial conditions."""
    x = np.asarray(frame, dtype=np.float64)
    return lfilter(model.polynomial, [1.0], x)


def synthesis_filter(residual, model: LpcModel, state=None):
    """All-pole resynthesis ``y[n] = e[n] - sum_k a_k y[n-k]``.

    ``state`` holds the previous outputs, most recent first
    (``[y[-1], y[-2], ..., y[-p]]``); None means silence. Returns the output
    and the state to pass in with the next block of the same signal.
    """
    e = np.asarray(residual, dtype=np.float64)
    if not is_stable(model):
        raise UnstableFilter("synthesis filter has a pole on or outside the unit circle")
    order = model.order
    if order == 0:
        return e.copy(), np.zeros(0)
    denominator = model.polynomial
    if state is None:
        zi = np.zeros(order)
    else:
        zi = lfiltic([1.0], denominator, np.asarray(state, dtype=np.float64))
    y, _ = lfilter([1.0], denominator, e, zi=zi)
    history = np.concatenate((np.zeros(order) if state is None else np.asarray(state)[::-1], y))
    return y, history[::-1][:order].copy()
