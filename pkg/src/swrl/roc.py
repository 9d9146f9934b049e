"""ROC-curve machinery for the spectral test family.

The closed-form ROC curve of the calibrated spectral test is

    phi_lam(alpha) = 1 - Phi[Phi^{-1}(1 - alpha) - sqrt(mu/2)],
    mu = -log(1 - lam^2),

with phi_lam(0) = 0 and phi_lam(1) = 1. The curve admits a parametric form

    alpha(t) = 1 - Phi(t + sqrt(mu/8)),   beta(t) = 1 - Phi(t - sqrt(mu/8)),

under which the slope is phi'(alpha) = exp(t * sqrt(mu/2)) and the
squared-slope integrand becomes a Gaussian-weighted exponential. All
quadrature near the endpoints runs in the parametric variable, which removes
the endpoint singularity exactly.

This module also provides the squared-slope "value" functional

    val(phi) = sqrt( integral_0^1 phi'(alpha)^2 d(alpha) ),

its closed form (1 - lam^2)^{-1/4} for phi_lam, polyline geometry in concave
position, the upper concave envelope through an exterior point, and the
two-stage discretize/perturb construction that turns the envelope into an
achievable polyline with a strictly larger value.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad
from scipy.special import ndtr, ndtri

from .errors import (
    BudgetInfeasible,
    DivergentIntegral,
    MalformedSequence,
    MarginTooSmall,
    NotConcavePosition,
    NotExterior,
)

__all__ = [
    "PhiCurve",
    "FunctionCurve",
    "RocPolyline",
    "EnvelopeCurve",
    "phi_eval",
    "phi_deriv",
    "val_closed_form",
    "val_numeric",
    "val_piecewise",
    "concave_position_check",
    "upper_concave_envelope",
    "pushout_check",
    "discretize_envelope",
    "perturb_points",
    "feasibility_bound_check",
    "shift_boundary_point",
]

# absolute quadrature tolerance on squared-value integrals
QUAD_TOL = 1e-4


def _norm_pdf(z):
    return np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)


class PhiCurve:
    """The spectral-test ROC curve at a fixed SNR, with analytic derivative."""

    def __init__(self, lam: float):
        if not 0.0 <= lam < 1.0:
            raise ValueError(f"lam must be in [0, 1), got {lam}")
        self.lam = float(lam)
        self.mu = -np.log1p(-lam * lam)
        self.shift = np.sqrt(self.mu / 2.0)  # Phi^{-1}-space offset of the curve
        self.half_shift = np.sqrt(self.mu / 8.0)

    # -- alpha-space interface ------------------------------------------------

    def __call__(self, alpha):
        return phi_eval(self.lam, alpha)

    def deriv(self, alpha):
        return phi_deriv(self.lam, alpha)

    # -- parametric interface -------------------------------------------------

    def tau_of_alpha(self, alpha):
        # -ndtri(alpha) == ndtri(1 - alpha), stable for alpha near 0
        return -ndtri(alpha) - self.half_shift

    def alpha_of_tau(self, tau):
        return ndtr(-(tau + self.half_shift))

    def beta_of_tau(self, tau):
        return ndtr(-(tau - self.half_shift))

    def deriv_of_tau(self, tau):
        return np.exp(tau * self.shift)

    def sq_slope_integral(self, a: float, b: float) -> float:
        """integral_a^b phi'(alpha)^2 d(alpha), evaluated in parametric space.

        The integrand there is exp(tau*sqrt(2 mu)) * pdf(tau + sqrt(mu/8)),
        smooth with Gaussian tails even as a -> 0 or b -> 1.
        """
        if not 0.0 <= a <= b <= 1.0:
            raise ValueError("need 0 <= a <= b <= 1")
        if a == b:
            return 0.0
        if self.lam == 0.0:
            return b - a
        rate = np.sqrt(2.0 * self.mu)
        off = self.half_shift
        log_norm = -0.5 * np.log(2.0 * np.pi)

        def integrand(tau):
            # single exp of the combined exponent; the Gaussian term always
            # wins in the tails, so no overflow
            return np.exp(tau * rate - 0.5 * (tau + off) ** 2 + log_norm)

        t_hi = np.inf if a == 0.0 else self.tau_of_alpha(a)
        t_lo = -np.inf if b == 1.0 else self.tau_of_alpha(b)
        value, _ = quad(integrand, t_lo, t_hi, epsabs=QUAD_TOL / 10, limit=200)
        return value


@dataclass(frozen=True)
class FunctionCurve:
    """Generic differentiable-curve evaluator (function plus derivative)."""

    fn: callable
    deriv_fn: callable

    def __call__(self, alpha):
        return self.fn(alpha)

    def deriv(self, alpha):
        return self.deriv_fn(alpha)


def phi_eval(lam: float, alpha):
    """Power of the size-alpha spectral test: the ROC curve at alpha.

    Endpoints follow the conventions phi(0) = 0 and phi(1) = 1; lam = 0
    degenerates to the diagonal.
    """
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lam must be in [0, 1), got {lam}")
    a = np.asarray(alpha, dtype=float)
    if np.any((a < 0) | (a > 1)):
        raise ValueError("alpha must be in [0, 1]")
    mu = -np.log1p(-lam * lam)
    with np.errstate(divide="ignore"):
        # ndtri(1-a) written as -ndtri(a) to keep precision for small a
        out = ndtr(-(-ndtri(a) - np.sqrt(mu / 2.0)))
    out = np.where(a == 0.0, 0.0, np.where(a == 1.0, 1.0, out))
    return float(out) if np.isscalar(alpha) or a.ndim == 0 else out


def phi_deriv(lam: float, alpha):
    """Slope of the ROC curve on (0, 1): exp(tau * sqrt(mu/2)) at the
    parametric coordinate tau of alpha."""
    if not 0.0 < lam < 1.0:
        raise ValueError(f"lam must be in (0, 1), got {lam}")
    a = np.asarray(alpha, dtype=float)
    if np.any((a <= 0) | (a >= 1)):
        raise ValueError("alpha must be in the open interval (0, 1)")
    curve = PhiCurve(lam)
    out = curve.deriv_of_tau(curve.tau_of_alpha(a))
    return float(out) if np.isscalar(alpha) or a.ndim == 0 else out


def val_closed_form(lam: float) -> float:
    """Closed-form value of the spectral ROC curve: (1 - lam^2)^(-1/4)."""
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lam must be in [0, 1), got {lam}")
    return float((1.0 - lam * lam) ** -0.25)


def val_numeric(curve, tol: float = QUAD_TOL, method: str = "auto") -> float:
    """sqrt(integral of squared slope) by adaptive quadrature.

    For a ``PhiCurve`` the integral is evaluated in the parametric variable
    (no endpoint singularity). Any other curve must expose ``deriv(alpha)``;
    the endpoints are then handled by geometric tail refinement, raising
    ``DivergentIntegral`` when the tail contributions fail to die out.

    ``tol`` is the absolute target on the squared value.
    """
    if method not in ("auto", "parametric", "generic"):
        raise ValueError(f"unknown method {method!r}")
    if method == "parametric" and not isinstance(curve, PhiCurve):
        raise ValueError("parametric integration requires a PhiCurve")
    if method in ("auto", "parametric") and isinstance(curve, PhiCurve):
        return float(np.sqrt(curve.sq_slope_integral(0.0, 1.0)))

    def piece(a, b):
        value, _ = quad(lambda t: curve.deriv(t) ** 2, a, b, epsabs=tol / 10, limit=200)
        return value

    edge = 0.125
    total = piece(edge, 1.0 - edge)
    for side in ("left", "right"):
        hi = edge
        prev = np.inf
        for _ in range(80):
            lo = hi / 4.0
            inc = piece(lo, hi) if side == "left" else piece(1.0 - hi, 1.0 - lo)
            total += inc
            if inc < tol / 16.0 and inc <= prev:
                break
            prev = inc
            hi = lo
        else:
            raise DivergentIntegral(f"{side} tail of the squared-slope integral did not converge")
    return float(np.sqrt(total))


# ---------------------------------------------------------------------------
# polylines in concave position
# ---------------------------------------------------------------------------


def _check_point_sequence(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise MalformedSequence("need a sequence of at least two (alpha, beta) points")
    a = pts[:, 0]
    if np.any(np.diff(a) <= 0):
        raise MalformedSequence("alphas must be strictly ascending (no duplicates)")
    if not (a[0] == 0.0 and pts[0, 1] == 0.0):
        raise MalformedSequence("first point must be (0, 0)")
    if not (a[-1] == 1.0 and pts[-1, 1] == 1.0):
        raise MalformedSequence("last point must be (1, 1)")
    return pts


def concave_position_check(points) -> bool:
    """True iff consecutive slopes are strictly positive and strictly
    decreasing. Raises MalformedSequence for duplicate alphas or wrong
    endpoints."""
    pts = _check_point_sequence(points)
    slopes = np.diff(pts[:, 1]) / np.diff(pts[:, 0])
    if np.any(slopes <= 0):
        return False
    return bool(np.all(np.diff(slopes) < 0))


@dataclass(frozen=True)
class RocPolyline:
    """Point sequence in concave position, (0,0) to (1,1), with cached slopes."""

    points: np.ndarray

    def __post_init__(self):
        pts = _check_point_sequence(self.points)
        object.__setattr__(self, "points", pts)
        if not concave_position_check(pts):
            raise NotConcavePosition("slopes must be strictly positive and strictly decreasing")

    @cached_property
    def slopes(self) -> np.ndarray:
        return np.diff(self.points[:, 1]) / np.diff(self.points[:, 0])

    @property
    def alphas(self) -> np.ndarray:
        return self.points[:, 0]

    @property
    def betas(self) -> np.ndarray:
        return self.points[:, 1]

    @property
    def segments(self) -> int:
        return self.points.shape[0] - 1

    def interpolate(self, alpha):
        """Piecewise-linear interpolant through the points."""
        return np.interp(alpha, self.points[:, 0], self.points[:, 1])


def val_piecewise(poly) -> float:
    """Value of a piecewise-linear curve: sqrt(sum slope_i^2 * width_i)."""
    if not isinstance(poly, RocPolyline):
        poly = RocPolyline(np.asarray(poly, dtype=float))
    widths = np.diff(poly.points[:, 0])
    return float(np.sqrt(np.sum(poly.slopes**2 * widths)))


# ---------------------------------------------------------------------------
# upper concave envelope through an exterior point
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EnvelopeCurve:
    """Upper concave envelope of the base curve and one exterior point.

    Coincides with the base curve outside [touch_lo, touch_hi] and is linear
    on [touch_lo, alpha_star] and [alpha_star, touch_hi]; the segment slopes
    equal the curve slopes at the tangency abscissas.
    """

    curve: PhiCurve
    alpha_star: float
    beta_star: float
    touch_lo: float
    touch_hi: float
    slope_lo: float
    slope_hi: float

    def psi(self, alpha):
        a = np.asarray(alpha, dtype=float)
        out = np.asarray(phi_eval(self.curve.lam, a), dtype=float)
        left = (a >= self.touch_lo) & (a <= self.alpha_star)
        right = (a > self.alpha_star) & (a <= self.touch_hi)
        out = np.where(left, self.beta_star + self.slope_lo * (a - self.alpha_star), out)
        out = np.where(right, self.beta_star + self.slope_hi * (a - self.alpha_star), out)
        return float(out) if np.isscalar(alpha) or a.ndim == 0 else out

    def psi_deriv(self, alpha):
        a = np.asarray(alpha, dtype=float)
        inside_lo = (a >= self.touch_lo) & (a <= self.alpha_star)
        inside_hi = (a > self.alpha_star) & (a <= self.touch_hi)
        outside = ~(inside_lo | inside_hi)
        out = np.empty_like(a)
        if np.any(outside):
            out[outside] = phi_deriv(self.curve.lam, a[outside])
        out[inside_lo] = self.slope_lo
        out[inside_hi] = self.slope_hi
        return float(out) if np.isscalar(alpha) or a.ndim == 0 else out

    def sq_slope_integral(self) -> float:
        """integral_0^1 psi'(alpha)^2: quadrature on the curved parts, exact
        on the linear parts."""
        c = self.curve
        curved = c.sq_slope_integral(0.0, self.touch_lo) + c.sq_slope_integral(self.touch_hi, 1.0)
        linear = self.slope_lo**2 * (self.alpha_star - self.touch_lo) + self.slope_hi**2 * (
            self.touch_hi - self.alpha_star
        )
        return curved + linear


def _tangency_tau(curve: PhiCurve, alpha_star: float, beta_star: float, side: str) -> float:
    """Parametric coordinate where the line from (alpha*, beta*) is tangent.

    The residual g(tau) = phi'(tau)(alpha* - alpha(tau)) - (beta* - beta(tau))
    is monotone on each side of alpha*; bisect until the alpha bracket is
    narrower than 1e-10.
    """

    def g(tau):
        return curve.deriv_of_tau(tau) * (alpha_star - curve.alpha_of_tau(tau)) - (
            beta_star - curve.beta_of_tau(tau)
        )

    t_star = curve.tau_of_alpha(alpha_star)
    if side == "lo":
        t_a, t_b = t_star + 1e-9, t_star + 4.0
        while g(t_b) <= 0.0:
            t_b += 4.0
            if t_b > 1e5:
                raise ValueError("left tangency abscissa underflows double precision")
    else:
        t_a, t_b = t_star - 4.0, t_star - 1e-9
        while g(t_a) <= 0.0:
            t_a -= 4.0
            if t_a < -1e5:
                raise ValueError("right tangency abscissa overflows toward alpha = 1")
    # invariant: g > 0 at the far end, g < 0 next to alpha*
    far_is_b = side == "lo"
    for _ in range(200):
        mid = 0.5 * (t_a + t_b)
        if (g(mid) > 0.0) == far_is_b:
            t_b = mid
        else:
            t_a = mid
        if abs(curve.alpha_of_tau(t_a) - curve.alpha_of_tau(t_b)) < 1e-10:
            break
    return 0.5 * (t_a + t_b)


def upper_concave_envelope(lam: float, exterior) -> EnvelopeCurve:
    """Envelope of the ROC curve and a strictly exterior point.

    Finds tangency abscissas touch_lo < alpha* < touch_hi by bisection (to
    1e-10 in alpha) and returns the piecewise curve. Points on or below the
    curve raise NotExterior; boundary alpha* or beta* >= 1 are rejected since
    they must be shifted off the boundary first (``shift_boundary_point``).
    """
    alpha_star, beta_star = float(exterior[0]), float(exterior[1])
    if not 0.0 < alpha_star < 1.0:
        raise ValueError("alpha_star on the boundary: shift the point inward first")
    if beta_star >= 1.0:
        raise ValueError("beta_star on the boundary: shift the point inward first")
    curve = PhiCurve(lam)
    base = curve(alpha_star)
    if beta_star <= base:
        raise NotExterior(f"point ({alpha_star}, {beta_star}) is not above the curve (phi = {base:.6g})")

    tau_lo = _tangency_tau(curve, alpha_star, beta_star, "lo")
    tau_hi = _tangency_tau(curve, alpha_star, beta_star, "hi")
    touch_lo = float(curve.alpha_of_tau(tau_lo))
    touch_hi = float(curve.alpha_of_tau(tau_hi))
    # chord slopes through the exterior point: equal to the curve slopes at
    # the tangencies up to the bisection tolerance, and make psi(alpha*)
    # exactly beta*
    slope_lo = (beta_star - float(curve.beta_of_tau(tau_lo))) / (alpha_star - touch_lo)
    slope_hi = (float(curve.beta_of_tau(tau_hi)) - beta_star) / (touch_hi - alpha_star)
    return EnvelopeCurve(
        curve=curve,
        alpha_star=alpha_star,
        beta_star=beta_star,
        touch_lo=touch_lo,
        touch_hi=touch_hi,
        slope_lo=float(slope_lo),
        slope_hi=float(slope_hi),
    )


def pushout_check(env: EnvelopeCurve, margin: float = 10.0 * QUAD_TOL):
    """Numeric confirmation that the envelope has strictly larger value.

    Returns (val_psi, val_phi, strict). Raises MarginTooSmall when the
    squared-value gap is below ``margin`` (exterior point numerically too
    close to the curve for a trustworthy strict inequality).
    """
    sq_psi = env.sq_slope_integral()
    sq_phi = env.curve.sq_slope_integral(0.0, 1.0)
    if sq_psi - sq_phi < margin:
        raise MarginTooSmall(
            f"squared-value gap {sq_psi - sq_phi:.3g} below margin {margin:.3g}"
        )
    return float(np.sqrt(sq_psi)), float(np.sqrt(sq_phi)), True


# ---------------------------------------------------------------------------
# envelope -> polyline (discretize, then perturb strictly below)
# ---------------------------------------------------------------------------


def _tail_tau(curve: PhiCurve, tau_inner: float, budget: float, side: str) -> float:
    """Outermost parametric coordinate whose tail integral is within budget.

    side 'lo': find tau1 >= tau_inner with integral over alpha in (0, a1]
    at most budget; side 'hi' mirrors at the right endpoint. Returns
    tau_inner itself when the budget is already met at the tangency (the
    curved stretch then degenerates to the tangency point alone).
    """

    def tail(tau):
        if side == "lo":
            return curve.sq_slope_integral(0.0, float(curve.alpha_of_tau(tau)))
        return curve.sq_slope_integral(float(curve.alpha_of_tau(tau)), 1.0)

    sign = 1.0 if side == "lo" else -1.0
    if tail(tau_inner) <= budget:
        return tau_inner
    lo, hi = tau_inner, tau_inner + sign * 2.0
    while tail(hi) > budget:
        hi += sign * 2.0
        if abs(hi) > 60.0:
            raise BudgetInfeasible("tail budget unreachable within double precision")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if tail(mid) > budget:
            lo = mid
        else:
            hi = mid
    return hi


def discretize_envelope(
    env: EnvelopeCurve, eps_budget: float, gamma: float = 0.05, max_points: int = 10**6
) -> RocPolyline:
    """Inscribe a concave-position polyline in the envelope.

    The outermost interior points are placed so each tail integral of the
    squared slope is at most eps_budget/6; the tangency abscissas and the
    exterior point always appear; the curved stretches are partitioned so
    consecutive slopes satisfy psi'(a_i) <= (1+gamma) psi'(a_{i+1}), which
    keeps the inscribed squared value within 2*eps_budget/3 of the envelope's.
    Collinear intermediate points are dropped.
    """
    if eps_budget <= 0:
        raise ValueError("eps_budget must be positive")
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    curve = env.curve
    tau_touch_lo = curve.tau_of_alpha(env.touch_lo)  # large tau end (small alpha)
    tau_touch_hi = curve.tau_of_alpha(env.touch_hi)
    tau_first = _tail_tau(curve, tau_touch_lo, eps_budget / 6.0, "lo")
    tau_last = _tail_tau(curve, tau_touch_hi, eps_budget / 6.0, "hi")

    # uniform parametric step keeps the slope ratio of consecutive curve
    # points at most 1 + gamma
    step = np.log1p(gamma) / curve.shift

    def grid(t_outer, t_inner):
        span = abs(t_outer - t_inner)
        if span < 1e-12:
            return np.array([t_inner])
        m = max(1, int(np.ceil(span / step)))
        if m > max_points:
            raise BudgetInfeasible(f"partition would need {m} points (> {max_points})")
        return np.linspace(t_outer, t_inner, m + 1)

    taus_left = grid(tau_first, tau_touch_lo)
    taus_right = grid(tau_touch_hi, tau_last)

    pts = [(0.0, 0.0)]
    pts += [(float(curve.alpha_of_tau(t)), float(curve.beta_of_tau(t))) for t in taus_left]
    anchor = len(pts)  # index of the exterior point
    pts.append((env.alpha_star, env.beta_star))
    pts += [(float(curve.alpha_of_tau(t)), float(curve.beta_of_tau(t))) for t in taus_right]
    pts.append((1.0, 1.0))
    arr = np.array(pts)

    # drop collinear interior points (slope partition identity keeps val);
    # the tangency and exterior anchors always stay
    protected = {anchor - 1, anchor, anchor + 1}
    keep = [0]
    for i in range(1, len(arr) - 1):
        s_prev = (arr[i, 1] - arr[keep[-1], 1]) / (arr[i, 0] - arr[keep[-1], 0])
        s_next = (arr[i + 1, 1] - arr[i, 1]) / (arr[i + 1, 0] - arr[i, 0])
        if i in protected or abs(s_prev - s_next) > 1e-12 * max(s_prev, s_next):
            keep.append(i)
    keep.append(len(arr) - 1)
    return RocPolyline(arr[keep])


def perturb_points(u: RocPolyline, gamma: float = 0.02) -> RocPolyline:
    """Lower the interior points of ``u`` strictly below the envelope.

    Each interior ordinate drops by the largest safe amount: at most a gamma
    fraction of the incoming chord rise, and small enough that the chord from
    the left neighbour stays steeper than the chord to the right neighbour.
    The output is again in concave position, with value at least
    (1 - gamma) times the input's.
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    pts = u.points.copy()
    m = u.slopes
    widths = np.diff(pts[:, 0])
    for i in range(1, len(pts) - 1):
        cap_ratio = gamma * m[i - 1] * widths[i - 1]
        cap_concave = (m[i - 1] - m[i]) / (1.0 / widths[i - 1] + 1.0 / widths[i])
        delta = 0.5 * min(cap_ratio, cap_concave)
        lowered = pts[i, 1] - delta
        if not lowered < pts[i, 1]:
            raise MarginTooSmall(f"point {i}: slope gap too small to lower strictly")
        pts[i, 1] = lowered
    return RocPolyline(pts)


# ---------------------------------------------------------------------------
# second-moment feasibility
# ---------------------------------------------------------------------------


def feasibility_bound_check(point, l2norm_sq: float) -> bool:
    """Whether (alpha, beta) satisfies beta^2/alpha + (1-beta)^2/(1-alpha)
    <= l2norm_sq, the constraint every achievable error pair must meet."""
    alpha, beta = float(point[0]), float(point[1])
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise ValueError("feasibility bound applies to interior points only")
    lhs = beta * beta / alpha + (1.0 - beta) ** 2 / (1.0 - alpha)
    return bool(lhs <= l2norm_sq)


def shift_boundary_point(point, mixture_prob: float):
    """Move a point off the boundary by mixing with the always-accept test:
    with probability p output the alternative, else run the original test."""
    if not 0.0 < mixture_prob < 1.0:
        raise ValueError("mixture_prob must be in (0, 1)")
    a, b = float(point[0]), float(point[1])
    p = mixture_prob
    return (p + (1.0 - p) * a, p + (1.0 - p) * b)
