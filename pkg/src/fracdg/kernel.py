"""Weakly singular kernel machinery for the fractional time operator.

The operator of order alpha in (-1, 0) acts on a function v through

    (B v)(t) = d/dt int_0^t w(t-s) v(s) ds,    w(t) = t^alpha / Gamma(alpha+1).

For a piecewise polynomial v with breakpoints t_0 < t_1 < ... integration by
parts turns this into the jump representation

    (B v)(t) = w(t) v(0+) + sum_{t_i < t} w(t - t_i) [v]^i
               + int_0^t w(t - s) v'(s) ds,

where [v]^i = v(t_i+) - v(t_i-).  Every integral a DG time stepper then needs
is a polynomial against a pure power kernel.  This module evaluates those
integrals with Gauss-Jacobi rules (exact for the singular near-diagonal
cases), differences of such rules, or Gauss-Legendre once the singularity is
well separated from the integration interval, and assembles them into the
memory-matrix blocks that discretize the history term.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from numpy.polynomial import legendre as _leg
from scipy.special import roots_jacobi

__all__ = [
    "FractionalOrder",
    "MomentTable",
    "MemoryBlock",
    "coercivity_constants",
    "omega_weight",
    "gauss_jacobi_rule",
    "frac_moment",
    "memory_block",
    "memory_form",
    "l2_form",
    "frac_derivative_values",
    "fractional_integral_values",
    "MAX_MOMENT_DEGREE",
]

# Degree cap for moment tables; far beyond anything the hp studies use.
MAX_MOMENT_DEGREE = 64


def coercivity_constants(alpha):
    """Coercivity and continuity constants of the fractional operator.

    c_alpha = cos(alpha pi/2) / pi^alpha * |alpha|^(-alpha) / (1-alpha)^(1-alpha)
    d_alpha = 1 / cos(alpha pi/2)

    The bilinear form Q(v, w) = int_0^T (B v) w dt satisfies
    Q(v, v) >= c_alpha T^alpha int v^2 and |Q(v, w)|^2 <= d_alpha^2 Q(v,v) Q(w,w).
    Both constants tend to 1 as alpha -> 0-.
    """
    if not -1.0 < alpha < 0.0:
        raise ValueError(f"fractional order alpha must lie in (-1, 0), got {alpha}")
    cos_half = math.cos(alpha * math.pi / 2.0)
    c_alpha = (cos_half / math.pi**alpha) * abs(alpha) ** (-alpha) / (1.0 - alpha) ** (1.0 - alpha)
    d_alpha = 1.0 / cos_half
    return c_alpha, d_alpha


@dataclass(frozen=True)
class FractionalOrder:
    """The order alpha in (-1, 0) together with its derived constants."""

    alpha: float
    c_alpha: float
    d_alpha: float

    @classmethod
    def of(cls, alpha):
        alpha = float(alpha)
        c_alpha, d_alpha = coercivity_constants(alpha)
        return cls(alpha, c_alpha, d_alpha)

    def __post_init__(self):
        if not -1.0 < self.alpha < 0.0:
            raise ValueError(f"fractional order alpha must lie in (-1, 0), got {self.alpha}")


def _alpha_of(order):
    return order.alpha if isinstance(order, FractionalOrder) else float(order)


def omega_weight(order, beta_shift, t):
    """Kernel weight w_{alpha+1+shift}(t) = t^(alpha+shift) / Gamma(alpha+1+shift).

    beta_shift 0 gives the convolution kernel itself, beta_shift 1 its
    antiderivative (the weight that multiplies jump terms after one
    integration).
    """
    alpha = _alpha_of(order)
    if beta_shift not in (0, 1):
        raise ValueError(f"beta_shift must be 0 or 1, got {beta_shift}")
    if t <= 0.0:
        raise ValueError(f"omega weight requires t > 0, got t={t}")
    e = alpha + beta_shift
    return t**e / math.gamma(e + 1.0)


# ---------------------------------------------------------------------------
# Quadrature rules
# ---------------------------------------------------------------------------


@lru_cache(maxsize=4096)
def _jacobi_left_ref(npoints, exponent):
    # weight (1+x)^exponent on [-1, 1]
    x, w = roots_jacobi(npoints, 0.0, float(exponent))
    return x, w


@lru_cache(maxsize=4096)
def _jacobi_right_ref(npoints, exponent):
    # weight (1-x)^exponent on [-1, 1]
    x, w = roots_jacobi(npoints, float(exponent), 0.0)
    return x, w


@lru_cache(maxsize=1024)
def _legendre_ref(npoints):
    x, w = np.polynomial.legendre.leggauss(npoints)
    return x, w


def gauss_jacobi_rule(npoints, exponent, interval):
    """Nodes and weights integrating (s-a)^exponent * poly over (a, b).

    Exact for polynomials up to degree 2*npoints - 1.
    """
    if npoints < 1:
        raise ValueError(f"npoints must be >= 1, got {npoints}")
    if exponent <= -1.0:
        raise ValueError(f"weight exponent must exceed -1, got {exponent}")
    a, b = interval
    if not b > a:
        raise ValueError(f"empty interval ({a}, {b})")
    x, w = _jacobi_left_ref(int(npoints), float(exponent))
    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    weights = w * half ** (exponent + 1.0)
    return nodes, weights


def _gauss_jacobi_right(npoints, exponent, a, b):
    # weight (b-s)^exponent on (a, b)
    x, w = _jacobi_right_ref(int(npoints), float(exponent))
    half = 0.5 * (b - a)
    nodes = a + half * (x + 1.0)
    weights = w * half ** (exponent + 1.0)
    return nodes, weights


def _gauss_legendre(npoints, a, b):
    x, w = _legendre_ref(int(npoints))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), w * half


# Singularity-to-interval distance ratio below which the difference-of-rules
# closed form is used; above it plain Gauss-Legendre converges geometrically.
# Diff-of-Jacobi cancellation grows like rho^deg with rho the Bernstein
# ellipse parameter of the singular point; restricting the branch to
# rho < 1.25 bounds the loss at 1.25^64 never arising in practice and
# ~1.25^8 = 6 ulps for the degrees the stepper uses.  Beyond that the
# Gauss-Legendre error rho^(-2n) converges fast enough that
# n = deg//2 + 2 + 22/ln(rho) points reach machine precision.
_DIFF_RHO = 1.25


def _gl_point_count(deg, rho):
    return deg // 2 + 2 + math.ceil(22.0 / math.log(rho))


def power_rule(a, b, z, beta, deg):
    """Signed quadrature (nodes, weights) for int_a^b F(s) |s-z|^beta ds.

    The singular point z must lie outside (a, b): z <= a (kernel (s-z)^beta)
    or z >= b (kernel (z-s)^beta).  Exact for polynomials F up to degree
    `deg` when a Jacobi branch applies; the Gauss-Legendre branch resolves
    the kernel to near machine precision by scaling its point count with
    the distance of z from the interval.

    Branches on A = dist(z, nearest endpoint) and the ellipse parameter
    rho = x + sqrt(x^2 - 1), x = 1 + 2A/(b-a):
      A == 0          single Gauss-Jacobi rule (exact),
      rho < 1.25      difference of two Gauss-Jacobi rules anchored at z
                      (exact; some nodes fall just outside (a,b), polynomial
                      evaluation there is legitimate),
      otherwise       Gauss-Legendre with a rho-dependent point count.
    """
    if beta <= -1.0:
        raise ValueError(f"weight exponent must exceed -1, got {beta}")
    npts = deg // 2 + 1
    if z <= a:
        A = a - z
        if A == 0.0:
            return gauss_jacobi_rule(npts, beta, (a, b))
        x = 1.0 + 2.0 * A / (b - a)
        rho = x + math.sqrt(x * x - 1.0)
        if rho < _DIFF_RHO:
            n_full, w_full = gauss_jacobi_rule(npts, beta, (z, b))
            n_cut, w_cut = gauss_jacobi_rule(npts, beta, (z, a))
            return np.concatenate([n_full, n_cut]), np.concatenate([w_full, -w_cut])
        nodes, w = _gauss_legendre(_gl_point_count(deg, rho), a, b)
        return nodes, w * (nodes - z) ** beta
    if z >= b:
        A = z - b
        if A == 0.0:
            return _gauss_jacobi_right(npts, beta, a, b)
        x = 1.0 + 2.0 * A / (b - a)
        rho = x + math.sqrt(x * x - 1.0)
        if rho < _DIFF_RHO:
            n_full, w_full = _gauss_jacobi_right(npts, beta, a, z)
            n_cut, w_cut = _gauss_jacobi_right(npts, beta, b, z)
            return np.concatenate([n_full, n_cut]), np.concatenate([w_full, -w_cut])
        nodes, w = _gauss_legendre(_gl_point_count(deg, rho), a, b)
        return nodes, w * (z - nodes) ** beta
    raise ValueError(f"singular point z={z} lies inside the interval ({a}, {b})")


# ---------------------------------------------------------------------------
# Local Legendre basis helpers
# ---------------------------------------------------------------------------


def _map_to_reference(s, a, b):
    return (2.0 * np.asarray(s, dtype=float) - (a + b)) / (b - a)


@lru_cache(maxsize=256)
def _legendre_coeff_rows(max_degree):
    # row k holds the Legendre coefficient vector of P_k
    eye = np.eye(max_degree + 1)
    return eye


def legendre_values(s, a, b, max_degree):
    """Matrix of mapped Legendre values, column k = P_k(ref(s)), k <= max_degree."""
    x = _map_to_reference(s, a, b)
    return _leg.legvander(x, max_degree)


def legendre_derivative_values(s, a, b, max_degree, nderiv):
    """Values of the nderiv-th derivative of the mapped Legendre basis.

    Returns matrix with column k = d^nderiv/ds^nderiv P_k(ref(s)).  The chain
    rule contributes (2/(b-a))^nderiv per derivative.
    """
    x = np.atleast_1d(_map_to_reference(s, a, b))
    scale = (2.0 / (b - a)) ** nderiv
    out = np.zeros((x.size, max_degree + 1))
    for k in range(max_degree + 1):
        coeff = _leg.legder(np.eye(max_degree + 1)[k], nderiv) if nderiv else np.eye(max_degree + 1)[k]
        if coeff.size:
            out[:, k] = _leg.legval(x, coeff)
    return out * scale


# ---------------------------------------------------------------------------
# Moments of the kernel against the local basis
# ---------------------------------------------------------------------------


def frac_moment(a, b, t, k, alpha, max_degree=MAX_MOMENT_DEGREE):
    """int_a^b (t-s)^alpha P_k(s) ds with P_k the Legendre basis on (a, b).

    For a < t < b the upper limit is replaced by t (the integrand is only
    defined for s < t).
    """
    if t <= a:
        raise ValueError(f"evaluation time t={t} must exceed the interval start a={a}")
    if k < 0 or k > max_degree:
        raise ValueError(f"moment degree k={k} outside supported range 0..{max_degree}")
    upper = min(b, t)
    nodes, weights = power_rule(a, upper, t, alpha, k)
    vals = legendre_values(nodes, a, b, k)[:, k]
    return float(weights @ vals)


@dataclass(frozen=True)
class MomentTable:
    """Kernel moments mu_k(t) = int_a^b (t-s)^alpha P_k(s) ds for k <= degrees."""

    interval: tuple
    degrees: int
    alpha: float

    def __post_init__(self):
        a, b = self.interval
        if not b > a:
            raise ValueError(f"empty interval ({a}, {b})")
        if self.degrees < 0 or self.degrees > MAX_MOMENT_DEGREE:
            raise ValueError(f"moment table degree {self.degrees} outside 0..{MAX_MOMENT_DEGREE}")

    def values(self, t):
        a, b = self.interval
        if t <= a:
            raise ValueError(f"evaluation time t={t} must exceed the interval start a={a}")
        upper = min(b, t)
        nodes, weights = power_rule(a, upper, t, self.alpha, self.degrees)
        vander = legendre_values(nodes, a, b, self.degrees)
        return vander.T @ weights


# ---------------------------------------------------------------------------
# Memory blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MemoryBlock:
    """Discretized history contribution of source interval j to target n.

    matrix[i, l] = int_{I_n} P_i(t) * [int_{I_j cap (0,t)} w(t-s) P_l'(s) ds] dt
    jump_column[i] = int_{I_n} P_i(t) w(t - t_{j-1}) dt

    (bases mapped to their intervals; w the convolution kernel including the
    1/Gamma(alpha+1) factor).  jump_column multiplies v(0+) for j=1 and the
    jump of v at t_{j-1} for j >= 2.
    """

    source: int
    target: int
    matrix: np.ndarray
    jump_column: np.ndarray


# reciprocal Gamma factor applied to every kernel integral
def _kernel_scale(alpha):
    return 1.0 / math.gamma(alpha + 1.0)


def _local_block(tl, tr, alpha, p_n, p_j):
    """Exact j == n block via the Duffy-type split of the self-convolution.

    With tau = t - t_{n-1} and s = t_{n-1} + tau*xi the double integral
    int_{I_n} P_i(t) int_{t_{n-1}}^t (t-s)^alpha P_l'(s) ds dt becomes
    int_0^k tau^(alpha+1) P_i(t_{n-1}+tau) [int_0^1 (1-xi)^alpha P_l'(...) dxi] dtau,
    a polynomial against each weight, so tensor Gauss-Jacobi is exact.
    """
    k = tr - tl
    if p_j == 0:
        return np.zeros((p_n + 1, p_j + 1))
    n_inner = (p_j - 1) // 2 + 1
    n_outer = (p_n + p_j - 1) // 2 + 1
    xi, w_xi = _jacobi_right_ref(n_inner, alpha)
    xi = 0.5 * (xi + 1.0)
    w_xi = w_xi * 0.5 ** (alpha + 1.0)
    tau, w_tau = gauss_jacobi_rule(n_outer, alpha + 1.0, (0.0, k))
    # derivative basis at s = tl + tau_q * xi_r, target basis at t = tl + tau_q
    s_grid = tl + tau[:, None] * xi[None, :]
    dvals = legendre_derivative_values(s_grid.ravel(), tl, tr, p_j, 1).reshape(tau.size, xi.size, p_j + 1)
    inner = np.einsum("r,qrl->ql", w_xi, dvals)
    tvals = legendre_values(tl + tau, tl, tr, p_n)
    mat = np.einsum("q,qi,ql->il", w_tau, tvals, inner)
    return mat * _kernel_scale(alpha)


# Layer ratio for the graded t-quadrature of near blocks.  Each layer sees
# the kernel singularity at ellipse parameter rho >= 1.87, and sigma^19
# puts the truncated sliver below machine precision.
_NEAR_SIGMA = 0.15


def _near_block(sl, sr, tl, tr, alpha, p_n, p_j):
    """Block for intervals too close for smooth tensor quadrature.

    For each time node the s-integral against the kernel is one signed
    power rule, stable at any ratio of step sizes.  The inner integral
    loses analyticity in t as t approaches the source interval, so the
    t-integral uses Gauss-Legendre on layers grading geometrically toward
    t_{n-1}; the layer ladder stops at the gap (or at a machine-negligible
    sliver when the intervals are adjacent, which is dropped).
    """
    if p_j == 0:
        return np.zeros((p_n + 1, p_j + 1))
    gap = tl - sr
    k_n = tr - tl
    offsets = [k_n]
    while offsets[-1] * _NEAR_SIGMA > max(gap, 1e-16 * k_n):
        offsets.append(offsets[-1] * _NEAR_SIGMA)
    offsets.append(0.0)
    deg_proxy = p_n + p_j
    total = np.zeros((p_n + 1, p_j + 1))
    for hi_off, lo_off in zip(offsets[:-1], offsets[1:]):
        width = hi_off - lo_off
        if width <= 1e-15 * k_n:
            continue
        lo = tl + lo_off
        # singularity sits at sr = tl - gap, below the layer by gap + lo_off
        x = 1.0 + 2.0 * (gap + lo_off) / width
        rho = x + math.sqrt(max(x * x - 1.0, 0.0))
        t_nodes, t_w = _gauss_legendre(_gl_point_count(deg_proxy, rho), lo, lo + width)
        tvals = legendre_values(t_nodes, tl, tr, p_n)
        inner = np.empty((t_nodes.size, p_j + 1))
        for q, t in enumerate(t_nodes):
            s_nodes, s_w = power_rule(sl, sr, t, alpha, p_j - 1)
            inner[q] = s_w @ legendre_derivative_values(s_nodes, sl, sr, p_j, 1)
        total += np.einsum("q,qi,ql->il", t_w, tvals, inner)
    return total * _kernel_scale(alpha)


def _far_block(sl, sr, tl, tr, alpha, p_n, p_j, far_padding):
    """Tensor Gauss-Legendre for well-separated intervals (smooth kernel)."""
    if p_j == 0:
        return np.zeros((p_n + 1, p_j + 1))
    npts = max(p_n, p_j, 1) + far_padding
    t_nodes, t_w = _gauss_legendre(npts, tl, tr)
    s_nodes, s_w = _gauss_legendre(npts, sl, sr)
    kern = (t_nodes[:, None] - s_nodes[None, :]) ** alpha
    tvals = legendre_values(t_nodes, tl, tr, p_n)
    gvals = legendre_derivative_values(s_nodes, sl, sr, p_j, 1)
    mat = np.einsum("q,r,qr,qi,rl->il", t_w, s_w, kern, tvals, gvals)
    return mat * _kernel_scale(alpha)


def memory_block(mesh, j, n, order, degrees=None, separation_threshold=2.0, far_padding=4):
    """Memory-matrix block of source interval j acting on target interval n.

    Intervals are 1-based.  `degrees` optionally overrides (p_j, p_n) from the
    mesh.  Near-diagonal blocks (and the jump columns) use exact closed forms;
    once the gap t_{n-1} - t_j reaches separation_threshold times the larger
    of the two step sizes, the smooth Gauss-Legendre branch takes over with
    max degree + far_padding points per direction.
    """
    if not 1 <= j <= n <= mesh.interval_count:
        raise IndexError(f"interval pair (j={j}, n={n}) outside 1..{mesh.interval_count}")
    alpha = _alpha_of(order)
    tl, tr = mesh.interval(n)
    sl, sr = mesh.interval(j)
    if degrees is None:
        p_j, p_n = mesh.degree(j), mesh.degree(n)
    else:
        p_j, p_n = degrees
    # jump column: kernel anchored at the source interval's left node
    nodes, weights = power_rule(tl, tr, sl, alpha, p_n)
    jump_col = (legendre_values(nodes, tl, tr, p_n).T @ weights) * _kernel_scale(alpha)
    if j == n:
        mat = _local_block(tl, tr, alpha, p_n, p_j)
    else:
        gap = tl - sr
        if gap >= separation_threshold * max(tr - tl, sr - sl):
            mat = _far_block(sl, sr, tl, tr, alpha, p_n, p_j, far_padding)
        else:
            mat = _near_block(sl, sr, tl, tr, alpha, p_n, p_j)
    return MemoryBlock(j, n, mat, jump_col)


# ---------------------------------------------------------------------------
# Assembled forms and pointwise evaluation (diagnostics and property tests)
# ---------------------------------------------------------------------------


def _jump_values(coeffs):
    """Values multiplying each jump column: v(0+), then [v]^1, [v]^2, ..."""
    vals = np.empty(len(coeffs))
    left = None
    for i, c in enumerate(coeffs):
        signs = (-1.0) ** np.arange(len(c))
        right_limit = float(signs @ c)
        vals[i] = right_limit if left is None else right_limit - left
        left = float(np.sum(c))
    return vals


def memory_form(mesh, order, coeffs_v, coeffs_w, separation_threshold=2.0, far_padding=4):
    """Bilinear form int_0^T (B v)(t) w(t) dt for broken Legendre coefficients."""
    jumps = _jump_values(coeffs_v)
    total = 0.0
    for n in range(1, mesh.interval_count + 1):
        w_n = coeffs_w[n - 1]
        for j in range(1, n + 1):
            blk = memory_block(
                mesh, j, n, order,
                degrees=(len(coeffs_v[j - 1]) - 1, len(w_n) - 1),
                separation_threshold=separation_threshold,
                far_padding=far_padding,
            )
            total += float(w_n @ (blk.matrix @ coeffs_v[j - 1] + blk.jump_column * jumps[j - 1]))
    return total


def l2_form(mesh, coeffs_v, coeffs_w):
    """int_0^T v w dt for broken Legendre coefficients (orthogonality-exact)."""
    total = 0.0
    for n in range(1, mesh.interval_count + 1):
        a, b = mesh.interval(n)
        v, w = coeffs_v[n - 1], coeffs_w[n - 1]
        size = min(len(v), len(w))
        ell = np.arange(size)
        total += float((b - a) * np.sum(v[:size] * w[:size] / (2.0 * ell + 1.0)))
    return total


def frac_derivative_values(mesh, order, coeffs, times):
    """Pointwise (B v)(t) for a broken Legendre polynomial via the jump form."""
    alpha = _alpha_of(order)
    scale = _kernel_scale(alpha)
    jumps = _jump_values(coeffs)
    nodes_arr = mesh.nodes
    out = np.empty(len(times))
    for idx, t in enumerate(times):
        if t <= 0.0 or t > mesh.horizon:
            raise ValueError(f"evaluation time {t} outside (0, T]")
        acc = 0.0
        for j in range(1, mesh.interval_count + 1):
            a = nodes_arr[j - 1]
            if a >= t:
                break
            acc += jumps[j - 1] * (t - a) ** alpha * scale
            p_j = len(coeffs[j - 1]) - 1
            if p_j == 0:
                continue
            b = min(nodes_arr[j], t)
            qn, qw = power_rule(a, b, t, alpha, p_j - 1)
            dvals = legendre_derivative_values(qn, nodes_arr[j - 1], nodes_arr[j], p_j, 1)
            acc += scale * float(qw @ (dvals @ coeffs[j - 1]))
        out[idx] = acc
    return out


def fractional_integral_values(alpha, f, times, singular_exponent=None, npoints=32):
    """Fractional integral int_0^t (t-s)^(-alpha-1) f(s) ds / Gamma(-alpha).

    The inverse of the order-alpha operator.  `singular_exponent` declares an
    algebraic singularity f(s) ~ s^e at the origin so the quadrature can
    absorb it into a two-sided Jacobi weight.
    """
    alpha = _alpha_of(alpha)
    if not -1.0 < alpha < 0.0:
        raise ValueError(f"fractional order alpha must lie in (-1, 0), got {alpha}")
    e = 0.0 if singular_exponent is None else float(singular_exponent)
    x, w = roots_jacobi(npoints, -alpha - 1.0, e)
    out = np.empty(len(times))
    inv_gamma = 1.0 / math.gamma(-alpha)
    for idx, t in enumerate(times):
        if t < 0.0:
            raise ValueError(f"fractional integral requires t >= 0, got {t}")
        if t == 0.0:
            out[idx] = 0.0
            continue
        half = 0.5 * t
        s = half * (x + 1.0)
        weights = w * half ** (-alpha - 1.0 + e + 1.0)
        if e == 0.0:
            vals = np.array([f(si) for si in s])
        else:
            vals = np.array([f(si) / si**e for si in s])
        out[idx] = inv_gamma * float(weights @ vals)
    return out
