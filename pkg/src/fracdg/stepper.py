"""DG time stepping for the scalar modes of u' + B A u = f.

Each interval solves a small dense system per mode.  In the Legendre
basis on I_n the matrix is

    K_il = (-1)^{i+l} + T_il + lambda (D_il + J_i (-1)^l),

where the first term is the upwind pairing w(t_{n-1}+) against the new
right limit, T is the transport term int P_l' P_i, D is the local memory
block and J its jump column.  Everything already computed on intervals
1..n-1 enters the right-hand side through the accumulated memory load,
so a full march costs O(N^2) block evaluations shared across modes.
"""

import math
from dataclasses import dataclass

import numpy as np

from .kernel import (
    FractionalOrder,
    _alpha_of,
    _gauss_legendre,
    fractional_integral_values,
    gauss_jacobi_rule,
    legendre_values,
    memory_block,
    power_rule,
)
from .problems import PowerSum

__all__ = [
    "ModeProblem",
    "DgSolution",
    "StabilityReport",
    "mode_problems",
    "assemble_local_system",
    "solve",
    "pi_projection",
    "stability_report",
]


@dataclass(frozen=True)
class ModeProblem:
    """One scalar mode: u' + lambda B u = f with initial value u0."""

    eigenvalue: float
    forcing: object
    initial_value: float
    forcing_singularity: float = None

    def __post_init__(self):
        if self.eigenvalue < 0.0:
            raise ValueError(f"eigenvalue must be >= 0, got {self.eigenvalue}")
        if self.forcing_singularity is not None and self.forcing_singularity <= -1.0:
            raise ValueError("declared forcing singularity must be integrable (> -1)")


def mode_problems(problem):
    """ModeProblem list for a manufactured problem's components."""
    return [
        ModeProblem(m.eigenvalue, m.forcing, m.profile.at_zero(), m.singular_exponent)
        for m in problem.modes
    ]


def _parity(p):
    return (-1.0) ** np.arange(p + 1)


def _transport_matrix(p):
    # int_ref P_l' P_i = 2 when l > i with odd difference, else 0
    mat = np.zeros((p + 1, p + 1))
    for i in range(p + 1):
        mat[i, i + 1 :: 2] = 2.0
    return mat


def _call_vec(f, x):
    vals = np.asarray(f(x), dtype=float)
    if vals.shape != x.shape:
        vals = np.array([float(f(xi)) for xi in x], dtype=float)
    return vals


def _interval_load(forcing, singularity, a, b, p, is_first, extra=6):
    """Load vector int_In f P_i dt; exact for power-sum forcings."""
    if forcing is None:
        return np.zeros(p + 1)
    if isinstance(forcing, PowerSum):
        load = np.zeros(p + 1)
        for coeff, exponent in forcing.terms:
            nodes, weights = power_rule(a, b, 0.0, exponent, p)
            load += coeff * (weights @ legendre_values(nodes, a, b, p))
        return load
    if is_first and singularity is not None and singularity != 0.0:
        nodes, weights = gauss_jacobi_rule(p + extra, singularity, (a, b))
        vals = _call_vec(forcing, nodes) / nodes**singularity
    else:
        nodes, weights = _gauss_legendre(p + extra, a, b)
        vals = _call_vec(forcing, nodes)
    return (weights * vals) @ legendre_values(nodes, a, b, p)


def assemble_local_system(problem, mesh, n, order, history=None, incoming_trace=None):
    """Dense (p_n+1)-square system and right-hand side for interval n.

    `history` is the accumulated memory load of source intervals 1..n-1
    (their derivative blocks and jump columns applied to known data); the
    known part of the jump at t_{n-1} is folded in here via the local
    jump column, so callers only supply the incoming trace.
    """
    alpha = _alpha_of(order)
    p = mesh.degree(n)
    a, b = mesh.interval(n)
    if incoming_trace is None:
        if n != 1:
            raise ValueError("incoming trace required for n >= 2")
        incoming_trace = problem.initial_value
    if history is None:
        history = np.zeros(p + 1)
    parity = _parity(p)
    local = memory_block(mesh, n, n, order)
    lam = problem.eigenvalue
    matrix = (
        np.outer(parity, parity)
        + _transport_matrix(p)
        + lam * (local.matrix + np.outer(local.jump_column, parity))
    )
    rhs = incoming_trace * parity + _interval_load(
        problem.forcing, problem.forcing_singularity, a, b, p, n == 1
    )
    rhs -= lam * np.asarray(history, dtype=float)
    if n >= 2:
        # known half of the jump [U]^{n-1} = U_+ - U_-
        rhs += lam * local.jump_column * incoming_trace
    return matrix, rhs


@dataclass(frozen=True)
class DgSolution:
    """Piecewise-Legendre solution: per interval a (p_n+1, M) block."""

    mesh: object
    initial_values: np.ndarray
    coefficients: tuple

    def __post_init__(self):
        for n, block in enumerate(self.coefficients, start=1):
            if block.shape[0] != self.mesh.degree(n) + 1:
                raise ValueError(f"coefficient block {n} does not match mesh degree")

    @property
    def mode_count(self):
        return self.initial_values.size

    def coefficients_for(self, n):
        if not 1 <= n <= self.mesh.interval_count:
            raise IndexError(f"interval {n} outside 1..{self.mesh.interval_count}")
        return self.coefficients[n - 1]

    def evaluate(self, t):
        """Values at times t, shape (len(t), modes); right-closed intervals."""
        scalar = np.isscalar(t) or np.ndim(t) == 0
        t = np.atleast_1d(np.asarray(t, dtype=float))
        if np.any(t < 0.0) or np.any(t > self.mesh.horizon):
            raise ValueError("evaluation time outside [0, T]")
        idx = np.clip(
            np.searchsorted(self.mesh.nodes, t, side="left"),
            1,
            self.mesh.interval_count,
        )
        out = np.empty((t.size, self.mode_count))
        for n in np.unique(idx):
            sel = idx == n
            a, b = self.mesh.interval(int(n))
            basis = legendre_values(t[sel], a, b, self.mesh.degree(int(n)))
            out[sel] = basis @ self.coefficients[n - 1]
        return out[0] if scalar else out

    def left_traces(self):
        """U(t_n-) for n = 1..N, shape (N, modes)."""
        return np.vstack([block.sum(axis=0) for block in self.coefficients])

    def right_traces(self):
        """U(t_{n-1}+) for n = 1..N, shape (N, modes)."""
        return np.vstack(
            [_parity(block.shape[0] - 1) @ block for block in self.coefficients]
        )

    def jumps(self):
        """[U]^n = U(t_n+) - U(t_n-) at t_0..t_{N-1}, with [U]^0 against U0-."""
        right = self.right_traces()
        incoming = np.vstack([self.initial_values, self.left_traces()[:-1]])
        return right - incoming

    def final_values(self):
        return self.left_traces()[-1]


def _source_jump_values(solution):
    # value multiplying the jump column of source block j:
    # U(0+) for j = 1, the jump [U]^{j-1} for j >= 2
    jumps = solution.jumps().copy()
    jumps[0] = solution.right_traces()[0]
    return jumps


def solve(problems, mesh, order, initial_values=None):
    """March the DG scheme over the mesh for all modes at once.

    Memory blocks depend only on the interval pair, so each is computed
    once per (j, n) and applied to every mode's stored coefficients.
    """
    problems = list(problems)
    modes = len(problems)
    lam = np.array([pr.eigenvalue for pr in problems])
    if initial_values is None:
        initial_values = np.array([pr.initial_value for pr in problems], dtype=float)
    else:
        initial_values = np.asarray(initial_values, dtype=float)
        if initial_values.shape != (modes,):
            raise ValueError("one initial value per mode is required")
    coeffs = []
    jump_vals = np.empty((mesh.interval_count, modes))
    incoming = initial_values.copy()
    for n in range(1, mesh.interval_count + 1):
        p = mesh.degree(n)
        a, b = mesh.interval(n)
        parity = _parity(p)
        history = np.zeros((p + 1, modes))
        for j in range(1, n):
            blk = memory_block(mesh, j, n, order)
            history += blk.matrix @ coeffs[j - 1]
            history += np.outer(blk.jump_column, jump_vals[j - 1])
        local = memory_block(mesh, n, n, order)
        base = np.outer(parity, parity) + _transport_matrix(p)
        memory = local.matrix + np.outer(local.jump_column, parity)
        block = np.empty((p + 1, modes))
        for m, pr in enumerate(problems):
            load = _interval_load(pr.forcing, pr.forcing_singularity, a, b, p, n == 1)
            rhs = incoming[m] * parity + load - lam[m] * history[:, m]
            if n >= 2:
                rhs += lam[m] * local.jump_column * incoming[m]
            try:
                block[:, m] = np.linalg.solve(base + lam[m] * memory, rhs)
            except np.linalg.LinAlgError as exc:
                raise RuntimeError(
                    f"singular local system on interval {n}, mode {m + 1}"
                ) from exc
        coeffs.append(block)
        right_limit = parity @ block
        jump_vals[n - 1] = right_limit if n == 1 else right_limit - incoming
        incoming = block.sum(axis=0)
    return DgSolution(mesh, initial_values, tuple(coeffs))


def pi_projection(profiles, mesh):
    """Interpolatory projection: right-endpoint match plus orthogonality
    of the residual to P_{p_n - 1} on each interval."""
    coeffs = []
    for n in range(1, mesh.interval_count + 1):
        a, b = mesh.interval(n)
        p = mesh.degree(n)
        width = b - a
        block = np.empty((p + 1, len(profiles)))
        for m, u in enumerate(profiles):
            if isinstance(u, PowerSum):
                moments = np.zeros(p + 1)
                for coeff, exponent in u.terms:
                    nodes, weights = power_rule(a, b, 0.0, exponent, p)
                    moments += coeff * (weights @ legendre_values(nodes, a, b, p))
                end_value = u(b)
            else:
                nodes, weights = _gauss_legendre(p + 8, a, b)
                moments = (weights * _call_vec(u, nodes)) @ legendre_values(nodes, a, b, p)
                end_value = float(u(b))
            c = np.zeros(p + 1)
            ell = np.arange(p)
            c[:p] = moments[:p] * (2.0 * ell + 1.0) / width
            c[p] = end_value - c[:p].sum()
            block[:, m] = c
        coeffs.append(block)
    initial = np.array(
        [u.at_zero() if isinstance(u, PowerSum) else float(u(0.0)) for u in profiles]
    )
    return DgSolution(mesh, initial, tuple(coeffs))


@dataclass(frozen=True)
class StabilityReport:
    """Both sides of the discrete energy inequality at every node."""

    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    violations: tuple

    @property
    def ok(self):
        return not self.violations


def _forcing_pair_integrand(problems, alpha):
    """Pointwise |<g, A^{-1} f>| with g the fractional integral of f."""
    reps = []
    for pr in problems:
        f = pr.forcing
        if f is None or (isinstance(f, PowerSum) and not f.terms):
            continue
        if pr.eigenvalue == 0.0:
            raise ValueError("stability bound requires positive eigenvalues with forcing")
        if isinstance(f, PowerSum):
            reps.append(("exact", f, f.frac_integral(alpha), pr.eigenvalue))
        else:
            reps.append(("quad", f, pr.forcing_singularity, pr.eigenvalue))
    exponent = None
    if reps and all(kind == "exact" for kind, *_ in reps):
        exponent = min(f.min_exponent + g.min_exponent for _, f, g, _ in reps)

    def integrand(ts):
        total = np.zeros(ts.size)
        for kind, f, aux, lam_m in reps:
            if kind == "exact":
                total += f(ts) * aux(ts) / lam_m
            else:
                g_vals = fractional_integral_values(alpha, f, ts, singular_exponent=aux)
                total += _call_vec(f, ts) * g_vals / lam_m
        return np.abs(total)

    return integrand, exponent, bool(reps)


def _forcing_increments(problems, mesh, alpha):
    """Per-interval integrals of |<g, A^{-1} f>| dt."""
    integrand, exponent, active = _forcing_pair_integrand(problems, alpha)
    out = np.zeros(mesh.interval_count)
    if not active:
        return out
    for n in range(1, mesh.interval_count + 1):
        a, b = mesh.interval(n)
        if n == 1 and exponent is not None and exponent != 0.0:
            nodes, weights = gauss_jacobi_rule(16, exponent, (a, b))
            out[0] = float(weights @ (integrand(nodes) / nodes**exponent))
        elif n == 1:
            # split geometrically toward 0 in case f is merely bounded
            edges = b * 0.2 ** np.arange(12, -1, -1.0)
            acc = 0.0
            lo = 0.0
            for hi in edges:
                nodes, weights = _gauss_legendre(10, lo, hi)
                acc += float(weights @ integrand(nodes))
                lo = hi
            out[0] = acc
        else:
            nodes, weights = _gauss_legendre(12, a, b)
            out[n - 1] = float(weights @ integrand(nodes))
    return out


def _memory_energy_increments(solution, lam, order):
    """Per-interval integrals of A(B U, U) dt, blocks shared across modes."""
    mesh = solution.mesh
    jumps = _source_jump_values(solution)
    out = np.zeros(mesh.interval_count)
    for n in range(1, mesh.interval_count + 1):
        target = solution.coefficients[n - 1]
        acc = np.zeros(solution.mode_count)
        for j in range(1, n + 1):
            blk = memory_block(mesh, j, n, order)
            action = blk.matrix @ solution.coefficients[j - 1]
            action += np.outer(blk.jump_column, jumps[j - 1])
            acc += np.einsum("im,im->m", target, action)
        out[n - 1] = float(lam @ acc)
    return out


def stability_report(solution, problems, order, slack=1e-8):
    """Evaluate the discrete energy inequality

        |U_-^n|^2 + |U_+^{n-1}|^2 + 2 int_0^{t_n} A(B U, U) dt
            <= 4 |U_-^0|^2 + 4 d^2 int_0^{t_n} |<g, A^{-1} f>| dt

    at every node and flag violations beyond the relative slack.
    """
    problems = list(problems)
    order = order if isinstance(order, FractionalOrder) else FractionalOrder.of(order)
    alpha = order.alpha
    lam = np.array([pr.eigenvalue for pr in problems])
    left = solution.left_traces()
    right = solution.right_traces()
    energy = np.cumsum(_memory_energy_increments(solution, lam, order))
    forcing = np.cumsum(_forcing_increments(problems, solution.mesh, alpha))
    lhs = np.sum(left**2, axis=1) + np.sum(right**2, axis=1) + 2.0 * energy
    rhs = 4.0 * float(np.sum(solution.initial_values**2)) + 4.0 * order.d_alpha**2 * forcing
    violations = tuple(
        int(n)
        for n in range(1, solution.mesh.interval_count + 1)
        if lhs[n - 1] > rhs[n - 1] * (1.0 + slack) + 1e-12
    )
    return StabilityReport(solution.mesh.nodes[1:], lhs, rhs, violations)
