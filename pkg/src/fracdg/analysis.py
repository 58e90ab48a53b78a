"""Convergence studies: fine-grid errors, observed orders, hp rate coefficients.

The error measure is the fine-grid norm |||v|||_m: each time interval is
subdivided into m equal parts and the spatial L2 norm of U - u is maximised
over all subdivision points.  At t = 0 the numerical solution is taken to
be the initial datum; the right limit U(0+) only approximates it because
the initial condition is imposed weakly, and charging that jump to t = 0
would misstate the startup error.  Interior mesh nodes use left limits.

h-version studies sweep a Cartesian (gamma, p, N) grid of graded meshes,
hp-version studies sweep (delta, L) geometric meshes, and the delta sweep
fixes the dof budget while varying the refinement factor.  Observed orders
are log-ratios against N; hp refinement instead fits error ~ C exp(-b
sqrt(dofs)) through consecutive levels.
"""

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .mesh import dof_count, fine_grid, geometric_mesh, graded_mesh
from .problems import PowerSum, two_mode_problem
from .spatial import composite_gauss, fem_backend, ritz_projection, spectral_backend
from .stepper import ModeProblem, mode_problems, solve

__all__ = [
    "CSV_COLUMNS",
    "StudyRow",
    "ConvergenceReport",
    "error_measure",
    "eoc",
    "exp_coefficient",
    "semilog_fit",
    "projection_gamma",
    "run_h_study",
    "run_hp_study",
    "delta_sweep",
    "figure_curves_hp",
    "figure_curves_sweep",
    "write_plot_data",
]

CSV_COLUMNS = (
    "family",
    "alpha",
    "backend",
    "gamma_or_delta",
    "p_or_mu",
    "N_or_L",
    "dofs",
    "error",
    "rate_or_b",
    "seconds",
)


@dataclass(frozen=True)
class StudyRow:
    """One study cell: a mesh descriptor with its measured error."""

    family: str
    alpha: float
    backend: str
    gamma_or_delta: float
    p_or_mu: float
    N_or_L: int
    dofs: int
    error: float
    rate_or_b: float
    seconds: float


@dataclass(frozen=True)
class ConvergenceReport:
    """Rows of a convergence study plus run metadata and per-cell failures."""

    rows: tuple
    metadata: dict = field(default_factory=dict)
    failures: tuple = ()

    def __post_init__(self):
        for row in self.rows:
            if not row.error >= 0.0:
                raise ValueError(f"errors must be nonnegative, got {row.error}")

    def to_csv(self, timings=True, with_hash=False):
        """CSV text; `timings=False` zeroes the seconds column so that
        repeated runs of the same configuration are byte-identical."""
        header = list(CSV_COLUMNS)
        if with_hash:
            header.append("config_hash")
        lines = [",".join(header)]
        for row in self.rows:
            fields = [
                row.family,
                f"{row.alpha:g}",
                row.backend,
                f"{row.gamma_or_delta:g}",
                f"{row.p_or_mu:g}",
                str(row.N_or_L),
                str(row.dofs),
                f"{row.error:.6e}",
                f"{row.rate_or_b:.4f}" if math.isfinite(row.rate_or_b) else "",
                f"{row.seconds:.3f}" if timings else "0.000",
            ]
            if with_hash:
                fields.append(str(self.metadata.get("config_hash", "")))
            lines.append(",".join(fields))
        return "\n".join(lines) + "\n"


def _metadata(alpha, backend, m, config_hash):
    return {
        "alpha": alpha,
        "backend": backend,
        "m": m,
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "config_hash": config_hash,
    }


def _sine_values(mode_count, x):
    # orthonormal eigenfunctions sqrt(2) sin(j pi x) of the continuous operator
    return np.sqrt(2.0) * np.sin(np.outer(np.arange(1, mode_count + 1) * np.pi, x))


def _resolve_backend(backend, problem, fem_elements, fem_degree):
    if isinstance(backend, str):
        if backend == "spectral":
            return spectral_backend(problem.mode_count, problem.diffusivity)
        if backend == "fem":
            return fem_backend(fem_elements, fem_degree, problem.diffusivity)[1]
        raise ValueError(f"unknown backend {backend!r}")
    return backend


def error_measure(solution, problem, backend, m, method="auto"):
    """Fine-grid error |||U - u|||_m of a solved mode system.

    The spectral backend reads the spatial L2 norm straight off the mode
    coefficients (the eigenfunctions are orthonormal); the FEM backend
    integrates the pointwise difference with a composite Gauss rule using
    r+1 points per spatial element.  `method` can force "coefficient" or
    "quadrature" where both apply.
    """
    times = fine_grid(solution.mesh, m)
    numeric = solution.evaluate(times)
    numeric[0] = solution.initial_values
    exact = problem.exact_coefficients(times)
    if method == "auto":
        method = "coefficient" if backend.backend == "spectral" else "quadrature"
    if method == "coefficient":
        if backend.backend != "spectral":
            raise ValueError("coefficient route requires the spectral backend")
        if numeric.shape[1] != exact.shape[1]:
            raise ValueError("solution and problem mode counts differ")
        return float(np.sqrt(np.sum((numeric - exact) ** 2, axis=1)).max())
    if method != "quadrature":
        raise ValueError(f"unknown error method {method!r}")
    if backend.backend == "spectral":
        x, w = composite_gauss(max(2 * backend.mode_count, 8), 10)
    else:
        space = backend.space
        x, w = composite_gauss(space.element_count, space.degree + 1)
    shapes = np.vstack(
        [backend.shape_values(j, x) for j in range(1, backend.mode_count + 1)]
    )
    exact_shapes = _sine_values(problem.mode_count, x)
    diff = numeric @ shapes - exact @ exact_shapes
    return float(np.sqrt(np.maximum(diff**2 @ w, 0.0)).max())


def eoc(errors, Ns):
    """Observed orders log(e_{i-1}/e_i)/log(N_i/N_{i-1}); nan where undefined."""
    errors = np.asarray(errors, dtype=float)
    Ns = np.asarray(Ns, dtype=float)
    rates = np.full(errors.shape, np.nan)
    for i in range(1, len(errors)):
        if errors[i - 1] > 0.0 and errors[i] > 0.0:
            rates[i] = math.log(errors[i - 1] / errors[i]) / math.log(Ns[i] / Ns[i - 1])
    return rates

def exp_coefficient(errors, dofs):
    """hp rate coefficients b = log(e_{L-1}/e_L)/(sqrt(N_L)-sqrt(N_{L-1}))."""
    errors = np.asarray(errors, dtype=float)
    dofs = np.asarray(dofs, dtype=float)
    values = np.full(errors.shape, np.nan)
    for i in range(1, len(errors)):
        if errors[i - 1] > 0.0 and errors[i] > 0.0:
            values[i] = math.log(errors[i - 1] / errors[i]) / (
                math.sqrt(dofs[i]) - math.sqrt(dofs[i - 1])
            )
    return values


def semilog_fit(errors, dofs):
    """Least-squares line ln(error) = intercept - slope*sqrt(dofs).

    Returns (slope, intercept, r_squared); slope is the fitted decay
    coefficient b of error ~ C exp(-b sqrt(dofs)).
    """
    x = np.sqrt(np.asarray(dofs, dtype=float))
    y = np.log(np.asarray(errors, dtype=float))
    coeffs = np.polyfit(x, y, 1)
    residuals = y - np.polyval(coeffs, x)
    total = y - y.mean()
    r_squared = 1.0 - residuals @ residuals / (total @ total)
    return -coeffs[0], coeffs[1], float(r_squared)


def projection_gamma(p, q):
    """Factorial ratio Gamma(p-q+1)/Gamma(p+q+1) from the projection bound."""
    if not 0 <= q <= p:
        raise ValueError(f"need 0 <= q <= p, got q={q}, p={p}")
    return math.gamma(p - q + 1) / math.gamma(p + q + 1)


def _power_singularity(forcing):
    exponents = [e for _, e in forcing.terms]
    fractional = [e for e in exponents if e != round(e) and e < 1.0]
    return min(fractional) if fractional else None


def fem_mode_problems(problem, system):
    """Scalar mode problems of the spatially discrete system.

    Projecting the PDE on the discrete eigenpairs decouples it into modes
    d_m' + lambda_m B d_m = (f, phi_m); the load pairs the manufactured
    sine-series forcing with each discrete eigenfunction, and the initial
    values come from the Ritz projection of u0.
    """
    space = system.space
    x, w = composite_gauss(space.element_count, space.degree + 4)
    shapes = np.vstack(
        [system.shape_values(j, x) for j in range(1, system.mode_count + 1)]
    )
    sines = _sine_values(problem.mode_count, x)
    pairing = (sines * w) @ shapes.T
    initial_modes = np.asarray(problem.initial_coefficients())

    def u0(xs):
        return initial_modes @ _sine_values(problem.mode_count, np.atleast_1d(xs))

    ritz = ritz_projection(space, u0)
    initial = system.mode_shapes.T @ (space.mass @ ritz)
    out = []
    for m in range(system.mode_count):
        forcing = PowerSum.of()
        for j, component in enumerate(problem.modes):
            forcing = forcing + component.forcing.scale(pairing[j, m])
        out.append(
            ModeProblem(
                float(system.eigenvalues[m]),
                forcing,
                float(initial[m]),
                _power_singularity(forcing),
            )
        )
    return out


def _study_problems(problem, system):
    if system.backend == "spectral":
        return mode_problems(problem)
    return fem_mode_problems(problem, system)


def _run_cells(cells, worker, threads):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(worker, cells))
    return [worker(cell) for cell in cells]


def _column_rows(results, make_row):
    """Rows for one mesh column; rates chain across the surviving cells."""
    rows, failures = [], []
    survivors = [r for r in results if r[-1] is None]
    for cell, *_rest, failure in results:
        if failure is not None:
            failures.append((cell, failure))
    sizes = [r[1] for r in survivors]
    errors = [r[3] for r in survivors]
    rates = eoc(errors, sizes) if survivors else []
    for (cell, size, dofs, error, seconds, _), rate in zip(survivors, rates):
        rows.append(make_row(cell, size, dofs, error, rate, seconds))
    return rows, failures


def run_h_study(
    alpha,
    gammas,
    ps,
    Ns,
    backend="spectral",
    m=10,
    T=1.0,
    first_interval_linear=False,
    fem_elements=64,
    fem_degree=2,
    diffusivity=1.0,
    threads=1,
    config_hash="",
):
    """Graded-mesh study over the Cartesian (gamma, p, N) grid.

    Each (p, gamma) pair forms one column refined through the Ns, with
    observed orders chained down the column.  Failed cells are collected
    in the report instead of aborting the remaining grid.
    """
    problem = two_mode_problem(alpha, diffusivity)
    system = _resolve_backend(backend, problem, fem_elements, fem_degree)
    problems = _study_problems(problem, system)

    def run_cell(cell):
        p, gamma, N = cell
        start = time.perf_counter()
        try:
            mesh = graded_mesh(T, N, gamma, p, first_interval_linear=first_interval_linear)
            solution = solve(problems, mesh, alpha)
            error = error_measure(solution, problem, system, m)
        except Exception as exc:
            return cell, N, 0, math.nan, 0.0, f"{type(exc).__name__}: {exc}"
        return cell, N, dof_count(mesh), error, time.perf_counter() - start, None

    rows, failures = [], []
    for p in ps:
        for gamma in gammas:
            results = _run_cells([(p, gamma, N) for N in Ns], run_cell, threads)
            def make_row(cell, N, dofs, error, rate, seconds):
                return StudyRow(
                    "graded", alpha, system.backend, cell[1], cell[0], N,
                    dofs, error, rate, seconds,
                )
            col_rows, col_failures = _column_rows(results, make_row)
            rows.extend(col_rows)
            failures.extend(col_failures)
    return ConvergenceReport(
        tuple(rows), _metadata(alpha, system.backend, m, config_hash), tuple(failures)
    )


def run_hp_study(
    alpha,
    deltas,
    Ls,
    mu=1.0,
    T_1=1.0,
    T=1.0,
    backend="spectral",
    m=60,
    fem_elements=64,
    fem_degree=2,
    diffusivity=1.0,
    threads=1,
    config_hash="",
):
    """Geometric-mesh study: one column per delta, levels L within it.

    The rate column holds the exponential coefficient b fitted through
    consecutive levels of the same delta.
    """
    problem = two_mode_problem(alpha, diffusivity)
    system = _resolve_backend(backend, problem, fem_elements, fem_degree)
    problems = _study_problems(problem, system)

    def run_cell(cell):
        delta, L = cell
        start = time.perf_counter()
        try:
            mesh = geometric_mesh(T, T_1, delta, L, mu)
            solution = solve(problems, mesh, alpha)
            error = error_measure(solution, problem, system, m)
        except Exception as exc:
            return cell, L, 0, math.nan, 0.0, f"{type(exc).__name__}: {exc}"
        return cell, L, dof_count(mesh), error, time.perf_counter() - start, None

    rows, failures = [], []
    for delta in deltas:
        results = _run_cells([(delta, L) for L in Ls], run_cell, threads)
        survivors = [r for r in results if r[-1] is None]
        failures.extend((cell, fail) for cell, *_, fail in results if fail is not None)
        dofs = [r[2] for r in survivors]
        errors = [r[3] for r in survivors]
        bs = exp_coefficient(errors, dofs) if survivors else []
        for (cell, L, dof, error, seconds, _), b in zip(survivors, bs):
            rows.append(
                StudyRow("geometric", alpha, system.backend, delta, mu, L,
                         dof, error, b, seconds)
            )
    return ConvergenceReport(
        tuple(rows), _metadata(alpha, system.backend, m, config_hash), tuple(failures)
    )


def delta_sweep(
    alphas,
    deltas,
    L=7,
    mu=1.0,
    T_1=1.0,
    T=1.0,
    backend="spectral",
    m=60,
    fem_elements=64,
    fem_degree=2,
    diffusivity=1.0,
    threads=1,
    config_hash="",
):
    """Error against delta at a fixed dof budget, one curve per alpha."""
    rows, failures = [], []
    backend_name = backend if isinstance(backend, str) else backend.backend
    for alpha in alphas:
        problem = two_mode_problem(alpha, diffusivity)
        system = _resolve_backend(backend, problem, fem_elements, fem_degree)
        problems = _study_problems(problem, system)

        def run_cell(delta):
            start = time.perf_counter()
            try:
                mesh = geometric_mesh(T, T_1, delta, L, mu)
                solution = solve(problems, mesh, alpha)
                error = error_measure(solution, problem, system, m)
            except Exception as exc:
                return delta, 0, math.nan, 0.0, f"{type(exc).__name__}: {exc}"
            return delta, dof_count(mesh), error, time.perf_counter() - start, None

        for delta, dofs, error, seconds, failure in _run_cells(list(deltas), run_cell, threads):
            if failure is not None:
                failures.append(((alpha, delta), failure))
            else:
                rows.append(
                    StudyRow("geometric", alpha, system.backend, delta, mu, L,
                             dofs, error, math.nan, seconds)
                )
    return ConvergenceReport(
        tuple(rows), _metadata(None, backend_name, m, config_hash), tuple(failures)
    )


def figure_curves_hp(report):
    """(name, x, y) curves of error against sqrt(dofs), one per delta."""
    curves = []
    for delta in dict.fromkeys(row.gamma_or_delta for row in report.rows):
        points = [r for r in report.rows if r.gamma_or_delta == delta]
        x = [math.sqrt(r.dofs) for r in points]
        y = [r.error for r in points]
        curves.append((f"delta={delta:g}", x, y))
    return curves


def figure_curves_sweep(report):
    """(name, x, y) curves of error against delta, one per alpha."""
    curves = []
    for alpha in dict.fromkeys(row.alpha for row in report.rows):
        points = [r for r in report.rows if r.alpha == alpha]
        x = [r.gamma_or_delta for r in points]
        y = [r.error for r in points]
        curves.append((f"alpha={alpha:g}", x, y))
    return curves


def _curve_filename(name):
    safe = name.replace("=", "-").replace(".", "p")
    safe = "".join(ch if ch.isalnum() or ch in "-_" else "_" for ch in safe)
    return safe + ".dat"


def write_plot_data(directory, curves, xlabel, ylabel):
    """Two-column x,y data files plus a manifest naming each curve.

    Returns the manifest path.  Output is deterministic: fixed float
    formatting and sorted manifest keys.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for name, x, y in curves:
        filename = _curve_filename(name)
        lines = [f"{float(xi):.12e} {float(yi):.12e}" for xi, yi in zip(x, y)]
        (directory / filename).write_text("\n".join(lines) + "\n")
        entries.append({"name": name, "file": filename, "points": len(lines)})
    manifest = {"xlabel": xlabel, "ylabel": ylabel, "curves": entries}
    path = directory / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
