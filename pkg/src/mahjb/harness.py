"""Convergence studies: error norms, h-sweeps, eps-sweeps and data tables."""
from __future__ import annotations

import io
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import element_data
from .mesh import Mesh, initial_mesh, mesh_size, prolongate, refine_uniform
from .problems import ProblemSpec, get_problem
from .quadrature import ERROR_RULE, QuadratureRule
from .solver import (
    LinearSolveError,
    NewtonConfig,
    NewtonConvergenceError,
    SolveOutput,
    continuation_solve,
    newton_solve,
)
from .spaces import DiscreteScalar, DiscreteVector, build_scalar_space, build_vector_space

logger = logging.getLogger(__name__)

DAT_COLUMNS = ("ndof", "hinv", "Linferr", "L2err", "H1err", "niter")


class SingularEvaluationError(ValueError):
    pass


@dataclass
class ConvergenceRecord:
    ndof: int
    hinv: float
    err_linf: float
    err_l2: float
    err_h1: float
    niter: int
    eps: float
    example_id: int
    level: int = 0
    converged: bool = True


@dataclass
class RateRow:
    eps: float
    err_fine_mesh: float
    err_finer_mesh: float
    rate: float | None


@dataclass
class RateTable:
    level: int
    finer_level: int
    example_id: int
    rows: list[RateRow] = field(default_factory=list)

    def format(self) -> str:
        lines = [
            f"{'eps':>10}  {'Linf h=2^-' + str(self.level):>14}  "
            f"{'Linf h=2^-' + str(self.finer_level):>14}  {'rate':>6}"
        ]
        for r in self.rows:
            rate = "---" if r.rate is None else f"{r.rate:.2f}"
            lines.append(
                f"{r.eps:10.4e}  {r.err_fine_mesh:14.3e}  {r.err_finer_mesh:14.3e}  {rate:>6}"
            )
        return "\n".join(lines)


def error_norms(
    u_h: DiscreteScalar,
    w_h: DiscreteVector | None,
    p: ProblemSpec,
    m: Mesh | None = None,
    quad: QuadratureRule = ERROR_RULE,
    linf_points: str = "all",
) -> tuple[float, float, float]:
    """``(L^inf, L^2, H^1-seminorm)`` errors of ``u_h`` against the exact solution.

    The sup-norm is sampled at all vertices and quadrature points
    (``linf_points="all"``), a lower bound for the true maximum, or at the
    vertices only (``linf_points="vertices"``).  ``w_h`` is not used by the
    norms reported here.
    """
    if linf_points not in ("all", "vertices"):
        raise ValueError(f"linf_points must be 'all' or 'vertices', got {linf_points!r}")
    m = m or u_h.space.mesh
    ed = element_data(m, quad)
    nodal = u_h.nodal_values()
    tri_vals = nodal[m.triangles]
    uh_q = np.einsum("qk,tk->tq", quad.barycentric, tri_vals)
    grad_uh = np.einsum("tk,tkd->td", tri_vals, ed.grads)

    u_q = p.u_exact(ed.points)
    grad_u_q = p.grad_u_exact(ed.points)
    u_v = p.u_exact(m.vertices)
    for name, vals in (("u", u_q), ("grad u", grad_u_q), ("vertex u", u_v)):
        if not np.all(np.isfinite(vals)):
            raise SingularEvaluationError(
                f"example {p.id}: {name} is not finite at a sample point (singular set)"
            )
    diff = u_q - uh_q
    gdiff = grad_u_q - grad_uh[:, None, :]
    l2 = math.sqrt(float(np.sum(ed.weights * diff**2)))
    h1 = math.sqrt(float(np.sum(ed.weights * np.sum(gdiff**2, axis=-1))))
    linf = float(np.max(np.abs(u_v - nodal)))
    if linf_points == "all":
        linf = max(linf, float(np.max(np.abs(diff))))
    return linf, l2, h1


def _record(p, m, eps, out: SolveOutput | None, linf_points="all") -> ConvergenceRecord:
    ws, vs = build_vector_space(m), build_scalar_space(m)
    ndof = ws.ndof + vs.ndof
    hinv = 1.0 / mesh_size(m)
    if out is None:
        nan = float("nan")
        return ConvergenceRecord(ndof, hinv, nan, nan, nan, -1, eps, p.id, m.level, False)
    linf, l2, h1 = error_norms(out.u_h, out.w_h, p, m, linf_points=linf_points)
    return ConvergenceRecord(
        ndof, hinv, linf, l2, h1, out.report.iterations, eps, p.id, m.level, True
    )


def run_convergence(
    example_id: int,
    eps: float,
    max_level: int,
    cfg: NewtonConfig | None = None,
    warm_start: bool = False,
    linf_points: str = "all",
) -> list[ConvergenceRecord]:
    """One record per level ``0..max_level``; failed solves are recorded with
    NaN errors and ``niter = -1`` and the sweep continues."""
    p = get_problem(example_id)
    records: list[ConvergenceRecord] = []
    m = initial_mesh()
    prev_w: DiscreteVector | None = None
    for level in range(max_level + 1):
        if level:
            m = refine_uniform(m)
        w0 = None
        if warm_start and prev_w is not None:
            ws = build_vector_space(m)
            w0 = DiscreteVector.from_nodal(ws, prolongate(m, prev_w.nodal_values()))
        try:
            out = newton_solve(p, m, eps, cfg, w0=w0)
        except (NewtonConvergenceError, LinearSolveError) as exc:
            logger.warning("example %d eps %g level %d: %s", example_id, eps, level, exc)
            out = None
        records.append(_record(p, m, eps, out, linf_points))
        prev_w = out.w_h if out is not None else None
        logger.info(
            "ex%d eps=%g level=%d niter=%d linf=%.3e",
            example_id, eps, level, records[-1].niter, records[-1].err_linf,
        )
    return records


def estimate_rates(records_or_errors, norm: str | None = None) -> list[float] | dict[str, list[float]]:
    """Successive rates ``log2(err_l / err_{l+1})``.

    Accepts a plain sequence of errors (returns a list) or a list of
    :class:`ConvergenceRecord` (returns one list per norm, or the list for
    ``norm`` in ``{"linf", "l2", "h1"}``).
    """
    items = list(records_or_errors)
    if len(items) < 2:
        raise ValueError("at least two entries are needed to estimate a rate")
    if isinstance(items[0], ConvergenceRecord):
        out = {
            k: estimate_rates([getattr(r, f"err_{k}") for r in items])
            for k in ("linf", "l2", "h1")
        }
        return out if norm is None else out[norm]
    errs = np.asarray(items, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return [float(x) for x in np.log2(errs[:-1] / errs[1:])]


def fitted_rate(hinv, errors) -> float:
    """Least-squares slope of ``log err`` against ``-log h``."""
    x = np.log2(np.asarray(hinv, dtype=float))
    y = np.log2(np.asarray(errors, dtype=float))
    return float(-np.polyfit(x, y, 1)[0])


def eps_sweep(
    example_id: int,
    eps_list=None,
    level: int = 6,
    finer_level: int = 7,
    cfg: NewtonConfig | None = None,
    linf_points: str = "all",
) -> RateTable:
    """L^inf errors on two meshes for a list of parameters and the rates
    ``log2(err(2 eps) / err(eps))`` of consecutive rows on the finer mesh.

    Parameters are processed in descending order with warm starts.
    """
    if eps_list is None:
        eps_list = [2.0**-j for j in range(1, 12)]
    eps_list = sorted((float(e) for e in eps_list), reverse=True)
    p = get_problem(example_id)
    errs = {}
    m = initial_mesh()
    for lev in range(finer_level + 1):
        if lev:
            m = refine_uniform(m)
        if lev not in (level, finer_level):
            continue
        outs = continuation_solve(p, m, eps_list, cfg)
        errs[lev] = [error_norms(o.u_h, o.w_h, p, m, linf_points=linf_points)[0] for o in outs]
    table = RateTable(level, finer_level, example_id)
    for j, eps in enumerate(eps_list):
        rate = None
        if j:
            rate = float(np.log2(errs[finer_level][j - 1] / errs[finer_level][j])
                         / np.log2(eps_list[j - 1] / eps))
        table.rows.append(RateRow(eps, errs[level][j], errs[finer_level][j], rate))
    return table


def emit_dat(records, path: str | Path) -> None:
    """Write ``ndof hinv Linferr L2err H1err niter`` columns, 16 significant digits."""
    with open(path, "w", newline="\n") as fh:
        fh.write(" ".join(DAT_COLUMNS) + "\n")
        for r in records:
            vals = (r.ndof, r.hinv, r.err_linf, r.err_l2, r.err_h1, r.niter)
            fh.write(" ".join(f"{float(v):.15e}" for v in vals) + "\n")


def emit_csv(records, path: str | Path) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("example", "eps", "level") + DAT_COLUMNS)
        for r in records:
            writer.writerow(
                (r.example_id, repr(r.eps), r.level, r.ndof, repr(r.hinv),
                 repr(r.err_linf), repr(r.err_l2), repr(r.err_h1), r.niter)
            )


def read_dat(path: str | Path) -> dict[str, np.ndarray]:
    """Parse a whitespace separated table with one header line into columns."""
    with open(path) as fh:
        header = fh.readline().split()
        rows = fh.read()
    if not rows.strip():
        return {name: np.empty(0) for name in header}
    data = np.loadtxt(io.StringIO(rows), ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}
