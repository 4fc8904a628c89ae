"""Dense primal-dual interior-point solver for Hermitian-block SDPs.

Standard primal form over a block-diagonal Hermitian variable X:

    minimize    sum_k tr(C_k X_k)
    subject to  sum_k tr(A_ik X_k) = b_i   (i = 1..m),   X_k >= 0.

The dual is max b.y subject to Z_k = C_k - sum_i y_i A_ik >= 0.  Directions
use Nesterov-Todd scaling with a Mehrotra-style adaptive centering parameter;
the Schur complement is regularized to survive problems whose optimum sits on
the boundary of strict feasibility.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_factor, cho_solve


class SdpError(RuntimeError):
    """Solver could not produce a certified solution."""


class SdpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"


def default_gap_tol(primal_obj: float) -> float:
    return 1e-7 * (1.0 + abs(primal_obj))


@dataclass(frozen=True)
class SdpProblem:
    """Standard-form problem data.

    a_blocks[k] has shape (m, n_k, n_k): constraint i uses matrix a_blocks[k][i]
    on block k.  All constraint and objective matrices must be Hermitian.
    """

    block_dims: tuple[int, ...]
    c_blocks: tuple[np.ndarray, ...]
    a_blocks: tuple[np.ndarray, ...]
    b: np.ndarray

    def __post_init__(self) -> None:
        m = len(self.b)
        n_tot = sum(self.block_dims)
        if m > n_tot * n_tot:
            raise ValueError(f"{m} constraints exceed total dimension squared {n_tot**2}")
        for k, n in enumerate(self.block_dims):
            if self.c_blocks[k].shape != (n, n):
                raise ValueError(f"objective block {k} has wrong shape")
            if self.a_blocks[k].shape != (m, n, n):
                raise ValueError(f"constraint stack {k} has wrong shape")
            for name, mat in (("C", self.c_blocks[k][None]), ("A", self.a_blocks[k])):
                err = np.abs(mat - np.conj(np.transpose(mat, (0, 2, 1)))).max(initial=0.0)
                if err > 1e-9:
                    raise ValueError(f"{name} block {k} is not Hermitian (err {err:.2e})")

    @property
    def num_constraints(self) -> int:
        return len(self.b)


@dataclass
class IterateRecord:
    iteration: int
    primal_obj: float
    dual_obj: float
    gap: float
    primal_infeas: float
    dual_infeas: float


@dataclass
class SdpSolution:
    x_blocks: list[np.ndarray]
    y: np.ndarray
    z_blocks: list[np.ndarray]
    primal_obj: float
    dual_obj: float
    gap: float
    status: SdpStatus
    iterations: int
    primal_infeas: float = 0.0
    dual_infeas: float = 0.0
    trace: list[IterateRecord] = field(default_factory=list)

    def trace_csv(self) -> str:
        lines = ["iteration,primal_obj,dual_obj,gap"]
        for r in self.trace:
            lines.append(f"{r.iteration},{r.primal_obj!r},{r.dual_obj!r},{r.gap!r}")
        return "\n".join(lines) + "\n"


class ProblemBuilder:
    """Incremental constructor for SdpProblem instances."""

    def __init__(self) -> None:
        self._dims: list[int] = []
        self._c: list[np.ndarray] = []
        self._rows: list[tuple[dict[int, np.ndarray], float]] = []

    def add_block(self, n: int, c: np.ndarray | None = None) -> int:
        self._dims.append(n)
        self._c.append(np.zeros((n, n), dtype=complex) if c is None
                       else np.asarray(c, dtype=complex))
        return len(self._dims) - 1

    def add_constraint(self, coeffs: dict[int, np.ndarray], rhs: float) -> None:
        self._rows.append(({k: np.asarray(v, dtype=complex) for k, v in coeffs.items()},
                           float(rhs)))

    def build(self) -> SdpProblem:
        m = len(self._rows)
        a_blocks = []
        for k, n in enumerate(self._dims):
            stack = np.zeros((m, n, n), dtype=complex)
            for i, (coeffs, _) in enumerate(self._rows):
                if k in coeffs:
                    stack[i] = coeffs[k]
            a_blocks.append(stack)
        b = np.array([rhs for _, rhs in self._rows])
        return SdpProblem(tuple(self._dims), tuple(self._c), tuple(a_blocks), b)


# ---------------------------------------------------------------------------
# solver internals
#
# Blocks of equal size are stacked into (count, n, n) arrays so that every
# per-iteration operation is a handful of batched LAPACK/BLAS calls; Python
# never loops over individual blocks.
# ---------------------------------------------------------------------------

def _b_herm(m: np.ndarray) -> np.ndarray:
    return (m + np.conj(np.transpose(m, (0, 2, 1)))) / 2


def _b_eigh_floored(m: np.ndarray, rel_floor: float) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(_b_herm(m))
    top = np.maximum(w[:, -1], 1e-100)
    return np.maximum(w, rel_floor * top[:, None]), v


def _b_nt_scaling(x: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Batched W with W Z W = X (the Nesterov-Todd scaling point)."""
    wx, vx = _b_eigh_floored(x, 1e-16)
    xh = (vx * np.sqrt(wx)[:, None, :]) @ np.conj(np.transpose(vx, (0, 2, 1)))
    wm, vm = _b_eigh_floored(xh @ z @ xh, 1e-16)
    mih = (vm * (wm ** -0.5)[:, None, :]) @ np.conj(np.transpose(vm, (0, 2, 1)))
    return _b_herm(xh @ mih @ xh)


def _b_inv_psd(z: np.ndarray) -> np.ndarray:
    w, v = _b_eigh_floored(z, 1e-18)
    return (v * (1.0 / w)[:, None, :]) @ np.conj(np.transpose(v, (0, 2, 1)))


def _b_min_eig(m: np.ndarray) -> float:
    return float(np.linalg.eigvalsh(_b_herm(m))[:, 0].min())


def _b_max_step(x: np.ndarray, dx: np.ndarray) -> float:
    """Approximate sup { a : x + a dx >= 0 } over a batch of blocks.

    Eigenvalues of x below a relative machine floor are clamped, so callers
    must still verify positive definiteness of the stepped point.
    """
    w, v = _b_eigh_floored(x, 1e-16)
    isq = (v * (w ** -0.5)[:, None, :]) @ np.conj(np.transpose(v, (0, 2, 1)))
    s = _b_herm(isq @ dx @ isq)
    scale = np.abs(s).reshape(s.shape[0], -1).max(axis=1)
    scale = np.maximum(scale, 1e-300)
    lam = (np.linalg.eigvalsh(s / scale[:, None, None])[:, 0] * scale).min()
    if lam >= -1e-14:
        return np.inf
    return -1.0 / float(lam)


class _Groups:
    """Equal-size block stacks plus scatter/gather to the flat block list."""

    def __init__(self, problem: SdpProblem):
        sizes = sorted(set(problem.block_dims))
        self.sizes = sizes
        self.index: list[list[int]] = []
        self.c: list[np.ndarray] = []
        self.a: list[np.ndarray] = []
        self.a_flat: list[np.ndarray] = []
        m = problem.num_constraints
        for s in sizes:
            idx = [k for k, n in enumerate(problem.block_dims) if n == s]
            self.index.append(idx)
            self.c.append(np.stack([np.asarray(problem.c_blocks[k], dtype=complex)
                                    for k in idx]))
            a = np.stack([np.asarray(problem.a_blocks[k], dtype=complex)
                          for k in idx], axis=1)  # (m, count, s, s)
            self.a.append(a)
            self.a_flat.append(a.reshape(m, -1))
        self.n_tot = sum(problem.block_dims)

    def scatter(self, blocks: list[np.ndarray]) -> list[np.ndarray]:
        return [np.stack([np.asarray(blocks[k], dtype=complex) for k in idx])
                for idx in self.index]

    def gather(self, grouped: list[np.ndarray], total: int) -> list[np.ndarray]:
        out: list[np.ndarray] = [None] * total  # type: ignore[list-item]
        for idx, stack in zip(self.index, grouped):
            for j, k in enumerate(idx):
                out[k] = stack[j].copy()
        return out

    def identity(self, scale: float) -> list[np.ndarray]:
        return [scale * np.broadcast_to(np.eye(s, dtype=complex),
                                        (len(idx), s, s)).copy()
                for s, idx in zip(self.sizes, self.index)]

    def apply_a(self, x: list[np.ndarray]) -> np.ndarray:
        out = None
        for af, xg in zip(self.a_flat, x):
            v = (af @ xg.conj().reshape(-1)).real
            out = v if out is None else out + v
        return out

    def apply_a_adjoint(self, y: np.ndarray) -> list[np.ndarray]:
        out = []
        for af, a in zip(self.a_flat, self.a):
            shape = a.shape[1:]
            out.append((y @ af).reshape(shape))
        return out

    def ip(self, x: list[np.ndarray], z: list[np.ndarray]) -> float:
        """sum_k tr(X_k Z_k), real for Hermitian blocks."""
        total = 0.0
        for xg, zg in zip(x, z):
            total += float(np.einsum("gpq,gqp->", xg, zg, optimize=False).real)
        return total


def solve(problem: SdpProblem, *,
          x0: list[np.ndarray] | None = None,
          y0: np.ndarray | None = None,
          z0: list[np.ndarray] | None = None,
          max_iterations: int = 200,
          feas_tol: float = 1e-9,
          gap_tol: float | None = None,
          reg: float = 1e-12,
          step_frac: float = 0.96,
          record_trace: bool = False) -> SdpSolution:
    """Run the interior-point iteration; see module docstring for the form.

    Strictly feasible (x0, y0, z0) starts preserve feasibility exactly, so
    weak duality then holds on every iterate.  Without starts the solver runs
    in infeasible mode and drives the residuals to zero alongside the gap.
    """
    m = problem.num_constraints
    num_blocks = len(problem.block_dims)

    # normalize constraints and objective; solved in scaled units, reported
    # in original units (y and Z are rescaled on exit)
    row_norm = np.zeros(m)
    for a in problem.a_blocks:
        row_norm += np.einsum("ipq,ipq->i", a, a.conj(), optimize=False).real
    row_scale = np.maximum(np.sqrt(row_norm), 1e-12)
    c_scale = max(max(float(np.linalg.norm(c)) for c in problem.c_blocks), 1e-12)
    scaled = SdpProblem(problem.block_dims,
                        tuple(np.asarray(c, dtype=complex) / c_scale
                              for c in problem.c_blocks),
                        tuple(np.asarray(a, dtype=complex) / row_scale[:, None, None]
                              for a in problem.a_blocks),
                        problem.b / row_scale)
    groups = _Groups(scaled)
    b = scaled.b
    n_tot = groups.n_tot
    norm_b = float(np.linalg.norm(b))
    norm_c = max(float(np.linalg.norm(c)) for c in scaled.c_blocks)

    if x0 is not None:
        x = [_b_herm(g) for g in groups.scatter(list(x0))]
    else:
        x = groups.identity(max(1.0, norm_b))
    if y0 is None:
        y = np.zeros(m)
    else:
        y = np.asarray(y0, dtype=float) * row_scale / c_scale
    if z0 is not None:
        z = [_b_herm(g) / c_scale for g in groups.scatter(list(z0))]
    else:
        z = groups.identity(max(1.0, norm_c))

    # Gram matrix of the constraint map, used to project search directions
    # exactly onto A(dx) = r_p so the primal residual cannot drift
    gram = np.zeros((m, m))
    for af in groups.a_flat:
        gram += (af @ af.conj().T).real
    gram = (gram + gram.T) / 2 + 1e-12 * max(1.0, float(np.trace(gram)) / max(m, 1)) * np.eye(m)
    gram_factor = cho_factor(gram)

    trace: list[IterateRecord] = []
    status = SdpStatus.MAX_ITER
    it = 0
    best = None
    best_merit = np.inf

    def objective() -> tuple[float, float]:
        """Primal and dual objective in original (unscaled) units."""
        p = sum(float(np.einsum("gpq,gqp->", c, xg, optimize=False).real)
                for c, xg in zip(groups.c, x))
        return p * c_scale, float(b @ y) * c_scale

    for it in range(1, max_iterations + 1):
        r_p = b - groups.apply_a(x)
        aty = groups.apply_a_adjoint(y)
        r_d = [groups.c[g] - aty[g] - z[g] for g in range(len(groups.sizes))]
        # residuals at machine-noise level are treated as exact zeros: the
        # W-sandwich below would otherwise amplify them by ||W||^2
        if float(np.linalg.norm(r_p)) <= 1e-13 * (1.0 + norm_b):
            r_p = np.zeros(m)
        r_d = [rd if float(np.abs(rd).max(initial=0.0)) > 1e-13 * (1.0 + norm_c)
               else np.zeros_like(rd) for rd in r_d]
        pobj, dobj = objective()
        gap = pobj - dobj
        pinf = float(np.linalg.norm(r_p)) / (1.0 + norm_b)
        dinf = max(float(np.linalg.norm(rd)) for rd in r_d) / (1.0 + norm_c)
        if record_trace:
            trace.append(IterateRecord(it - 1, pobj, dobj, gap, pinf, dinf))

        tol_gap = default_gap_tol(pobj) if gap_tol is None else gap_tol
        merit = max(pinf / max(feas_tol, 1e-12), dinf / max(feas_tol, 1e-12),
                    abs(gap) / max(tol_gap, 1e-300))
        if merit < best_merit:
            best_merit = merit
            best = ([g.copy() for g in x], y.copy(), [g.copy() for g in z])
        if pinf <= feas_tol and dinf <= feas_tol and abs(gap) <= tol_gap:
            status = SdpStatus.OPTIMAL
            break

        # dual improving ray => primal infeasible
        ny = float(np.linalg.norm(y))
        if ny > 1e6 and float(b @ y) > 1e-6 * ny:
            lam_max = max(float(np.linalg.eigvalsh(_b_herm(s))[:, -1].max())
                          for s in aty)
            if lam_max <= 1e-8 * ny:
                status = SdpStatus.INFEASIBLE
                break

        w_scale = [_b_nt_scaling(x[g], z[g]) for g in range(len(groups.sizes))]
        mat = np.zeros((m, m))
        t_stack = []
        for g in range(len(groups.sizes)):
            wg = w_scale[g][None, :, :, :]
            t_g = np.matmul(np.matmul(wg, groups.a[g]), wg)
            t_stack.append(t_g)
            mat += (groups.a_flat[g] @ t_g.reshape(m, -1).conj().T).real
        mat = (mat + mat.T) / 2 + reg * np.eye(m)
        try:
            factor = cho_factor(mat)
        except np.linalg.LinAlgError:
            factor = cho_factor(mat + 1e-8 * np.trace(mat) / m * np.eye(m))

        mu = groups.ip(x, z) / n_tot

        def direction(r_c):
            rhs = r_p.copy()
            for g in range(len(groups.sizes)):
                diff = w_scale[g] @ r_d[g] @ w_scale[g] - r_c[g]
                rhs += (groups.a_flat[g] @ diff.conj().reshape(-1)).real
            dy = cho_solve(factor, rhs)
            # one round of iterative refinement on the Schur system
            dy = dy + cho_solve(factor, rhs - mat @ dy)
            aty_d = groups.apply_a_adjoint(dy)
            dz = [r_d[g] - aty_d[g] for g in range(len(groups.sizes))]
            dx = [_b_herm(r_c[g] - w_scale[g] @ dz[g] @ w_scale[g])
                  for g in range(len(groups.sizes))]
            dz = [_b_herm(d) for d in dz]
            # project dx back onto A(dx) = r_p, killing residual drift
            defect = r_p - groups.apply_a(dx)
            lam = cho_solve(gram_factor, defect)
            corr = groups.apply_a_adjoint(lam)
            dx = [_b_herm(dx[g] + corr[g]) for g in range(len(groups.sizes))]
            return dx, dy, dz

        def steps(dx_c, dz_c):
            a_p = min((_b_max_step(x[g], dx_c[g]) for g in range(len(groups.sizes))),
                      default=np.inf)
            a_d = min((_b_max_step(z[g], dz_c[g]) for g in range(len(groups.sizes))),
                      default=np.inf)
            return min(1.0, step_frac * a_p), min(1.0, step_frac * a_d)

        # predictor
        dx_a, dy_a, dz_a = direction([-x[g] for g in range(len(groups.sizes))])
        ap, ad = steps(dx_a, dz_a)
        mu_aff = sum(float(np.einsum("gpq,gqp->", x[g] + ap * dx_a[g],
                                     z[g] + ad * dz_a[g], optimize=False).real)
                     for g in range(len(groups.sizes))) / n_tot
        mu_aff = max(mu_aff, 0.0)
        sigma = min(1.0, max((mu_aff / mu) ** 3 if mu > 0 else 0.0, 1e-8))

        # corrector with centering; the Mehrotra second-order term is kept
        # only when it does not shrink the step
        nu = sigma * mu
        z_inv = [_b_inv_psd(z[g]) for g in range(len(groups.sizes))]
        r_c_plain = [nu * z_inv[g] - x[g] for g in range(len(groups.sizes))]
        r_c_so = [r_c_plain[g] - _b_herm(dx_a[g] @ dz_a[g] @ z_inv[g])
                  for g in range(len(groups.sizes))]
        dx, dy, dz = direction(r_c_so)
        ap, ad = steps(dx, dz)
        dx_p, dy_p, dz_p = direction(r_c_plain)
        ap_p, ad_p = steps(dx_p, dz_p)
        if ap_p + ad_p > ap + ad:
            dx, dy, dz, ap, ad = dx_p, dy_p, dz_p, ap_p, ad_p
        if ap < 1e-12 and ad < 1e-12:
            break
        # the step bound is approximate near the boundary: back off until
        # strictly positive definite
        for _ in range(40):
            if all(_b_min_eig(x[g] + ap * dx[g]) > 0.0
                   for g in range(len(groups.sizes))):
                break
            ap *= 0.5
        for _ in range(40):
            if all(_b_min_eig(z[g] + ad * dz[g]) > 0.0
                   for g in range(len(groups.sizes))):
                break
            ad *= 0.5
        for g in range(len(groups.sizes)):
            x[g] = _b_herm(x[g] + ap * dx[g])
            z[g] = _b_herm(z[g] + ad * dz[g])
        y = y + ad * dy

    if status is not SdpStatus.INFEASIBLE and best is not None:
        # fall back to the best recorded iterate if later steps degraded it
        x_f, y_f, z_f = best
        x, y, z = [g.copy() for g in x_f], y_f.copy(), [g.copy() for g in z_f]
    pobj, dobj = objective()
    gap = pobj - dobj
    pinf = dinf = 0.0
    if status is not SdpStatus.INFEASIBLE:
        r_p = b - groups.apply_a(x)
        aty = groups.apply_a_adjoint(y)
        pinf = float(np.linalg.norm(r_p)) / (1.0 + norm_b)
        dinf = max(float(np.linalg.norm(groups.c[g] - aty[g] - z[g]))
                   for g in range(len(groups.sizes))) / (1.0 + norm_c)
        tol_gap = default_gap_tol(pobj) if gap_tol is None else gap_tol
        if pinf <= max(feas_tol, 1e-8) and dinf <= max(feas_tol, 1e-8) and abs(gap) <= tol_gap:
            status = SdpStatus.OPTIMAL
        elif status is not SdpStatus.MAX_ITER:
            status = SdpStatus.MAX_ITER
    if record_trace:
        trace.append(IterateRecord(it, pobj, dobj, gap, pinf, dinf))
    x_out = groups.gather(x, num_blocks)
    z_out = groups.gather([g * c_scale for g in z], num_blocks)
    y_out = y * c_scale / row_scale
    return SdpSolution(x_out, y_out, z_out, pobj, dobj, gap, status, it,
                       pinf, dinf, trace)
