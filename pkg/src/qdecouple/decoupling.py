"""Randomized decoupling experiments: Monte Carlo trace distances against
entropy bounds, plus the converse inequality checker and the randomized
property suites backing the proofs.

The integrand is || T(U rho U^H) - tau_B (x) rho_E ||_1 with tau_B the output
marginal of the channel's Choi matrix and U Haar on the input system.
Sampling is indexed by (seed, sample), so worker scheduling cannot change any
reported number.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from qdecouple import channel as chan
from qdecouple import entropy
from qdecouple import haar
from qdecouple.linalg import (
    Dims,
    StateOperator,
    apply_matrix,
    hermitian_part,
    partial_trace,
    psd_power,
    maximally_entangled,
    sqrt_psd,
    swap_operator,
    trace_norm,
)


class DecouplingError(ValueError):
    """Invalid experiment configuration or violated precondition."""


@dataclass(frozen=True)
class DecouplingExperiment:
    """State on (input, reference) systems, a channel on the input, and the
    Monte Carlo configuration."""

    state: StateOperator
    channel: chan.Channel
    num_samples: int
    epsilon: float = 0.0
    seed: haar.RngSeed = haar.RngSeed(0)
    on: tuple[str, ...] = ("A",)

    def __post_init__(self) -> None:
        if self.num_samples < 1:
            raise DecouplingError("num_samples must be positive")
        if not (0.0 <= self.epsilon < 1.0):
            raise DecouplingError("epsilon must lie in [0, 1)")
        din = 1
        for lab in self.on:
            din *= self.state.dims.dim_of(lab)
        if din != self.channel.dim_in:
            raise DecouplingError(
                f"channel input dim {self.channel.dim_in} != system dim {din}")

    @property
    def reference_labels(self) -> tuple[str, ...]:
        return tuple(lab for lab in self.state.labels if lab not in set(self.on))


@dataclass
class DecouplingReport:
    empirical_mean: float
    std_error: float
    bound_nonsmooth: float
    bound_smooth: float | None
    epsilon: float
    num_samples: int
    seed: haar.RngSeed
    per_sample_distances: list[float] | None = None

    def to_json(self) -> dict:
        return {
            "empirical_mean": self.empirical_mean,
            "std_error": self.std_error,
            "bound_nonsmooth": self.bound_nonsmooth,
            "bound_smooth": self.bound_smooth,
            "epsilon": self.epsilon,
            "num_samples": self.num_samples,
            "seed": self.seed.to_json(),
            "per_sample_distances": self.per_sample_distances,
        }

    def samples_csv(self) -> str:
        if self.per_sample_distances is None:
            raise DecouplingError("per-sample distances were not retained")
        lines = ["sample,distance"]
        lines += [f"{i},{d!r}" for i, d in enumerate(self.per_sample_distances)]
        return "\n".join(lines) + "\n"


MAX_RETAINED_SAMPLES = 10_000


def _target_output(state: StateOperator, ch: chan.Channel, on: Sequence[str]
                   ) -> np.ndarray:
    """tau_B (x) rho_E in the output label order of ``apply``."""
    tau_b = partial_trace(ch.choi, [ch.out_label]).matrix
    rest = [lab for lab in state.labels if lab not in set(on)]
    if rest:
        rho_e = partial_trace(state, rest).matrix
        return np.kron(tau_b, rho_e)
    return tau_b


def sample_distance(state: StateOperator, ch: chan.Channel, u: np.ndarray,
                    on: Sequence[str] = ("A",)) -> float:
    """|| T(U rho U^H) - tau_B (x) rho_E ||_1 for one unitary U."""
    d = u.shape[0]
    if u.shape != (d, d) or float(np.abs(u @ u.conj().T - np.eye(d)).max()) > 1e-10:
        raise DecouplingError("U is not unitary within tolerance")
    rotated = apply_matrix(state, u, list(on))
    out = chan.apply(ch, rotated, list(on))
    return trace_norm(out.matrix - _target_output(state, ch, on))


def run(experiment: DecouplingExperiment, workers: int = 1,
        smooth: bool | None = None) -> DecouplingReport:
    """Monte Carlo average of the decoupling distance with entropy bounds.

    The smooth bound (an extra pair of SDP solves) is computed when the
    experiment's epsilon is positive or ``smooth`` is set explicitly.
    Results are bit-reproducible for a fixed seed at any worker count: sample
    i is a pure function of (seed, i) and aggregation is a fixed-order
    reduction over the sample index.
    """
    exp = experiment
    state, ch, on = exp.state, exp.channel, list(exp.on)
    d_in = ch.dim_in
    perm = state.permute(on + list(exp.reference_labels))
    target = _target_output(state, ch, on)
    d_r = perm.dims.total // d_in
    mat = perm.matrix.reshape(d_in, d_r, d_in, d_r)
    choi_t = ch.choi_tensor

    def one(i: int) -> float:
        u = haar.haar_unitary_indexed(exp.seed, i, d_in)
        rot = np.einsum("ik,krls,jl->irjs", u, mat, u.conj(), optimize=True)
        out = d_in * np.einsum("abcd,arcs->brds", choi_t, rot, optimize=True)
        dt = ch.dim_out * d_r
        return trace_norm(out.reshape(dt, dt) - target)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            distances = np.array(list(pool.map(one, range(exp.num_samples))))
    else:
        distances = np.array([one(i) for i in range(exp.num_samples)])

    mean = float(np.mean(distances))
    if exp.num_samples > 1:
        std_err = float(np.std(distances, ddof=1) / math.sqrt(exp.num_samples))
    else:
        std_err = 0.0
    b_ns = bound_nonsmooth(state, ch, on)
    b_s = None
    want_smooth = smooth if smooth is not None else exp.epsilon > 0.0
    if (want_smooth and ch.trace_class is not chan.TraceClass.GENERAL
            and abs(state.trace - 1.0) <= 1e-9):
        b_s = bound_smooth(state, ch, exp.epsilon, on)
    retained = distances.tolist() if exp.num_samples <= MAX_RETAINED_SAMPLES else None
    return DecouplingReport(mean, std_err, b_ns, b_s, exp.epsilon,
                            exp.num_samples, exp.seed, retained)


def bound_nonsmooth(state: StateOperator, ch: chan.Channel,
                    on: Sequence[str] = ("A",)) -> float:
    """2^(-H2(A|E)/2 - H2(A|B)/2) with collision entropies at default sigma.

    Valid for any CPM; the default conditioning operators only loosen the
    bound, never break it.
    """
    refs = [lab for lab in state.labels if lab not in set(on)]
    h2_state = entropy.h2(state, tuple(on), tuple(refs)).value
    h2_choi = entropy.h2(ch.choi, (chan.IN_LABEL,), (ch.out_label,)).value
    return 2.0 ** (-0.5 * h2_state - 0.5 * h2_choi)


def bound_smooth(state: StateOperator, ch: chan.Channel, epsilon: float,
                 on: Sequence[str] = ("A",)) -> float:
    """2^(-Hmin^eps(A|E)/2 - Hmin^eps(A|B)/2) + 12 eps.

    Requires a channel with Choi trace at most one and a normalized state.
    """
    if ch.choi.trace > 1.0 + 1e-9:
        raise DecouplingError("smooth bound needs Choi trace at most one")
    if abs(state.trace - 1.0) > 1e-9:
        raise DecouplingError("smooth bound needs a normalized state")
    refs = [lab for lab in state.labels if lab not in set(on)]
    h_state = entropy.h_min_smooth(state, tuple(on), tuple(refs), epsilon).value
    h_choi = entropy.h_min_smooth(ch.choi, (chan.IN_LABEL,), (ch.out_label,),
                                  epsilon).value
    return 2.0 ** (-0.5 * h_state - 0.5 * h_choi) + 12.0 * epsilon


@dataclass
class ConverseReport:
    lhs: float
    rhs: float
    holds: bool
    measured_distance: float
    h_min_smooth_state: float
    h_max_joint: float
    h_min_output: float
    h_max_conditional: float  # conjectured replacement term, reported only
    epsilons: tuple[float, float, float, float]

    def to_json(self) -> dict:
        return {
            "lhs": self.lhs, "rhs": self.rhs, "holds": self.holds,
            "measured_distance": self.measured_distance,
            "h_min_smooth_state": self.h_min_smooth_state,
            "h_max_joint": self.h_max_joint,
            "h_min_output": self.h_min_output,
            "h_max_conditional": self.h_max_conditional,
            "epsilons": list(self.epsilons),
        }


def converse_check(state: StateOperator, ch: chan.Channel, eps: float,
                   eps1: float, eps2: float, eps3: float,
                   on: Sequence[str] = ("A",)) -> ConverseReport:
    """Check the converse inequality at the given smoothing parameters.

    Requires || T(rho_AE) - T(rho_A) (x) rho_E ||_1 <= eps (verified
    numerically) and a trace-one Choi matrix.  The conditional max-entropy of
    the tilted Choi state is reported alongside as data for the conjectured
    sharper form, but nothing is asserted about it.
    """
    if abs(ch.choi.trace - 1.0) > 1e-9:
        raise DecouplingError("converse needs a channel with Choi trace one")
    if abs(state.trace - 1.0) > 1e-9:
        raise DecouplingError("converse needs a normalized state")
    if eps1 <= 0 or eps2 < 0 or eps3 < 0:
        raise DecouplingError("smoothing parameters must satisfy eps1 > 0, eps2, eps3 >= 0")
    on = list(on)
    refs = [lab for lab in state.labels if lab not in set(on)]
    out_full = chan.apply(ch, state, on)
    rho_a = partial_trace(state, on).permute(on)
    out_a = chan.apply(ch, rho_a, on)
    rho_e = partial_trace(state, refs).matrix if refs else np.eye(1)
    measured = trace_norm(out_full.matrix - np.kron(out_a.matrix, rho_e))
    if measured > eps + 1e-12:
        raise DecouplingError(
            f"decoupling precondition fails: measured {measured:.3e} > eps {eps:.3e}")

    smooth_param = eps1 + 2 * eps2 + eps3 + math.sqrt(2 * eps)
    if smooth_param >= 1.0:
        raise DecouplingError(f"total smoothing {smooth_param:.3f} is not below 1")

    # tilted Choi state: dim_in * sqrt(rho_A) J sqrt(rho_A), trace one for
    # trace-preserving channels
    root_a = sqrt_psd(rho_a.matrix)
    tilt = np.kron(root_a, np.eye(ch.dim_out))
    tau_mat = ch.dim_in * hermitian_part(tilt @ ch.choi.matrix @ tilt)
    tau = StateOperator(ch.choi.dims, tau_mat, validate=False)

    h_state = entropy.h_min_smooth(state, tuple(on), tuple(refs), smooth_param).value
    h_joint = entropy.h_max_smooth(tau, (chan.IN_LABEL, ch.out_label),
                                   epsilon=eps2).value
    h_out = entropy.h_min_smooth(tau, (ch.out_label,), epsilon=eps3).value
    h_cond = entropy.h_max(tau, (chan.IN_LABEL,), (ch.out_label,)).value
    lhs = h_state + h_joint - h_out
    rhs = -math.log2(2.0 / (eps1 * eps1))
    return ConverseReport(lhs, rhs, lhs >= rhs - 1e-6, measured, h_state,
                          h_joint, h_out, h_cond, (eps, eps1, eps2, eps3))


def default_converse_epsilons(eps: float, floor: float = 1e-3
                              ) -> tuple[float, float, float]:
    """Default smoothing split (sqrt(eps), 0, 2 sqrt(eps)) with a small floor."""
    root = max(math.sqrt(max(eps, 0.0)), floor)
    return root, 0.0, 2 * root


# ---------------------------------------------------------------------------
# randomized property suites for the proof ingredients
# ---------------------------------------------------------------------------

@dataclass
class LemmaReport:
    name: str
    trials: int
    failures: int
    worst_slack: float

    @property
    def passed(self) -> bool:
        return self.failures == 0


def _rnd_matrix(rng: np.random.Generator, d: int) -> np.ndarray:
    return rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))


def verify_proof_lemmas(seed: haar.RngSeed | int = 0, trials: int = 200,
                        dims: Sequence[int] = (2, 3, 4)) -> dict[str, LemmaReport]:
    """Randomized checks of the swap trick, the two-copy purity ratio, and
    the weighted trace-norm bound.  Failures are reported, never raised.
    """
    rng = haar.generator(seed if isinstance(seed, haar.RngSeed) else haar.RngSeed(seed))
    reports: dict[str, LemmaReport] = {}

    fails = 0
    worst = 0.0
    for _ in range(trials):
        d = int(rng.choice(list(dims)))
        m, n = _rnd_matrix(rng, d), _rnd_matrix(rng, d)
        lhs = complex(np.trace(np.kron(m, n) @ swap_operator(d)))
        rhs = complex(np.trace(m @ n))
        err = abs(lhs - rhs)
        worst = max(worst, err)
        if err > 1e-10 * max(1.0, abs(rhs)):
            fails += 1
    reports["swap_trick"] = LemmaReport("swap_trick", trials, fails, worst)

    fails = 0
    worst = 0.0
    for _ in range(trials):
        da = int(rng.choice(list(dims)))
        db = int(rng.choice(list(dims)))
        g = _rnd_matrix(rng, da * db)
        xi = g @ g.conj().T
        xi_b = np.einsum("abad->bd", xi.reshape(da, db, da, db))
        ratio = float(np.trace(xi @ xi).real) / float(np.trace(xi_b @ xi_b).real)
        slack = max(1.0 / da - ratio, ratio - da, 0.0)
        worst = max(worst, slack)
        if slack > 1e-10:
            fails += 1
    reports["purity_ratio"] = LemmaReport("purity_ratio", trials, fails, worst)

    fails = 0
    worst = 0.0
    for t in range(trials):
        d = int(rng.choice(list(dims)))
        m = hermitian_part(_rnd_matrix(rng, d))
        g = _rnd_matrix(rng, d)
        sigma = g @ g.conj().T
        if t % 5 == 1:
            # adversarial near-singular weight, above the inverse cutoff
            w, v = np.linalg.eigh(sigma)
            w[0] = 1e-8 * w[-1]
            sigma = (v * w) @ v.conj().T
        elif t % 5 == 3 and d >= 3:
            # exactly singular weight with M inside its support
            w, v = np.linalg.eigh(sigma)
            w[0] = 0.0
            sigma = (v * w) @ v.conj().T
            proj = (v[:, 1:]) @ v[:, 1:].conj().T
            m = hermitian_part(proj @ m @ proj)
        tilt = psd_power(sigma, -0.25)
        rhs = math.sqrt(float(np.trace(sigma).real)
                        * float(np.trace((tilt @ m @ tilt) @ (tilt @ m @ tilt)).real))
        slack = trace_norm(m) - rhs
        worst = max(worst, slack)
        if slack > 1e-8:
            fails += 1
    reports["weighted_trace_norm"] = LemmaReport("weighted_trace_norm", trials,
                                                 fails, worst)
    return reports


def lemma_report_json(reports: dict[str, LemmaReport]) -> dict:
    return {name: {"trials": r.trials, "failures": r.failures,
                   "worst_slack": r.worst_slack, "passed": r.passed}
            for name, r in reports.items()}


# ---------------------------------------------------------------------------
# reference states
# ---------------------------------------------------------------------------

def independent_state(k: int, rho_e: np.ndarray | None = None,
                      cap: int | None = None) -> StateOperator:
    """k uniformly random bits, uncorrelated with the reference."""
    d = 2 ** k
    if rho_e is None:
        rho_e = np.eye(d) / d
    d_e = rho_e.shape[0]
    pairs = (("A", d), ("E", d_e))
    return StateOperator(Dims(pairs), np.kron(np.eye(d) / d, rho_e), cap=cap)


def classical_state(k: int, cap: int | None = None) -> StateOperator:
    """k bits perfectly correlated with a classical reference register."""
    d = 2 ** k
    m = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        m[i * d + i, i * d + i] = 1.0 / d
    return StateOperator(Dims((("A", d), ("E", d))), m, cap=cap)


def entangled_state(k: int, cap: int | None = None) -> StateOperator:
    """k qubits maximally entangled with the reference."""
    return maximally_entangled("A", "E", 2 ** k, cap=cap).to_operator()
