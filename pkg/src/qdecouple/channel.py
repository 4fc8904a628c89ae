"""Completely positive maps as Choi matrices, with Kraus and Stinespring forms.

The Choi matrix lives on labels (A', out) where A' is a copy of the input
system, normalized so the identity channel has Choi trace one; the input
marginal of a trace-preserving channel's Choi matrix is I/dim_in.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from qdecouple import haar
from qdecouple.linalg import (
    Dims,
    LabelError,
    StateOperator,
    apply_matrix,
    check_cap,
    dims_of,
    hermitian_part,
    partial_trace,
    state_from_json,
    state_to_json,
)

IN_LABEL = "A'"
TP_TOL = 1e-9
KRAUS_CUTOFF = 1e-12


class ChannelError(ValueError):
    """Malformed channel data or dimension mismatch."""


class TraceClass(enum.Enum):
    TRACE_PRESERVING = "TracePreserving"
    TRACE_NON_INCREASING = "TraceNonIncreasing"
    GENERAL = "General"


@dataclass(frozen=True)
class KrausSet:
    """Operators of size dim_out x dim_in; sum K^H K <= I for TNI channels."""

    operators: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        if not self.operators:
            raise ChannelError("empty Kraus set")
        shape = self.operators[0].shape
        for k in self.operators:
            if k.shape != shape:
                raise ChannelError("inconsistent Kraus operator shapes")

    @property
    def dim_in(self) -> int:
        return self.operators[0].shape[1]

    @property
    def dim_out(self) -> int:
        return self.operators[0].shape[0]


@dataclass(frozen=True)
class Channel:
    """CPM with Choi matrix on (A', out_label)."""

    dim_in: int
    dim_out: int
    choi: StateOperator
    out_label: str = "B"
    trace_class: TraceClass = field(default=TraceClass.GENERAL)

    def __post_init__(self) -> None:
        want = ((IN_LABEL, self.dim_in), (self.out_label, self.dim_out))
        if self.choi.dims.pairs != want:
            raise ChannelError(f"Choi dims {self.choi.dims.pairs} != {want}")
        object.__setattr__(self, "trace_class", _classify(self.choi, self.dim_in))

    @property
    def choi_tensor(self) -> np.ndarray:
        return self.choi.matrix.reshape(self.dim_in, self.dim_out,
                                        self.dim_in, self.dim_out)


def _classify(choi: StateOperator, dim_in: int) -> TraceClass:
    marg = partial_trace(choi, [IN_LABEL]).matrix
    target = np.eye(dim_in) / dim_in
    if float(np.abs(marg - target).max()) <= TP_TOL:
        return TraceClass.TRACE_PRESERVING
    w = np.linalg.eigvalsh(hermitian_part(target - marg))
    if float(w[0]) >= -TP_TOL:
        return TraceClass.TRACE_NON_INCREASING
    return TraceClass.GENERAL


def channel_from_choi(choi_matrix: np.ndarray, dim_in: int, dim_out: int,
                      out_label: str = "B", cap: int | None = None) -> Channel:
    op = StateOperator(dims_of((IN_LABEL, dim_in), (out_label, dim_out)),
                       choi_matrix, cap=cap)
    return Channel(dim_in, dim_out, op, out_label)


def choi_of(kraus: KrausSet | Sequence[np.ndarray], out_label: str = "B",
            cap: int | None = None) -> Channel:
    """Choi matrix of a Kraus decomposition: J = sum_i |k_i><k_i| / dim_in."""
    if not isinstance(kraus, KrausSet):
        kraus = KrausSet(tuple(np.asarray(k, dtype=complex) for k in kraus))
    din, dout = kraus.dim_in, kraus.dim_out
    check_cap(din * dout, cap)
    j = np.zeros((din * dout, din * dout), dtype=complex)
    for k in kraus.operators:
        vec = k.T.reshape(-1)  # index (a, b) -> K[b, a]
        j += np.outer(vec, vec.conj())
    return channel_from_choi(j / din, din, dout, out_label, cap=cap)


def kraus_of(ch: Channel) -> KrausSet:
    """Kraus operators from the Choi eigendecomposition, zero modes dropped."""
    w, v = np.linalg.eigh(hermitian_part(ch.choi.matrix * ch.dim_in))
    ops = []
    for i in range(len(w) - 1, -1, -1):
        if w[i] <= KRAUS_CUTOFF:
            break
        vec = np.sqrt(w[i]) * v[:, i]
        ops.append(vec.reshape(ch.dim_in, ch.dim_out).T)
    if not ops:
        ops = [np.zeros((ch.dim_out, ch.dim_in), dtype=complex)]
    return KrausSet(tuple(ops))


def apply(ch: Channel, state: StateOperator, on: Sequence[str],
          cap: int | None = None) -> StateOperator:
    """Apply the channel to the ``on`` subsystems via Choi contraction.

    The ``on`` labels are replaced by the channel's output label, which must
    not collide with the remaining labels.
    """
    on = list(on)
    din = 1
    for lab in on:
        din *= state.dims.dim_of(lab)
    if din != ch.dim_in:
        raise ChannelError(f"subsystem dim {din} != channel input dim {ch.dim_in}")
    rest = [lab for lab in state.labels if lab not in set(on)]
    if ch.out_label in rest:
        raise LabelError(f"output label {ch.out_label!r} collides with {rest}")
    perm = state.permute(on + rest)
    dr = perm.dims.total // din
    t = perm.matrix.reshape(din, dr, din, dr)
    out = ch.dim_in * np.einsum("abcd,arcs->brds", ch.choi_tensor, t, optimize=True)
    rest_pairs = tuple((lab, state.dims.dim_of(lab)) for lab in rest)
    new_dims = Dims(((ch.out_label, ch.dim_out),) + rest_pairs)
    check_cap(new_dims.total, cap)
    d = new_dims.total
    return StateOperator(new_dims, out.reshape(d, d), validate=False)


def apply_via_kraus(ch: Channel, state: StateOperator, on: Sequence[str],
                    cap: int | None = None) -> StateOperator:
    """Kraus-route application; used to cross-check the Choi contraction."""
    out_pairs = ((ch.out_label, ch.dim_out),)
    total = None
    for k in kraus_of(ch).operators:
        term = apply_matrix(state, k, on, out=out_pairs, cap=cap)
        total = term.matrix if total is None else total + term.matrix
        dims = term.dims
    return StateOperator(dims, total, validate=False)


def stinespring(ch: Channel) -> np.ndarray:
    """Isometry V: in -> out (x) env with tr_env(V rho V^H) = ch(rho).

    The environment dimension equals the Kraus rank.
    """
    if ch.trace_class is not TraceClass.TRACE_PRESERVING:
        raise ChannelError("Stinespring dilation requires a trace-preserving channel")
    ops = kraus_of(ch).operators
    env = len(ops)
    v = np.zeros((ch.dim_out * env, ch.dim_in), dtype=complex)
    for i, k in enumerate(ops):
        v[i::env, :] = k  # row (b, i) = (b * env + i)
    return v


def complementary(ch: Channel, out_label: str = "Env",
                  cap: int | None = None) -> Channel:
    """Environment side of the Stinespring dilation."""
    if ch.trace_class is not TraceClass.TRACE_PRESERVING:
        raise ChannelError("complementary channel requires a trace-preserving channel")
    ops = kraus_of(ch).operators
    env = len(ops)
    # L_b[i, a] = K_i[b, a] so that comp(rho) = sum_b L_b rho L_b^H
    kraus_comp = []
    for b in range(ch.dim_out):
        l_b = np.zeros((env, ch.dim_in), dtype=complex)
        for i, k in enumerate(ops):
            l_b[i, :] = k[b, :]
        kraus_comp.append(l_b)
    return choi_of(kraus_comp, out_label=out_label, cap=cap)


# ---------------------------------------------------------------------------
# channel builders
# ---------------------------------------------------------------------------

def identity_channel(d: int, out_label: str = "B", cap: int | None = None) -> Channel:
    return choi_of([np.eye(d, dtype=complex)], out_label=out_label, cap=cap)


def reference_channel(kind: str, m: int, m_prime: int | None = None,
                      out_label: str = "B", cap: int | None = None) -> Channel:
    """Reference channels on m qubits: identity, measurement, erasure, and the
    identity-plus-measurement / identity-plus-partial-trace combinations.

    Erasure maps everything to a fixed state of a trivial (one-dimensional)
    output system.
    """
    if m < 0 or (m_prime is not None and not (0 <= m_prime <= m)):
        raise ChannelError(f"invalid qubit counts m={m}, m_prime={m_prime}")
    d = 2 ** m
    if kind == "id":
        return identity_channel(d, out_label, cap=cap)
    if kind == "meas":
        ops = [np.zeros((d, d), dtype=complex) for _ in range(d)]
        for i in range(d):
            ops[i][i, i] = 1.0
        return choi_of(ops, out_label=out_label, cap=cap)
    if kind == "erase":
        ops = [np.zeros((1, d), dtype=complex) for _ in range(d)]
        for i in range(d):
            ops[i][0, i] = 1.0
        return choi_of(ops, out_label=out_label, cap=cap)
    if m_prime is None:
        raise ChannelError(f"builder {kind!r} needs m_prime")
    dk = 2 ** m_prime       # kept coherently
    dm = 2 ** (m - m_prime)  # measured or traced out
    if kind == "id+meas":
        ops = []
        for i in range(dm):
            proj = np.zeros((dm, dm), dtype=complex)
            proj[i, i] = 1.0
            ops.append(np.kron(np.eye(dk, dtype=complex), proj))
        return choi_of(ops, out_label=out_label, cap=cap)
    if kind == "id+trace":
        ops = []
        for i in range(dm):
            bra = np.zeros((1, dm), dtype=complex)
            bra[0, i] = 1.0
            ops.append(np.kron(np.eye(dk, dtype=complex), bra))
        return choi_of(ops, out_label=out_label, cap=cap)
    raise ChannelError(f"unknown channel kind {kind!r}")


def random_tp_channel(rng: np.random.Generator, dim_in: int, dim_out: int,
                      env: int | None = None, out_label: str = "B",
                      cap: int | None = None) -> Channel:
    """TPCPM from a Haar-random Stinespring isometry."""
    env = env if env is not None else dim_in
    total = dim_out * env
    if total < dim_in:
        raise ChannelError("dim_out * env must be at least dim_in")
    u = haar.haar_unitary(total, rng)
    v = u[:, :dim_in]
    # rows of V grouped as (out, env): K_i[b, a] = V[(b, i), a]
    kraus = []
    for i in range(env):
        k = np.zeros((dim_out, dim_in), dtype=complex)
        for b in range(dim_out):
            k[b, :] = v[b * env + i, :]
        kraus.append(k)
    return choi_of(kraus, out_label=out_label, cap=cap)


def random_cpm(rng: np.random.Generator, dim_in: int, dim_out: int,
               trace: float = 1.0, out_label: str = "B",
               cap: int | None = None) -> Channel:
    """CPM with a Ginibre-random Choi matrix of the given trace (<= 1)."""
    d = dim_in * dim_out
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    j = g @ g.conj().T
    j *= trace / float(np.trace(j).real)
    return channel_from_choi(j, dim_in, dim_out, out_label, cap=cap)


# ---------------------------------------------------------------------------
# serialization and spec strings
# ---------------------------------------------------------------------------

_SPEC_RE = re.compile(r"^(id|meas|erase|id\+meas|id\+trace):(\d+)(?:,(\d+))?$")


def parse_spec(spec: str, cap: int | None = None) -> Channel:
    """Builder strings: id:m, meas:m, erase:m, id+meas:m,m', id+trace:m,m'."""
    m = _SPEC_RE.match(spec.strip())
    if not m:
        raise ChannelError(f"cannot parse channel spec {spec!r}")
    kind, m_qubits, m_prime = m.group(1), int(m.group(2)), m.group(3)
    return reference_channel(kind, m_qubits,
                             int(m_prime) if m_prime is not None else None,
                             cap=cap)


def channel_to_json(ch: Channel) -> dict:
    return {"dim_in": ch.dim_in, "dim_out": ch.dim_out,
            "choi": state_to_json(ch.choi)}


def channel_from_json(obj: dict | str, cap: int | None = None) -> Channel:
    if isinstance(obj, str):
        obj = json.loads(obj)
    choi = state_from_json(obj["choi"], cap=cap)
    din, dout = int(obj["dim_in"]), int(obj["dim_out"])
    out_label = choi.dims.pairs[1][0]
    return Channel(din, dout, choi, out_label)
