"""Block-encoding cost model: label counts, QROAM gate/qubit costs, the
seven SELECT stages plus REFLECT, walk-step and total Toffoli counts, qubit
count, and exhaustive power-of-two QROAM parameter optimization.

Per-stage costs are kept as exact rationals (one shared angle-register term
is a half-integer per pass); their sum is always an exact integer and is
checked against an independent transcription of the closed-form total.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

from .dataset import MEV_IN_HARTREE, BlochDataset
from .factorize import LcuFactorization
from .onenorm import NormBreakdown


def ceil_log2(x: int) -> int:
    """Smallest n with 2^n >= x (0 for x <= 1)."""
    return 0 if x <= 1 else int(x - 1).bit_length()


def largest_pow2_divisor_exponent(x: int) -> int:
    return (x & -x).bit_length() - 1 if x > 0 else 0


@dataclass(frozen=True)
class BitParams:
    """Classical bit-precision parameters of the circuit.

    ``n1``/``n2`` left unset are resolved from lambda and the QPE target as
    ceil(log2(2*sqrt(2)*lambda/eps)), capped at 32.
    """

    b_r: int = 7
    n1: int | None = None
    n2: int | None = None
    angle_bits: int = 16
    include_sign_qubit: bool = True

    def resolved(self, lambda_total: float, epsilon_qpe: float) -> "BitParams":
        if self.n1 is not None and self.n2 is not None:
            return self
        if lambda_total > 0 and epsilon_qpe > 0:
            auto = min(32, max(1, math.ceil(math.log2(2.0 * math.sqrt(2.0) * lambda_total / epsilon_qpe))))
        else:
            auto = 1
        return replace(self, n1=self.n1 if self.n1 is not None else auto,
                       n2=self.n2 if self.n2 is not None else auto)


@dataclass(frozen=True)
class QroamParams:
    """Power-of-two lookup parameters: forward (k_*), uncompute (*_prime),
    and the uncompute parameters of the repeated squaring pass (*_prime_b)."""

    k_p1: int = 1
    k_o: int = 1
    k_p2: int = 1
    k_r: int = 1
    k_p1_prime: int = 1
    k_o_prime: int = 1
    k_p2_prime: int = 1
    k_r_prime: int = 1
    k_p2_prime_b: int = 1
    k_r_prime_b: int = 1

    def __post_init__(self):
        for name in self.__dataclass_fields__:
            v = getattr(self, name)
            if v < 1 or (v & (v - 1)):
                raise ValueError(f"{name}={v} is not a positive power of two")

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in self.__dataclass_fields__}


@dataclass(frozen=True)
class LabelCounts:
    """Derived label-space and register-width quantities."""

    n_b: int
    n_k_points: int
    m_labels: int  # M = N_pw + 1/2 sum_a n_a (n_a + 1)
    l_labels: int  # L = 2 N_k M
    n_l: int
    eta: int
    n_k_bits: int
    rank_sum_two_body: int  # L * R_avg, exactly
    r_avg: float
    r0: int
    n_r: int
    n_lr: int
    b_r: int
    n1: int
    n2: int
    angle_bits: int
    include_sign_qubit: bool

    @property
    def b_o(self) -> int:
        return self.n_k_bits + self.n_r + self.n_lr + self.b_r + 1 + (1 if self.include_sign_qubit else 0)

    @property
    def b_p1(self) -> int:
        return self.n_l + self.n1

    @property
    def b_p2(self) -> int:
        return self.n_l + self.n2

    @property
    def n_full(self) -> int:
        """L R_avg + N_k R0, the forward data-load numerator."""
        return self.rank_sum_two_body + self.n_k_points * self.r0

    @property
    def n_two(self) -> int:
        """L R_avg, the numerator after the squaring substitution."""
        return self.rank_sum_two_body


def label_counts(ds: BlochDataset, fact: LcuFactorization, bits: BitParams) -> LabelCounts:
    if bits.n1 is None or bits.n2 is None:
        raise ValueError("BitParams must be resolved (n1/n2 set) before counting")
    m_labels = ds.n_pw + sum(site.n_a * (site.n_a + 1) for site in ds.atoms) // 2
    if sum(site.n_a * (site.n_a + 1) for site in ds.atoms) % 2:
        raise AssertionError("n_a (n_a + 1) is always even")  # pragma: no cover
    l_labels = 2 * ds.n_k * m_labels

    ranks = [b.rank for _, b in fact.all_blocks()]
    rank_sum = int(sum(ranks))
    r0 = max((f.retained for f in fact.one_body), default=0)
    max_rank = max([r0] + ranks) if (ranks or r0) else 0

    return LabelCounts(
        n_b=ds.n_b,
        n_k_points=ds.n_k,
        m_labels=m_labels,
        l_labels=l_labels,
        n_l=ceil_log2(l_labels),
        eta=largest_pow2_divisor_exponent(l_labels),
        n_k_bits=ceil_log2(ds.n_k),
        rank_sum_two_body=rank_sum,
        r_avg=rank_sum / l_labels,
        r0=r0,
        n_r=ceil_log2(max_rank),
        n_lr=ceil_log2(rank_sum + ds.n_k * r0),
        b_r=bits.b_r,
        n1=bits.n1,
        n2=bits.n2,
        angle_bits=bits.angle_bits,
        include_sign_qubit=bits.include_sign_qubit,
    )


def qroam_cost(counts: LabelCounts, bits: BitParams, k: int) -> tuple[int, int]:
    """Generic data-load cost (gates, qubits) for QROAM parameter K over the
    combined numerator L R_avg + N_b N_k."""
    if k < 1 or (k & (k - 1)):
        raise ValueError(f"K={k} is not a positive power of two")
    numerator = counts.rank_sum_two_body + counts.n_b * counts.n_k_points
    nb_b = counts.n_b * counts.angle_bits
    gates = -(-numerator // k) + 4 * nb_b * (k - 1)
    qubits = ceil_log2(-(-numerator // k)) + nb_b * k
    return int(gates), int(qubits)


def _ceil_div(n: int, k: int) -> int:
    return -(-n // k)


def stage_costs(counts: LabelCounts, bits: BitParams, params: QroamParams) -> list[Fraction]:
    """Toffoli cost of the seven SELECT stages plus the REFLECT overhead.

    Stage 6 repeats stages 2-4 with the one-body offset removed from the
    numerator; the half-weighted angle-register term it shares with stage 3
    makes individual stages half-integers while the total stays integral.
    """
    c = counts
    n_full, n_two, lp1 = c.n_full, c.n_two, c.l_labels + 1
    nb_b = c.n_b * c.angle_bits

    def inner_prep(k_p2: int, numerator: int) -> Fraction:
        return Fraction(
            (7 * c.n_r + 2 * c.b_r - 6)
            + (c.n_lr - 1)
            + _ceil_div(numerator, k_p2)
            + c.b_p2 * (k_p2 - 1)
            + (c.n2 + c.n_r)
            + 1
        )

    def givens(k_r: int, numerator: int) -> Fraction:
        return (
            Fraction(_ceil_div(numerator, k_r))
            + Fraction(4 * nb_b + c.n_k_bits, 2) * (k_r - 1)
            + Fraction(2 * (c.n_lr - 1) + 8 * c.n_b * (c.angle_bits - 2) + 3 * c.n_b * c.n_k_points + 6 * c.n_k_bits)
        )

    def cleanup(k_r_p: int, k_p2_p: int, numerator: int) -> Fraction:
        return Fraction(
            _ceil_div(numerator, k_r_p)
            + k_r_p
            + (7 * c.n_r + 2 * c.b_r - 6)
            + _ceil_div(numerator, k_p2_p)
            + k_p2_p
            + (c.n_lr - 1)
            + (c.n2 + c.n_r)
            + 1
        )

    s1 = Fraction(
        (3 * c.n_l - 3 * c.eta + 2 * c.b_r - 9)
        + _ceil_div(lp1, params.k_p1)
        + c.b_p1 * (params.k_p1 - 1)
        + c.n1
        + c.n_l
        + _ceil_div(lp1, params.k_o)
        + c.b_o * (params.k_o - 1)
    )
    s2 = inner_prep(params.k_p2, n_full)
    s3 = givens(params.k_r, n_full)
    s4 = cleanup(params.k_r_prime, params.k_p2_prime, n_full)
    s5 = Fraction(c.n_r + c.n2)
    s6 = inner_prep(params.k_p2, n_two) + givens(params.k_r, n_two) + cleanup(
        params.k_r_prime_b, params.k_p2_prime_b, n_two
    )
    s7 = Fraction(
        (3 * c.n_l - 3 * c.eta + 2 * c.b_r - 9)
        + _ceil_div(lp1, params.k_p1_prime)
        + params.k_p1_prime
        + c.n1
        + c.n_l
        + _ceil_div(lp1, params.k_o_prime)
        + params.k_o_prime
    )
    reflect = Fraction(c.n_l + c.n_r + c.n1 + c.n2 + 1 + 2)
    return [s1, s2, s3, s4, s5, s6, s7, reflect]


def walk_step_toffoli(counts: LabelCounts, bits: BitParams, params: QroamParams) -> int:
    total = sum(stage_costs(counts, bits, params))
    if total.denominator != 1:  # pragma: no cover - structural
        raise AssertionError("stage sum is not an integer")
    return int(total)


def closed_form_toffoli(counts: LabelCounts, bits: BitParams, params: QroamParams) -> int:
    """Independent transcription of the collected walk-step Toffoli formula."""
    c = counts
    p = params
    n_full, n_two, lp1 = c.n_full, c.n_two, c.l_labels + 1
    nb_b = c.n_b * c.angle_bits
    total = (
        _ceil_div(lp1, p.k_p1)
        + _ceil_div(lp1, p.k_p1_prime)
        + _ceil_div(lp1, p.k_o)
        + _ceil_div(lp1, p.k_o_prime)
        + _ceil_div(n_full, p.k_p2)
        + _ceil_div(n_two, p.k_p2)
        + _ceil_div(n_full, p.k_r)
        + _ceil_div(n_two, p.k_r)
        + _ceil_div(n_full, p.k_r_prime)
        + _ceil_div(n_two, p.k_r_prime_b)
        + _ceil_div(n_full, p.k_p2_prime)
        + _ceil_div(n_two, p.k_p2_prime_b)
        + c.b_p1 * (p.k_p1 - 1)
        + c.b_o * (p.k_o - 1)
        + 2 * c.b_p2 * (p.k_p2 - 1)
        + (4 * nb_b + c.n_k_bits) * (p.k_r - 1)
        + p.k_p1_prime
        + p.k_o_prime
        + p.k_r_prime
        + p.k_r_prime_b
        + p.k_p2_prime
        + p.k_p2_prime_b
        + 9 * c.n_l
        + 34 * c.n_r
        + 8 * c.n_lr
        + 3 * c.n1
        + 6 * c.n2
        + 12 * c.b_r
        - 6 * c.eta
        + 16 * nb_b
        - 32 * c.n_b
        + 6 * c.n_b * c.n_k_points
        + 12 * c.n_k_bits
        - 43
    )
    return int(total)


def _scan_pow2(numerator: int, cost_fn) -> int:
    """Smallest power of two minimizing cost_fn among 1..2^(ceil_log2(num)+1)."""
    best_k, best = 1, cost_fn(1)
    for m in range(1, ceil_log2(max(1, numerator)) + 2):
        k = 1 << m
        val = cost_fn(k)
        if val < best:
            best_k, best = k, val
    return best_k


def optimize_qroam(counts: LabelCounts, bits: BitParams, objective: str = "gates") -> QroamParams:
    """Exhaustive per-parameter power-of-two search.  Each parameter appears
    in a disjoint group of walk-step terms, so independent scans are globally
    optimal; ties break toward smaller K."""
    if objective not in ("gates", "qubits", "weighted"):
        raise ValueError(f"unknown objective {objective!r}")
    c = counts
    n_full, n_two, lp1 = c.n_full, c.n_two, c.l_labels + 1
    nb_b = c.n_b * c.angle_bits

    k_p1 = _scan_pow2(lp1, lambda k: _ceil_div(lp1, k) + c.b_p1 * (k - 1))
    k_o = _scan_pow2(lp1, lambda k: _ceil_div(lp1, k) + c.b_o * (k - 1))
    k_p2 = _scan_pow2(
        max(1, n_full), lambda k: _ceil_div(n_full, k) + _ceil_div(n_two, k) + 2 * c.b_p2 * (k - 1)
    )

    def gates_k_r(k: int) -> Fraction:
        return Fraction(_ceil_div(n_full, k) + _ceil_div(n_two, k)) + Fraction(4 * nb_b + c.n_k_bits, 1) * (k - 1)

    def qubits_k_r(k: int) -> int:
        return 2 * ceil_log2(max(1, _ceil_div(n_full, k))) + 2 * k * nb_b

    if objective == "gates":
        k_r = _scan_pow2(max(1, n_full), gates_k_r)
    elif objective == "qubits":
        k_r = _scan_pow2(max(1, n_full), qubits_k_r)
    else:
        k_r = _scan_pow2(max(1, n_full), lambda k: gates_k_r(k) * max(1, qubits_k_r(k)))

    k_p1_prime = _scan_pow2(lp1, lambda k: _ceil_div(lp1, k) + k)
    k_o_prime = _scan_pow2(lp1, lambda k: _ceil_div(lp1, k) + k)
    k_p2_prime = _scan_pow2(max(1, n_full), lambda k: _ceil_div(n_full, k) + k)
    k_r_prime = _scan_pow2(max(1, n_full), lambda k: _ceil_div(n_full, k) + k)
    k_p2_prime_b = _scan_pow2(max(1, n_two), lambda k: _ceil_div(n_two, k) + k)
    k_r_prime_b = _scan_pow2(max(1, n_two), lambda k: _ceil_div(n_two, k) + k)

    return QroamParams(
        k_p1=k_p1,
        k_o=k_o,
        k_p2=k_p2,
        k_r=k_r,
        k_p1_prime=k_p1_prime,
        k_o_prime=k_o_prime,
        k_p2_prime=k_p2_prime,
        k_r_prime=k_r_prime,
        k_p2_prime_b=k_p2_prime_b,
        k_r_prime_b=k_r_prime_b,
    )


def qubit_count(counts: LabelCounts, params: QroamParams, qpe_iterations: int) -> int:
    """Total logical qubits, including the sign qubit inside b_o when enabled."""
    c = counts
    nb_b = c.n_b * c.angle_bits
    return (
        2 * c.n_k_points * c.r0
        + c.n_b
        + 2 * c.n_l
        + c.n_r
        + 2 * c.n1
        + c.n2
        + c.angle_bits
        + c.b_o
        + c.b_p2
        + 2 * ceil_log2(max(1, _ceil_div(max(1, c.n_full), params.k_r)))
        + 2 * params.k_r * nb_b
        + 2 * ceil_log2(qpe_iterations + 1)
        + 9
    )


@dataclass(frozen=True)
class ResourceReport:
    stage_toffolis: list  # Fractions, stages 1-7 + REFLECT
    toffoli_per_step: int
    qubits_total: int
    qpe_iterations: int
    toffoli_total: int
    qroam: QroamParams
    counts: LabelCounts
    bits: BitParams
    lambda_total: float
    lambda_one_body: float
    lambda_two_body: float
    lambda_two_body_soft: float
    lambda_two_body_hard: float
    epsilon_qpe_ha: float
    objective: str = "gates"
    composition: str = "toffoli_total = qpe_iterations * walk-step Toffoli (all seven SELECT stages plus REFLECT)"

    def to_json_dict(self) -> dict:
        return {
            "stage_toffolis": [float(s) for s in self.stage_toffolis],
            "toffoli_per_step": self.toffoli_per_step,
            "qubits_total": self.qubits_total,
            "qpe_iterations": self.qpe_iterations,
            "toffoli_total": self.toffoli_total,
            "qroam": self.qroam.as_dict(),
            "label_counts": {
                "M": self.counts.m_labels,
                "L": self.counts.l_labels,
                "n_L": self.counts.n_l,
                "eta": self.counts.eta,
                "n_k": self.counts.n_k_bits,
                "R_avg": self.counts.r_avg,
                "R0": self.counts.r0,
                "n_R": self.counts.n_r,
                "n_LR": self.counts.n_lr,
                "b_o": self.counts.b_o,
                "b_p1": self.counts.b_p1,
                "b_p2": self.counts.b_p2,
            },
            "bits": {
                "b_r": self.bits.b_r,
                "n1": self.bits.n1,
                "n2": self.bits.n2,
                "angle_bits": self.bits.angle_bits,
                "include_sign_qubit": self.bits.include_sign_qubit,
            },
            "lambda_total_ha": self.lambda_total,
            "lambda_one_body_ha": self.lambda_one_body,
            "lambda_two_body_ha": self.lambda_two_body,
            "lambda_two_body_soft_ha": self.lambda_two_body_soft,
            "lambda_two_body_hard_ha": self.lambda_two_body_hard,
            "epsilon_qpe_ha": self.epsilon_qpe_ha,
            "epsilon_qpe_mev": self.epsilon_qpe_ha / MEV_IN_HARTREE,
            "objective": self.objective,
            "composition": self.composition,
        }

    @staticmethod
    def csv_header() -> list[str]:
        return [
            "system", "N_k", "N_a", "N_b", "lambda", "qubits", "toffoli_per_step",
            "I", "toffoli_total", "b_r", "N1", "N2", "B",
            "k_p1", "k_o", "k_p2", "k_r", "k_p1_prime", "k_o_prime",
            "k_p2_prime", "k_r_prime", "k_p2_prime_b", "k_r_prime_b",
        ]

    def csv_row(self, system: str, n_atoms: int) -> list:
        q = self.qroam
        return [
            system, self.counts.n_k_points, n_atoms, self.counts.n_b,
            self.lambda_total, self.qubits_total, self.toffoli_per_step,
            self.qpe_iterations, self.toffoli_total, self.bits.b_r, self.bits.n1,
            self.bits.n2, self.bits.angle_bits, q.k_p1, q.k_o, q.k_p2, q.k_r,
            q.k_p1_prime, q.k_o_prime, q.k_p2_prime, q.k_r_prime,
            q.k_p2_prime_b, q.k_r_prime_b,
        ]


def qpe_iterations(lambda_total: float, epsilon_qpe: float) -> int:
    if epsilon_qpe <= 0:
        raise ValueError("epsilon_qpe must be positive")
    return int(math.ceil(math.pi * lambda_total / epsilon_qpe))


def total_resources(
    ds: BlochDataset,
    fact: LcuFactorization,
    bits: BitParams,
    epsilon_qpe: float,
    breakdown: NormBreakdown,
    objective: str = "gates",
) -> ResourceReport:
    """Optimize QROAM parameters, evaluate stages, and compose QPE totals."""
    bits = bits.resolved(breakdown.lambda_total, epsilon_qpe)
    counts = label_counts(ds, fact, bits)
    params = optimize_qroam(counts, bits, objective)
    stages = stage_costs(counts, bits, params)
    per_step = walk_step_toffoli(counts, bits, params)
    iters = qpe_iterations(breakdown.lambda_total, epsilon_qpe)
    return ResourceReport(
        stage_toffolis=stages,
        toffoli_per_step=per_step,
        qubits_total=qubit_count(counts, params, iters),
        qpe_iterations=iters,
        toffoli_total=iters * per_step,
        qroam=params,
        counts=counts,
        bits=bits,
        lambda_total=breakdown.lambda_total,
        lambda_one_body=breakdown.lambda_one_body,
        lambda_two_body=breakdown.lambda_two_body,
        lambda_two_body_soft=breakdown.lambda_two_body_soft,
        lambda_two_body_hard=breakdown.lambda_two_body_hard,
        epsilon_qpe_ha=epsilon_qpe,
        objective=objective,
    )
