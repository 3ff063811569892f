"""LCU coefficient one-norm and its breakdown into one-body, plane-wave (xi)
and on-site (chi) contributions.

Summation order is deterministic (sorted keys) and uses exactly rounded
accumulation (math.fsum), so the norm feeding the integer QPE iteration
count is run-to-run identical.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .dataset import BlochDataset
from .factorize import LcuFactorization


@dataclass(frozen=True)
class NormBreakdown:
    """lambda split per the quarter-weighted two-family sum.

    ``xi_by_q_g`` maps (J, Q, G) to the weighted plane-wave contribution;
    ``chi_by_q_a_rs`` maps (J, Q, atom, m) to the on-site contribution with
    sqrt|eps_rs| already absorbed into the block eigenvalues, so the total
    applies no further |eps| factor.
    """

    lambda_one_body: float
    xi_by_q_g: dict
    chi_by_q_a_rs: dict
    lambda_two_body: float
    lambda_total: float

    @property
    def lambda_two_body_soft(self) -> float:
        return 0.25 * math.fsum(self.xi_by_q_g[k] for k in sorted(self.xi_by_q_g))

    @property
    def lambda_two_body_hard(self) -> float:
        return 0.25 * math.fsum(self.chi_by_q_a_rs[k] for k in sorted(self.chi_by_q_a_rs))


def lambda_one_body(one_body) -> float:
    """Sum of |eps_i(k)| over k and retained i."""
    return math.fsum(
        abs(float(e)) for factor in one_body for e in factor.eigenvalues[: factor.retained]
    )


def _family_abs_sums(blocks: dict) -> dict:
    """Per family (key minus k): (weight, sum over k and i of |f|)."""
    fams: dict = {}
    for key in sorted(blocks):
        block = blocks[key]
        fam = key[:-1]
        w, vals = fams.get(fam, (block.weight, []))
        vals.append(math.fsum(abs(float(x)) for x in block.f))
        fams[fam] = (w, vals)
    return {fam: (w, math.fsum(vals)) for fam, (w, vals) in fams.items()}


def xi_soft(soft_blocks: dict, j: int, q_flat: int, g_index: int) -> float:
    """xi = w * (sum_k sum_i |f_i|)^2 for one (J, G, Q) plane-wave family."""
    total = math.fsum(
        math.fsum(abs(float(x)) for x in b.f)
        for key, b in sorted(soft_blocks.items())
        if key[:3] == (j, g_index, q_flat)
    )
    weight = next(
        (b.weight for key, b in soft_blocks.items() if key[:3] == (j, g_index, q_flat)), 0.0
    )
    return weight * total * total


def chi_hard(hard_blocks: dict, a: int, m: int, j: int, q_flat: int) -> float:
    """chi = (sum_k sum_i |f|)^2 for one on-site family; sqrt|eps| absorbed."""
    total = math.fsum(
        math.fsum(abs(float(x)) for x in b.f)
        for key, b in sorted(hard_blocks.items())
        if key[:4] == (j, a, m, q_flat)
    )
    return total * total


def lambda_total(fact: LcuFactorization, ds: BlochDataset | None = None) -> NormBreakdown:
    """Assemble the full breakdown with the 1/4 prefactor on the two-body
    families (spin sum and second-order Chebyshev both contribute a half)."""
    lam1 = lambda_one_body(fact.one_body)

    xi = {}
    for fam, (w, s) in sorted(_family_abs_sums(fact.soft_blocks).items()):
        j, gi, qf = fam
        xi[(j, qf, gi)] = w * s * s

    chi = {}
    for fam, (_w, s) in sorted(_family_abs_sums(fact.hard_blocks).items()):
        j, a, m, qf = fam
        chi[(j, qf, a, m)] = s * s

    lam2 = 0.25 * math.fsum(
        [xi[key] for key in sorted(xi)] + [chi[key] for key in sorted(chi)]
    )
    return NormBreakdown(
        lambda_one_body=lam1,
        xi_by_q_g=xi,
        chi_by_q_a_rs=chi,
        lambda_two_body=lam2,
        lambda_total=lam1 + lam2,
    )
