"""Closed-form qubit predictions and the consecutive-measurement inequalities.

For two back-to-back measurements along x then y the joint probability
factorizes as P(x^a, y^b) = P(x^a) (1 + ab x.y)/2, because the second
measurement sees the eigenstate left by the first.  The signed sum over
outcome pairs then collapses to E(x, y) = x.y for every initial state.

Inequality ids and their content:

    EQ4   N(a+c-) <= N(a+b-) + N(b+c-)            hidden-reality counts
    EQ6   N[a+c-] <= N[a+b-] + N[b+c-]            observed run counts
    EQ7   P(a+,c-) <= P(a+,b-) + P(b+,c-)         pair probabilities
    EQ8   P(a-,c+) <= P(a-,b+) + P(b-,c+)         mirrored signs
    EQ10  E(a,b) + E(b,c) - E(a,c) <= 1           expectations
    EQ16  a.b - a.c + b.c <= 1                    EQ10 with E = dot
    EQ18  a.b + b.c - 2 a.c + (a.b)(b.c) <= 1     EQ7 from the a+ eigenstate

EQ18 relates to EQ7 through the exact identity lhs18 = 1 - 4 * margin7, so
a probability-level estimate of EQ7 doubles as an estimate of lhs18.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

from .lhv import HiddenCountTable, Setting, check_count_inequality, hidden_marginal
from .qubit import Direction, Outcome, PureState, born_prob, dot
from .reporting import DEFAULT_SIGMA, InequalityReport, undefined_report

if TYPE_CHECKING:
    from .engine import PairProbability, RunCountTable

eval_eq4 = check_count_inequality


def quantum_pair_prob(
    state: PureState, x: Direction, sign_x: Outcome, y: Direction, sign_y: Outcome
) -> float:
    """Exact P(x^sx, y^sy) for a run measuring x then y from the given state."""
    return born_prob(state, x, sign_x) * 0.5 * (1.0 + int(sign_x) * int(sign_y) * dot(x, y))


def quantum_expectation(x: Direction, y: Direction) -> float:
    """Exact E(x, y) = x.y; independent of the initial state.

    Note the sign: two consecutive measurements on one system are positively
    correlated, opposite to the -x.y of a spatially entangled singlet pair
    (which this package does not model).
    """
    return dot(x, y)


def lhs16(a: Direction, b: Direction, c: Direction) -> float:
    """Left side of EQ16: a.b - a.c + b.c."""
    return dot(a, b) - dot(a, c) + dot(b, c)


def lhs18(a: Direction, b: Direction, c: Direction) -> float:
    """Left side of EQ18: b.(a + c) - 2 a.c + (a.b)(b.c)."""
    return dot(b, a) + dot(b, c) - 2.0 * dot(a, c) + dot(a, b) * dot(b, c)


def eq16_report(
    a: Direction, b: Direction, c: Direction, sigma_threshold: float = DEFAULT_SIGMA
) -> InequalityReport:
    return InequalityReport("EQ16", lhs=lhs16(a, b, c), rhs=1.0, sigma_threshold=sigma_threshold)


def eq18_report(
    a: Direction, b: Direction, c: Direction, sigma_threshold: float = DEFAULT_SIGMA
) -> InequalityReport:
    return InequalityReport("EQ18", lhs=lhs18(a, b, c), rhs=1.0, sigma_threshold=sigma_threshold)


def eval_eq6(table: "RunCountTable", sigma_threshold: float = DEFAULT_SIGMA) -> InequalityReport:
    """Count form on observed runs: N[a+c-] <= N[a+b-] + N[b+c-].

    The margin's standard error treats the three cells as entries of one
    multinomial over the full 36-cell table.
    """
    n_ac = table.count(Setting.A, Outcome.PLUS, Setting.C, Outcome.MINUS)
    n_ab = table.count(Setting.A, Outcome.PLUS, Setting.B, Outcome.MINUS)
    n_bc = table.count(Setting.B, Outcome.PLUS, Setting.C, Outcome.MINUS)
    if n_ac + n_ab + n_bc == 0:
        return undefined_report("EQ6", sigma_threshold)
    total = table.total_runs
    margin = n_ab + n_bc - n_ac
    p_sum = (n_ab + n_bc + n_ac) / total
    mean = margin / total
    variance = total * max(0.0, p_sum - mean * mean)
    return InequalityReport(
        "EQ6",
        lhs=float(n_ac),
        rhs=float(n_ab + n_bc),
        stderr_margin=math.sqrt(variance),
        sigma_threshold=sigma_threshold,
    )


def _prob_triplet_report(
    inequality_id: str,
    lhs_prob: "PairProbability",
    rhs_prob_1: "PairProbability",
    rhs_prob_2: "PairProbability",
    sigma_threshold: float,
) -> InequalityReport:
    if not (lhs_prob.defined and rhs_prob_1.defined and rhs_prob_2.defined):
        return undefined_report(inequality_id, sigma_threshold)
    stderr = math.sqrt(lhs_prob.stderr**2 + rhs_prob_1.stderr**2 + rhs_prob_2.stderr**2)
    return InequalityReport(
        inequality_id,
        lhs=lhs_prob.estimate,
        rhs=rhs_prob_1.estimate + rhs_prob_2.estimate,
        stderr_margin=stderr,
        sigma_threshold=sigma_threshold,
    )


def eval_eq7(
    p_ac: "PairProbability",
    p_ab: "PairProbability",
    p_bc: "PairProbability",
    sigma_threshold: float = DEFAULT_SIGMA,
) -> InequalityReport:
    """P(a+,c-) <= P(a+,b-) + P(b+,c-) on estimated probabilities."""
    return _prob_triplet_report("EQ7", p_ac, p_ab, p_bc, sigma_threshold)


def eval_eq8(
    p_ac: "PairProbability",
    p_ab: "PairProbability",
    p_bc: "PairProbability",
    sigma_threshold: float = DEFAULT_SIGMA,
) -> InequalityReport:
    """P(a-,c+) <= P(a-,b+) + P(b-,c+) on estimated probabilities."""
    return _prob_triplet_report("EQ8", p_ac, p_ab, p_bc, sigma_threshold)


def eval_eq10(e_ab, e_bc, e_ac, sigma_threshold: float = DEFAULT_SIGMA) -> InequalityReport:
    """E(a,b) + E(b,c) - E(a,c) <= 1 on expectation estimates."""
    if not (e_ab.defined and e_bc.defined and e_ac.defined):
        return undefined_report("EQ10", sigma_threshold)
    stderr = math.sqrt(e_ab.stderr**2 + e_bc.stderr**2 + e_ac.stderr**2)
    return InequalityReport(
        "EQ10",
        lhs=e_ab.value + e_bc.value - e_ac.value,
        rhs=1.0,
        stderr_margin=stderr,
        sigma_threshold=sigma_threshold,
    )


def lhs18_from_pair_probs(
    p_ac: "PairProbability", p_ab: "PairProbability", p_bc: "PairProbability"
) -> tuple[float, float]:
    """Reconstruct lhs18 and its standard error from the three EQ7 probabilities,
    via the identity lhs18 = 1 - 4 (P(a+,b-) + P(b+,c-) - P(a+,c-))."""
    if not (p_ac.defined and p_ab.defined and p_bc.defined):
        return math.nan, math.nan
    value = 1.0 - 4.0 * (p_ab.estimate + p_bc.estimate - p_ac.estimate)
    stderr = 4.0 * math.sqrt(p_ac.stderr**2 + p_ab.stderr**2 + p_bc.stderr**2)
    return value, stderr


@dataclass(frozen=True)
class Eq5Ratio:
    """Sampling-factor check: 9 N[x^sx y^sy] / N(x^sx y^sy), expected 1."""

    ratio: float
    stderr: float
    marginal: int
    observed: int

    @property
    def defined(self) -> bool:
        return self.marginal > 0


def eq5_ratio(
    hidden: HiddenCountTable,
    runs: "RunCountTable",
    x: Setting,
    sign_x: Outcome,
    y: Setting,
    sign_y: Outcome,
) -> Eq5Ratio:
    """Ratio of nine times the observed run count for ordered pair (x, y) to
    the hidden pair marginal from the same ensemble.

    Given the marginal, the observed count is binomial with success rate 1/9
    (the chance that an independent uniform pair choice picks exactly (x, y)),
    which sets the standard error.
    """
    marginal = hidden_marginal(hidden, x, sign_x, y, sign_y)
    if marginal == 0:
        return Eq5Ratio(ratio=math.nan, stderr=math.nan, marginal=0, observed=0)
    observed = runs.count(x, sign_x, y, sign_y)
    p_hat = observed / marginal
    return Eq5Ratio(
        ratio=9.0 * p_hat,
        stderr=9.0 * math.sqrt(max(0.0, p_hat * (1.0 - p_hat)) / marginal),
        marginal=marginal,
        observed=observed,
    )
