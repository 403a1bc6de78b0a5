"""Dyadic in-approximation stages for the two-well hull.

Interior matrices are graded into stages by how far their Cauchy-Green
tensor sits from the two hull faces.  Writing d1 = 1 - c11 and
d2 = 1 + delta^2 - c22, the stage-k sets for k >= 2 are open dyadic boxes

    stage 2j:   d1 in z0 2^-(j+3) (5,7)   and  d2 in z0 2^-j (1,2)
    stage 2j+1: d1 in z0 2^-(j+1) (1,2)   and  d2 in z0 2^-(j+3) (5,7)

with j >= 1 and z0 = 2^-4 min(delta^2, 1).  Stage 1 is the catch-all with
d1 in some band 2^-(m+1) z0 (1,2) and d2 >= 7 2^-(m+3) z0; stage 0 is the
rest of the interior.  Band membership is evaluated with strict
inequalities at tolerance zero; endpoint landings drop to the catch-alls.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from . import matgeo as mg
from .errors import InvalidParameterError, NotClassifiableError

M_CAP = 60      # dyadic exponents beyond this are numerically meaningless


def zeta0(delta: float) -> float:
    if delta <= 0:
        raise InvalidParameterError("delta must be positive")
    return 2.0 ** -4 * min(delta * delta, 1.0)


def stage_band(k: int, delta: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Open (d1, d2) intervals of stage k >= 2."""
    if k < 2:
        raise InvalidParameterError("bands are defined for stages k >= 2 only")
    z0 = zeta0(delta)
    j, odd = divmod(k, 2)
    if odd:
        lo1 = math.ldexp(z0, -(j + 1))
        lo2 = math.ldexp(z0, -(j + 3))
        return (lo1, 2.0 * lo1), (5.0 * lo2, 7.0 * lo2)
    lo1 = math.ldexp(z0, -(j + 3))
    lo2 = math.ldexp(z0, -j)
    return (5.0 * lo1, 7.0 * lo1), (lo2, 2.0 * lo2)


def _classify_gaps(d1: np.ndarray, d2: np.ndarray, z0: float) -> np.ndarray:
    """Vectorized stage classification from face gaps; -1 marks bad input.

    The log2 of each gap pins the only dyadic level whose open band could
    contain it, so checking three neighboring levels is exhaustive and
    equivalent to the full scan.
    """
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    out = np.full(d1.shape, -1, dtype=np.int64)
    ok = (d1 > 0) & (d2 > 0)
    out[ok] = 0

    def band(vals, scale_exp, lo, hi):
        # strict membership of vals in z0 * 2^scale_exp * (lo, hi)
        base = np.ldexp(z0, scale_exp)
        return (vals > lo * base) & (vals < hi * base)

    with np.errstate(divide="ignore", invalid="ignore"):
        j2 = np.floor(np.log2(np.where(ok, z0 / d2, 1.0))).astype(np.int64)
        j1 = np.floor(np.log2(np.where(ok, z0 / d1, 1.0))).astype(np.int64)

    undecided = ok.copy()
    # even stages 2j, keyed by the d2 band
    for off in (0, 1, 2):
        j = j2 + off
        hit = (undecided & (j >= 1) & (j <= M_CAP)
               & band(d1, -(j + 3), 5.0, 7.0) & band(d2, -j, 1.0, 2.0))
        out[hit] = 2 * j[hit]
        undecided &= ~hit
    # odd stages 2j+1, keyed by the d1 band
    for off in (-1, 0, 1):
        j = j1 - 1 + off
        hit = (undecided & (j >= 1) & (j <= M_CAP)
               & band(d1, -(j + 1), 1.0, 2.0) & band(d2, -(j + 3), 5.0, 7.0))
        out[hit] = 2 * j[hit] + 1
        undecided &= ~hit
    # stage 1 catch-all: d1 in a (1,2) band with d2 clear of the well face
    for off in (-1, 0, 1):
        m = j1 - 1 + off
        hit = (undecided & (m >= 1) & (m <= M_CAP)
               & band(d1, -(m + 1), 1.0, 2.0)
               & (d2 >= 7.0 * np.ldexp(z0, -(m + 3))))
        out[hit] = 1
        undecided &= ~hit
    return out


def classify(F: np.ndarray, delta: float, tol: float = mg.PIPE_TOL) -> int:
    """The unique stage of an interior matrix."""
    C = mg.gram(F)
    if mg.cg_membership(C, delta, margin=0.0, tol=tol) != "interior":
        raise NotClassifiableError("stage classification needs an interior matrix")
    d1, d2 = mg.face_gaps(C, delta)
    k = _classify_gaps(np.array([d1]), np.array([d2]), zeta0(delta))[0]
    if k < 0:
        raise NotClassifiableError("gaps are not positive")
    return int(k)


def dist_to_wells(F: np.ndarray, delta: float) -> float:
    """Distance from F to the union of the two wells."""
    return mg.dist_to_wells(F, mg.make_wells(delta))[0]


# ---------------------------------------------------------------------------
# split targets
# ---------------------------------------------------------------------------

def dyadic_split_target(stage: int, delta: float) -> tuple[int, float]:
    """(branch, eps) moving a stage >= 2 parent's children into stage + 1.

    eps is the center of the next stage's improved band, which works out
    to (3/4) z0 2^-ceil(stage/2) on branch 2 (even parents, interfaces
    normal to e2) or branch 1 (odd parents, normal to e1).
    """
    if stage < 2:
        raise InvalidParameterError("dyadic targets exist for stages >= 2")
    branch = 2 if stage % 2 == 0 else 1
    eps = 0.75 * math.ldexp(zeta0(delta), -((stage + 1) // 2))
    return branch, eps


@dataclass(frozen=True)
class LowStageTarget:
    branch: int
    eps: float
    witness_m: int
    target_stage: int


def low_stage_split_target(F: np.ndarray, delta: float) -> LowStageTarget:
    """Split recipe lifting a stage-0 or stage-1 matrix up the ladder.

    Stage 1: the witness band exponent m gives a branch-2 split with
    eps = (3/4) z0 2^-m, landing both children in stage 2m+1.
    Stage 0: a branch-1 split with m one past the coarsest dyadic level
    of the two gaps lands the children in stage 1 (or accidentally
    higher, which is fine: stages only need to increase).
    """
    z0 = zeta0(delta)
    stage = classify(F, delta)
    d1, d2 = mg.face_gaps(mg.gram(F), delta)
    if stage == 1:
        m = None
        for cand in range(1, M_CAP + 1):
            base = math.ldexp(z0, -(cand + 1))
            if base < d1 < 2.0 * base and d2 >= 7.0 * math.ldexp(z0, -(cand + 3)):
                m = cand
                break
        if m is None:
            raise NotClassifiableError("stage-1 witness exponent not found")
        return LowStageTarget(2, 0.75 * math.ldexp(z0, -m), m, 2 * m + 1)
    if stage == 0:
        mbar = max(math.ceil(math.log2(z0 / d1)), math.ceil(math.log2(z0 / d2)))
        m = max(mbar + 1, 1)
        return LowStageTarget(1, 0.75 * math.ldexp(z0, -m), m, 1)
    raise InvalidParameterError(f"matrix already classifies to stage {stage}")


# ---------------------------------------------------------------------------
# constructing representatives and samples
# ---------------------------------------------------------------------------

def matrix_from_gaps(d1: float, d2: float, delta: float,
                     c12_sign: float = 1.0, angle: float = 0.0) -> np.ndarray:
    """Interior matrix with prescribed face gaps (det-1 upper-triangular
    square root of C, optionally rotated)."""
    c11 = 1.0 - d1
    c22 = 1.0 + delta * delta - d2
    prod = c11 * c22 - 1.0
    if c11 <= 0.0 or prod < 0.0:
        raise InvalidParameterError("gaps are not realizable in the hull")
    c12 = c12_sign * math.sqrt(prod)
    r11 = math.sqrt(c11)
    U = np.array([[r11, c12 / r11], [0.0, 1.0 / r11]])
    return (mg.rot(angle) @ U) if angle else U


def stage_representative(stage: int, delta: float) -> np.ndarray:
    """A canonical interior matrix of the given stage (band centers)."""
    z0 = zeta0(delta)
    if stage >= 2:
        (lo1, hi1), (lo2, hi2) = stage_band(stage, delta)
        return matrix_from_gaps(0.5 * (lo1 + hi1), 0.5 * (lo2 + hi2), delta)
    if stage == 1:
        return matrix_from_gaps(0.375 * z0, 1.2 * z0, delta)
    if stage == 0:
        return matrix_from_gaps(1.5 * z0, 1.5 * z0, delta)
    raise InvalidParameterError("stage must be a nonnegative integer")


def sample_stage(stage: int, delta: float, rng: np.random.Generator,
                 frac: tuple[float, float] | None = None) -> np.ndarray:
    """Random matrix of a stage >= 2: uniform in the open band box,
    random off-diagonal sign and rotation.  frac pins the band positions
    (0 = lower edge, 1 = upper edge) for stress grids."""
    (lo1, hi1), (lo2, hi2) = stage_band(stage, delta)
    f1, f2 = frac if frac is not None else rng.uniform(0.02, 0.98, 2)
    d1 = lo1 + f1 * (hi1 - lo1)
    d2 = lo2 + f2 * (hi2 - lo2)
    sign = 1.0 if rng.uniform() < 0.5 else -1.0
    return matrix_from_gaps(d1, d2, delta, sign, rng.uniform(0.0, 2.0 * math.pi))


# ---------------------------------------------------------------------------
# the in-approximation verification suite
# ---------------------------------------------------------------------------

@dataclass
class InApproxReport:
    delta: float
    samples: int
    stages: tuple[int, ...]
    failures: int
    failure_examples: list
    sup_dist: dict          # stage -> max dist_to_wells over samples
    dist_constant: float    # max over stages of sup_dist * 2^(k/2)

    @property
    def ok(self) -> bool:
        return self.failures == 0


def verify_in_approximation(delta: float, samples: int = 10_000,
                            stages: tuple[int, ...] = tuple(range(2, 15)),
                            seed: int = 0) -> InApproxReport:
    """Check that dyadic splits move stage-k samples into stage k+1.

    For each stage k, `samples` random band points are split with the
    branch-appropriate target; both children must classify to k + 1.
    Also records sup dist-to-wells per stage and the constant in the
    sup <= C 2^(-k/2) envelope.
    """
    rng = np.random.default_rng(seed)
    wells = mg.make_wells(delta)
    z0 = zeta0(delta)
    failures = 0
    examples: list = []
    sup_dist: dict = {}
    for k in stages:
        branch, eps = dyadic_split_target(k, delta)
        (lo1, hi1), (lo2, hi2) = stage_band(k, delta)
        d1 = rng.uniform(lo1, hi1, samples)
        d2 = rng.uniform(lo2, hi2, samples)
        # vectorized children gaps: the improved entry moves to exactly eps,
        # the other is inherited, so child stages follow from gap arithmetic;
        # a scalar spot-check below keeps the full split path honest.
        if branch == 1:
            ch1 = np.full(samples, eps)
            ch2 = d2
        else:
            ch1 = d1
            ch2 = np.full(samples, eps)
        kid_stage = _classify_gaps(ch1, ch2, z0)
        bad = np.nonzero(kid_stage != k + 1)[0]
        failures += bad.size
        for i in bad[:3]:
            examples.append((k, float(d1[i]), float(d2[i]), int(kid_stage[i])))
        # full-pipeline spot checks through split() and classify()
        for i in rng.integers(0, samples, size=min(25, samples)):
            F = matrix_from_gaps(d1[i], d2[i], delta,
                                 1.0 if rng.uniform() < 0.5 else -1.0,
                                 rng.uniform(0, 2 * math.pi))
            sr = mg.split(F, branch, eps, delta)
            for ch in (sr.Fplus, sr.Fminus):
                got = classify(ch, delta)
                if got != k + 1:
                    failures += 1
                    examples.append((k, float(d1[i]), float(d2[i]), got))
        corners = mg.dist_to_wells_b(
            np.stack([matrix_from_gaps(a, b, delta)
                      for a in (lo1 * 1.0000001, hi1 * 0.9999999)
                      for b in (lo2 * 1.0000001, hi2 * 0.9999999)]), wells)
        sup_dist[k] = float(corners.min(axis=1).max())
    const = max(s * 2.0 ** (k / 2.0) for k, s in sup_dist.items())
    return InApproxReport(delta, samples, tuple(stages), failures, examples,
                          sup_dist, const)
