"""Security estimates and parameter selection.

Covers the chi-enforcement probability zeta(t, chi), the brute-force attack
cost in bits, expected correct/false matches, chaff capacity bounds and a
search over (delta_e, delta_v, t, r, k, chi).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from pathlib import Path

import numpy as np

from .geometry import Ellipse, v_delta

ATTACK_CONSTANT = 129
PACKING_DENSITY = 0.45
SAFE_DENSITY = 0.2
FALSE_MATCH_FACTOR = 1.4


class NoFeasibleParams(ValueError):
    pass


# -- zeta ----------------------------------------------------------------------

@lru_cache(maxsize=None)
def _count_assignments(t: int, chi: int, f: int) -> int:
    """Number of maps {1..t} -> {1..f} hitting every finger >= chi times."""
    ways = [1] + [0] * t            # fingers processed so far, indexed by items used
    for _ in range(f):
        nxt = [0] * (t + 1)
        for used, w in enumerate(ways):
            if not w:
                continue
            for i in range(chi, t - used + 1):
                nxt[used + i] += w * math.comb(t - used, i)
        ways = nxt
    return ways[t]


def zeta(t: int, chi: int, f: int) -> float:
    """Probability that t minutiae spread uniformly over f fingers give every
    finger at least chi of them (exact)."""
    if chi <= 0:
        return 1.0
    if chi * f > t:
        return 0.0
    return float(Fraction(_count_assignments(t, chi, f), f ** t))


def zeta_inclusion_exclusion(t: int, chi: int, f: int, upper: int | None = None) -> float:
    """Inclusion-exclusion form of :func:`zeta`.

    ``upper`` is the largest per-finger count treated as a shortfall; the
    correct value is chi - 1 (the default).  Passing chi reproduces the
    variant with the inclusive bound for comparison.
    """
    upper = chi - 1 if upper is None else upper
    if upper < 0:
        return 1.0
    # truncated exponential series sum_{i<=upper} x^i / i!
    base = [Fraction(1, math.factorial(i)) for i in range(upper + 1)]
    total = Fraction(0)
    power = [Fraction(1)]
    for theta in range(1, f + 1):
        nxt = [Fraction(0)] * min(len(power) + upper, t + 1)
        for i, a in enumerate(power):
            if not a:
                continue
            for j, b in enumerate(base):
                if i + j <= t:
                    nxt[i + j] += a * b
        power = nxt
        inner = Fraction(0)
        for s, coef in enumerate(power):
            if s > t:
                break
            inner += coef * math.factorial(t) / math.factorial(t - s) * (f - theta) ** (t - s)
        total += (-1) ** (theta + 1) * math.comb(f, theta) * inner
    return float(1 - total / Fraction(f) ** t)


def zeta_monte_carlo(t: int, chi: int, f: int, samples: int,
                     rng: np.random.Generator) -> tuple[float, float]:
    """(estimate, standard error) from uniform finger assignments.

    The standard error is the plug-in value and is 0 when the estimate is 0
    or 1; compare against the exact probability's error in that case.
    """
    counts = rng.multinomial(t, [1.0 / f] * f, size=samples)
    p = float(np.mean(counts.min(axis=1) >= chi))
    return p, math.sqrt(p * (1 - p) / samples)


# -- attack cost -------------------------------------------------------------------

def attack_cost_bits(t: int, r: int, k: int, chi: int, f: int, log_base: float = 2.0) -> float:
    """log2 of 129 * zeta * k * log(k)^2 * (r/t)^k."""
    if k < 2 or r <= t:
        raise ValueError("need k >= 2 and r > t")
    z = zeta(t, chi, f)
    if z == 0:
        return -math.inf
    lg = math.log(k, log_base)
    return (math.log2(ATTACK_CONSTANT) + math.log2(z) + math.log2(k)
            + 2 * math.log2(lg) + k * math.log2(r / t))


def brute_force_trials_log2(t: int, r: int, k: int) -> float:
    """log2 of C(r, k) / C(t, k): expected k-subsets drawn until one is all genuine."""
    return math.log2(math.comb(r, k)) - math.log2(math.comb(t, k))


# -- expected matches & capacity -----------------------------------------------------

def expected_matches(f: int, t: int, r: int, delta_v: float, mu: float, tau: float,
                     ellipse: Ellipse | None = None) -> tuple[float, float]:
    """(m_c, m_f): correct matches mu*t and the adjusted false-match estimate
    1.4 (r - t) s V / |E| with surplus s = tau - mu t / f clamped at 0."""
    ellipse = ellipse or Ellipse()
    m_c = mu * t
    surplus = max(0.0, tau - mu * t / f)
    m_f = FALSE_MATCH_FACTOR * (r - t) * surplus * v_delta(delta_v) / ellipse.area_px
    return m_c, m_f


def chaff_capacity(d: float, ellipse: Ellipse | None = None) -> tuple[int, int]:
    """(max points per finger at packing density 0.45, free-area-safe count at 0.2)."""
    ellipse = ellipse or Ellipse()
    vd = v_delta(d)
    return (int(math.floor(PACKING_DENSITY * ellipse.area_px / vd)),
            int(math.floor(SAFE_DENSITY * ellipse.area_px / vd)))


@dataclass
class SecurityReport:
    zeta: float
    attack_ops_log2: float
    m_c: float
    m_f: float
    max_chaff_per_finger: int
    safe_r_bound: int
    brute_force_trials_log2: float

    def as_lines(self) -> list[str]:
        return [f"{k}={v:.10g}" if isinstance(v, float) else f"{k}={v}"
                for k, v in asdict(self).items()]

    def as_table(self) -> str:
        rows = [
            ("zeta", f"{self.zeta:.10f}"),
            ("attack cost (bits)", f"{self.attack_ops_log2:.2f}"),
            ("brute-force trials (bits)", f"{self.brute_force_trials_log2:.2f}"),
            ("expected correct matches", f"{self.m_c:.2f}"),
            ("expected false matches", f"{self.m_f:.2f}"),
            ("max chaff per finger", str(self.max_chaff_per_finger)),
            ("safe r bound (all fingers)", str(self.safe_r_bound)),
        ]
        w = max(len(a) for a, _ in rows)
        return "\n".join(f"{a:<{w}}  {b:>16}" for a, b in rows)


def security_report(f: int, t: int, r: int, k: int, chi: int, d: float, delta_v: float,
                    mu: float, tau: float, ellipse: Ellipse | None = None,
                    log_base: float = 2.0) -> SecurityReport:
    ellipse = ellipse or Ellipse()
    m_c, m_f = expected_matches(f, t, r, delta_v, mu, tau, ellipse)
    cap, safe = chaff_capacity(d, ellipse)
    return SecurityReport(
        zeta=zeta(t, chi, f),
        attack_ops_log2=attack_cost_bits(t, r, k, chi, f, log_base),
        m_c=m_c, m_f=m_f,
        max_chaff_per_finger=cap,
        safe_r_bound=f * safe,
        brute_force_trials_log2=brute_force_trials_log2(t, r, k),
    )


# -- reference tables ---------------------------------------------------------------

@dataclass
class ReferenceTables:
    reliable: dict[tuple[int, float], int]      # (u, delta_e) -> M_r
    match_rate: dict[tuple[int, float], float]  # (u, delta_v) -> mu as a fraction
    tau: dict[float, float]                     # Q -> tau

    @classmethod
    def load(cls, path=None) -> "ReferenceTables":
        if path is None:
            text = resources.files("fuzzyvault").joinpath("data/reference_tables.txt").read_text()
        else:
            text = Path(path).read_text()
        sections: dict[str, list[list[str]]] = {}
        cur = None
        for line in text.splitlines():
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if line.startswith("["):
                cur = line.strip("[]")
                sections[cur] = []
            elif cur is not None:
                sections[cur].append(line.split())

        def grid(rows, scale=1.0, cast=float):
            cols = [float(c) for c in rows[0][1:]]
            return {(int(row[0]), col): cast(float(v) * scale)
                    for row in rows[1:] for col, v in zip(cols, row[1:])}

        return cls(
            reliable=grid(sections["reliable"], cast=int),
            match_rate=grid(sections["match_rate"], scale=0.01),
            tau={float(a): float(b) for a, b in sections["tau"][1:]},
        )

    def delta_e_values(self) -> list[float]:
        return sorted({de for _, de in self.reliable})

    def delta_v_values(self) -> list[float]:
        return sorted({dv for _, dv in self.match_rate})


# -- parameter search --------------------------------------------------------------

@dataclass(frozen=True)
class ParamRow:
    delta_e: float
    delta_v: float
    t: int
    r: int
    k: int
    chi: int
    d: int
    Q: float
    bits: float
    m_c: float
    m_f: float

    @property
    def k_fraction(self) -> float:
        """k relative to m_c - m_f; smaller leaves more room for errors."""
        return self.k / (self.m_c - self.m_f)


def chi_for_ratio(ratio: float) -> int | None:
    """9 at a correct/false ratio >= 2.7, rising linearly to 15 at ratio 2;
    None below 2."""
    if ratio >= 2.7:
        return 9
    if ratio < 2.0:
        return None
    return min(15, 9 + math.ceil((2.7 - ratio) / 0.7 * 6 - 1e-9))


def _pareto(rows: list[ParamRow]) -> list[ParamRow]:
    """Rows not dominated in (t low, k_fraction low, bits high)."""
    pts = np.array([(r.t, r.k_fraction, -r.bits) for r in rows])
    keep = np.ones(len(rows), dtype=bool)
    order = np.lexsort((pts[:, 2], pts[:, 1], pts[:, 0]))
    front: list[int] = []
    for i in order:
        p = pts[i]
        if front:
            f = pts[front]
            dom = np.all(f <= p, axis=1) & np.any(f < p, axis=1)
            if dom.any():
                keep[i] = False
                continue
        front.append(i)
    return [rows[i] for i in sorted(np.nonzero(keep)[0], key=lambda i: -rows[i].bits)]


def param_search(f: int, u: int, target_bits: float, tables: ReferenceTables | None = None,
                 tau: float = 50.0, Q: float = 0.3, delta_v_range=(5.0, 7.0),
                 k_window=(0.75, 0.90), ellipse: Ellipse | None = None,
                 log_base: float = 2.0, pareto: bool = True) -> list[ParamRow]:
    """Search (delta_e, delta_v, t, r, k) reaching ``target_bits``.

    delta_v comes from the tabulated values within ``delta_v_range``;
    d = floor(1.5 delta_v); t <= f M_r(u, delta_e) using the smallest
    tabulated delta_e >= delta_v that admits t; r up to f times the safe
    per-finger chaff bound; k inside ``k_window`` times m_c - m_f; chi from
    the correct/false ratio, rejecting ratios below 2.  Returns the rows
    that are Pareto-optimal in (t, k_fraction, bits), highest bits first.
    """
    tables = tables or ReferenceTables.load()
    ellipse = ellipse or Ellipse()
    if target_bits <= 0:
        raise ValueError("target_bits must be positive")
    rows: list[ParamRow] = []
    des = tables.delta_e_values()
    for dv in tables.delta_v_values():
        if not delta_v_range[0] <= dv <= delta_v_range[1] or (u, dv) not in tables.match_rate:
            continue
        mu = tables.match_rate[(u, dv)]
        d = int(math.floor(1.5 * dv))
        _, safe = chaff_capacity(d, ellipse)
        r_max = f * safe
        vd = v_delta(dv)
        admissible = [(de, tables.reliable[(u, de)]) for de in des
                      if de >= dv and (u, de) in tables.reliable]
        if not admissible:
            continue
        t_max = f * max(m for _, m in admissible)
        for t in range(max(9 * f, 3), t_max + 1):
            de = next(de for de, m in admissible if t <= f * m)
            m_c = mu * t
            surplus = max(0.0, tau - mu * t / f)
            log_zeta = {chi: (math.log2(z) if (z := zeta(t, chi, f)) > 0 else -math.inf)
                        for chi in range(9, 16)}
            for r in range(t + 1, r_max + 1):
                m_f = FALSE_MATCH_FACTOR * (r - t) * surplus * vd / ellipse.area_px
                ratio = math.inf if m_f == 0 else m_c / m_f
                chi = chi_for_ratio(ratio)
                if chi is None or chi * f > t:
                    continue
                diff = m_c - m_f
                k_lo = max(2, math.ceil(k_window[0] * diff - 1e-9))
                k_hi = min(t - 1, math.floor(k_window[1] * diff + 1e-9))
                lr = math.log2(r / t)
                for k in range(k_lo, k_hi + 1):
                    bits = (math.log2(ATTACK_CONSTANT) + log_zeta[chi] + math.log2(k)
                            + 2 * math.log2(math.log(k, log_base)) + k * lr)
                    if bits >= target_bits:
                        rows.append(ParamRow(de, dv, t, r, k, chi, d, Q, bits, m_c, m_f))
    if not rows:
        raise NoFeasibleParams(f"no configuration reaches {target_bits} bits")
    return _pareto(rows) if pareto else sorted(rows, key=lambda r: -r.bits)
