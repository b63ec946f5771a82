"""Prime-field arithmetic, polynomials, Reed-Solomon decoding and the
coefficient commitment.

Field elements are plain Python ints in ``[0, q)``.  Decoders return ``None``
when no polynomial meets the agreement threshold; that is a normal outcome,
not an error.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np


class DuplicateAbscissa(ValueError):
    pass


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    i = 3
    while i * i <= n:
        if n % i == 0:
            return False
        i += 2
    return True


def next_prime(n: int) -> int:
    """Smallest prime >= n."""
    n = max(n, 2)
    while not is_prime(n):
        n += 1
    return n


def inv(a: int, q: int) -> int:
    a %= q
    if a == 0:
        raise ZeroDivisionError("0 has no inverse")
    return pow(a, q - 2, q)


@dataclass(frozen=True)
class FieldPoly:
    """Polynomial of degree < k over F_q, coefficients low degree first.

    Trailing zeros are kept: ``len(coeffs)`` is always exactly k.
    """

    coeffs: tuple[int, ...]
    q: int

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(int(c) for c in self.coeffs))
        if not is_prime(self.q):
            raise ValueError(f"q={self.q} is not prime")
        if any(c < 0 or c >= self.q for c in self.coeffs):
            raise ValueError("coefficient outside [0, q)")

    @property
    def k(self) -> int:
        return len(self.coeffs)

    def __call__(self, x: int) -> int:
        return poly_eval(self, x)

    @classmethod
    def random(cls, k: int, q: int, rng: np.random.Generator) -> "FieldPoly":
        return cls(tuple(int(c) for c in rng.integers(0, q, size=k)), q)


def poly_eval(p: FieldPoly, x: int) -> int:
    q = p.q
    acc = 0
    for c in reversed(p.coeffs):
        acc = (acc * x + c) % q
    return acc


def _check_distinct(xs: Sequence[int]) -> None:
    if len(set(xs)) != len(xs):
        raise DuplicateAbscissa("two points share an x value")


def lagrange_interpolate(points: Sequence[tuple[int, int]], k: int, q: int) -> FieldPoly:
    """Unique polynomial of degree < k through exactly k points."""
    if len(points) != k:
        raise ValueError(f"need exactly k={k} points, got {len(points)}")
    xs = [x % q for x, _ in points]
    ys = [y % q for _, y in points]
    _check_distinct(xs)
    # master polynomial prod (z - x_j), low degree first
    master = [1]
    for xj in xs:
        nxt = [0] * (len(master) + 1)
        for i, c in enumerate(master):
            nxt[i] = (nxt[i] - xj * c) % q
            nxt[i + 1] = (nxt[i + 1] + c) % q
        master = nxt
    coeffs = [0] * k
    for i, (xi, yi) in enumerate(zip(xs, ys)):
        if yi == 0:
            continue
        # synthetic division of master by (z - xi)
        quot = [0] * k
        carry = 0
        for d in range(k, 0, -1):
            carry = (master[d] + carry * xi) % q
            quot[d - 1] = carry
        denom = 1
        for j, xj in enumerate(xs):
            if j != i:
                denom = denom * (xi - xj) % q
        scale = yi * inv(denom, q) % q
        for d in range(k):
            coeffs[d] = (coeffs[d] + scale * quot[d]) % q
    return FieldPoly(tuple(coeffs), q)


def berlekamp_massey(seq: Sequence[int], q: int) -> list[int]:
    """Shortest LFSR connection polynomial C (C[0] = 1) generating seq."""
    C = [1]
    B = [1]
    L, m, b = 0, 1, 1
    for n, s in enumerate(seq):
        d = s
        for i in range(1, L + 1):
            d = (d + C[i] * seq[n - i]) % q
        if d == 0:
            m += 1
            continue
        coef = d * inv(b, q) % q
        T = list(C)
        need = len(B) + m
        if len(C) < need:
            C = C + [0] * (need - len(C))
        for i, bi in enumerate(B):
            C[i + m] = (C[i + m] - coef * bi) % q
        if 2 * L <= n:
            L = n + 1 - L
            B = T
            b = d
            m = 1
        else:
            m += 1
    C = C[: L + 1] + [0] * max(0, L + 1 - len(C))
    return C


def agreement(p: FieldPoly, points: Iterable[tuple[int, int]]) -> int:
    return sum(1 for x, y in points if poly_eval(p, x) == y % p.q)


def rs_decode(points: Sequence[tuple[int, int]], k: int, q: int) -> FieldPoly | None:
    """Unique Reed-Solomon decoding over arbitrary distinct evaluation points.

    Returns the polynomial of degree < k agreeing with at least
    ceil((w + k) / 2) of the w points, or ``None``.  Errors are located with
    Berlekamp-Massey on the syndromes of the generalized RS code defined by
    the evaluation points.
    """
    w = len(points)
    if w < k:
        raise ValueError(f"need at least k={k} points, got {w}")
    pts = [(x % q, y % q) for x, y in points]
    xs = [x for x, _ in pts]
    _check_distinct(xs)
    if w == k:
        return lagrange_interpolate(pts, k, q)
    need = -(-(w + k) // 2)

    # locator roots are 1/x, so shift abscissae off zero
    taken = {(-x) % q for x in xs}
    shift = next((c for c in range(q) if c not in taken), None)
    if shift is None:
        # every field element is used: drop the point at x = 0
        rest = [p for p in pts if p[0] != 0]
        cand = rs_decode(rest, k, q) if len(rest) >= k else None
        if cand is not None and agreement(cand, pts) >= need:
            return cand
        return None

    sx = [(x + shift) % q for x in xs]
    weights = []
    for i, xi in enumerate(xs):
        denom = 1
        for j, xj in enumerate(xs):
            if j != i:
                denom = denom * (xi - xj) % q
        weights.append(inv(denom, q))
    nsyn = w - k
    syn = []
    terms = [wi * y % q for wi, (_, y) in zip(weights, pts)]
    for _ in range(nsyn):
        syn.append(sum(terms) % q)
        terms = [t * s % q for t, s in zip(terms, sx)]

    if any(syn):
        loc = berlekamp_massey(syn, q)
        nerr = len(loc) - 1
        if 2 * nerr > nsyn:
            return None
        bad = set()
        for i, s in enumerate(sx):
            z = inv(s, q)
            acc = 0
            for c in reversed(loc):
                acc = (acc * z + c) % q
            if acc == 0:
                bad.add(i)
        if len(bad) != nerr:
            return None
    else:
        bad = set()
    good = [p for i, p in enumerate(pts) if i not in bad][:k]
    cand = lagrange_interpolate(good, k, q)
    if agreement(cand, pts) >= need:
        return cand
    return None


# -- commitment ---------------------------------------------------------------

def coeff_width(q: int) -> int:
    return (q.bit_length() + 7) // 8


def _header(q: int, k: int) -> bytes:
    return f"FFV-COMMIT-1|q={q}|k={k}|".encode("ascii")


def commit(p: FieldPoly) -> bytes:
    """SHA-256 over the canonical encoding of (q, k, coefficients)."""
    width = coeff_width(p.q)
    body = b"".join(c.to_bytes(width, "big") for c in p.coeffs)
    return hashlib.sha256(_header(p.q, p.k) + body).digest()


def verify_commit(p: FieldPoly, digest: bytes) -> bool:
    return commit(p) == digest


_NP_WIDTHS = {1: ">u1", 2: ">u2", 4: ">u4", 8: ">u8"}


def commit_rows(coeffs: np.ndarray, q: int) -> list[bytes]:
    """Commitments for each row of a (B, k) coefficient matrix."""
    coeffs = np.asarray(coeffs)
    k = coeffs.shape[1]
    head = _header(q, k)
    width = coeff_width(q)
    if width in _NP_WIDTHS:
        raw = coeffs.astype(_NP_WIDTHS[width])
        return [hashlib.sha256(head + row.tobytes()).digest() for row in raw]
    return [
        hashlib.sha256(head + b"".join(int(c).to_bytes(width, "big") for c in row)).digest()
        for row in coeffs
    ]


# -- batched interpolation ------------------------------------------------------

def _powmod(base: np.ndarray, exp: int, q: int) -> np.ndarray:
    result = np.ones_like(base)
    base = base % q
    while exp:
        if exp & 1:
            result = result * base % q
        base = base * base % q
        exp >>= 1
    return result


def interpolate_rows(xs: np.ndarray, ys: np.ndarray, q: int) -> np.ndarray:
    """Vectorized Lagrange interpolation: row b of the result holds the
    coefficients of the degree < k polynomial through (xs[b], ys[b]).

    Requires q < 2**31 so that products fit in int64.
    """
    if q >= 2**31:
        raise ValueError("batched interpolation needs q < 2**31")
    xs = np.asarray(xs, dtype=np.int64) % q
    ys = np.asarray(ys, dtype=np.int64) % q
    B, k = xs.shape
    # Newton divided differences
    dd = ys.copy()
    for level in range(1, k):
        num = (dd[:, level:] - dd[:, level - 1:-1]) % q
        den = (xs[:, level:] - xs[:, :-level]) % q
        if np.any(den == 0):
            raise DuplicateAbscissa("two points share an x value")
        dd[:, level:] = num * _powmod(den, q - 2, q) % q
    # Horner back to monomial basis
    out = np.zeros((B, k), dtype=np.int64)
    out[:, 0] = dd[:, k - 1]
    deg = 0
    for j in range(k - 2, -1, -1):
        xj = xs[:, j:j + 1]
        shifted = np.zeros_like(out)
        shifted[:, 1:deg + 2] = out[:, :deg + 1]
        out = (shifted - xj * out) % q
        out[:, 0] = (out[:, 0] + dd[:, j]) % q
        deg += 1
    return out
