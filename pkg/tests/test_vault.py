import hashlib
import itertools
from collections import Counter
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fuzzyvault.field import FieldPoly, poly_eval, rs_decode
from fuzzyvault.minutiae import Impression, Minutia
from fuzzyvault.synth import NoiseModel, gen_population, sample_impression
from fuzzyvault.vault import (ChaffPlacementFailure, DuplicatePoint, FingerBelowChi,
                              MalformedVault, SystemParams, Vault, add_chaff, build_vault,
                              enforce_min_distance, enroll, enroll_template,
                              enroll_with_recapture, reliable_minutiae, select_template)
from fuzzyvault.verifier import verify

GOLDEN = Path(__file__).parent / "data" / "golden_vault.txt"


def golden_vault():
    params = SystemParams(f=1, t=3, r=6, k=2, chi=1)
    rng = np.random.default_rng(2024)
    template = [Minutia(1, 200, 250), Minutia(1, 300, 260), Minutia(1, 256, 200)]
    chaff = add_chaff(template, params, rng)
    return build_vault(template, chaff, FieldPoly((3, 5), 7), params, rng)


def test_golden_file_is_byte_identical():
    assert golden_vault().to_text().encode() == GOLDEN.read_bytes()


def test_golden_file_contents():
    v = Vault.load(GOLDEN)
    assert (v.q, v.f, v.r, v.k, v.d) == (7, 1, 6, 2, 10)
    # P(x) = 3 + 5x over F_7 at the genuine positions 3, 4, 5
    genuine = {(200, 250): 3, (256, 200): 4, (300, 260): 5}
    for pos, (_, a, b, y) in enumerate(v.rows.tolist(), start=1):
        want = (3 + 5 * pos) % 7
        assert (y == want) == ((a, b) in genuine)
    digest = hashlib.sha256(b"FFV-COMMIT-1|q=7|k=2|" + bytes([3, 5])).digest()
    assert v.commitment == digest


def test_text_round_trip():
    v = golden_vault()
    again = Vault.from_text(v.to_text())
    assert again.to_text() == v.to_text()


@pytest.mark.parametrize("mutate", [
    lambda s: s.replace("\n", "\r\n"),
    lambda s: s.replace("FFV1", "FFV2"),
    lambda s: s.replace("r=6", "r=5"),
    lambda s: s.replace("q=7", "q=8"),
    lambda s: s.replace("1 110 190 2", "1 400 190 2"),      # breaks order
    lambda s: s.replace("1 110 190 2", "1 40 256 2"),       # outside the ellipse
    lambda s: s.replace("1 169 244 1", "1 195 250 1"),      # closer than d
    lambda s: s.replace("1 110 190 2", "1 110 190 9"),      # y >= q
    lambda s: s.rsplit("H=", 1)[0] + "H=abc\n",
])
def test_malformed_vaults_rejected(mutate):
    with pytest.raises(MalformedVault):
        Vault.from_text(mutate(GOLDEN.read_text()))


@given(st.integers(0, 2**32), st.integers(2, 40), st.floats(1, 30))
@settings(max_examples=50)
def test_enforce_min_distance(seed, n, d):
    rng = np.random.default_rng(seed)
    pts = rng.integers(0, 100, (n, 2))
    out = enforce_min_distance(pts, d, rng)
    keys = {tuple(p) for p in pts.tolist()}
    assert all(tuple(p) in keys for p in out.tolist())
    for p, q in itertools.combinations(out.tolist(), 2):
        assert np.hypot(p[0] - q[0], p[1] - q[1]) >= d


def _points(n, seed, spacing=12.0):
    return gen_population(1, 1, n, np.random.default_rng(seed), spacing=spacing)[0][0].minutiae


def test_reliable_single_impression():
    params = SystemParams(prealign=False)
    rng = np.random.default_rng(0)
    pts = np.vstack([_points(20, 1, spacing=6), [[0, 0]]])   # one point off the ellipse
    out = reliable_minutiae([Impression(pts)], 1, params, rng)
    arr = np.array([(m.a, m.b) for m in out])
    assert params.ellipse.contains(arr[:, 0], arr[:, 1]).all()
    assert all(np.hypot(*(p - q)) >= params.d for p, q in itertools.combinations(arr, 2))


def test_reliable_identical_impressions():
    params = SystemParams(prealign=False)
    pts = _points(25, 2)
    rng = np.random.default_rng(0)
    out = reliable_minutiae([Impression(pts), Impression(pts)], 2, params, rng)
    assert sorted((m.a, m.b) for m in out) == sorted(map(tuple, pts.tolist()))
    assert all(m.theta == 2 for m in out)


def test_reliable_fraction_matches_deletion_oracle():
    params = SystemParams(prealign=False, delta_e=10.0)
    noise = NoiseModel(p_delete=0.2)
    found = total = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        finger = gen_population(1, 1, 30, rng, spacing=12.0)[0][0]
        imps = [sample_impression(finger, noise, rng) for _ in range(3)]
        total += len(imps[0].impression)
        found += len(reliable_minutiae([s.impression for s in imps], 1, params, rng))
    p = 0.8**2
    sigma = np.sqrt(total * p * (1 - p))
    assert abs(found - total * p) <= 3 * sigma


def test_select_template_exact_pool():
    params = SystemParams(f=2, t=4, r=10, k=2, chi=2)
    pool = {1: [Minutia(1, 200, 200), Minutia(1, 220, 200)],
            2: [Minutia(2, 200, 200), Minutia(2, 220, 200)]}
    out = select_template(pool, params, np.random.default_rng(0))
    assert out == sorted(pool[1] + pool[2])


def test_select_template_below_chi():
    params = SystemParams(f=2, t=4, r=10, k=2, chi=2)
    pool = {1: [Minutia(1, 200, 200)], 2: [Minutia(2, 200, 200), Minutia(2, 220, 200)]}
    with pytest.raises(FingerBelowChi):
        select_template(pool, params, np.random.default_rng(0))


def test_select_template_uniform_over_valid_splits():
    params = SystemParams(f=2, t=4, r=10, k=2, chi=2)
    pool = {th: [Minutia(th, 200 + 20 * i, 200) for i in range(3)] for th in (1, 2)}
    rng = np.random.default_rng(5)
    counts = Counter()
    for _ in range(10_000):
        out = select_template(pool, params, rng)
        assert Counter(m.theta for m in out) == {1: 2, 2: 2}
        counts[tuple(out)] += 1
    assert len(counts) == 9
    expected = 10_000 / 9
    chi2 = sum((c - expected) ** 2 / expected for c in counts.values())
    assert chi2 < 26.12          # chi-square, 8 degrees of freedom, p = 0.001


def test_add_chaff_cases():
    params = SystemParams(f=2, t=4, r=10, k=2, chi=2)
    template = [Minutia(1, 200, 200), Minutia(1, 240, 200), Minutia(2, 200, 200),
                Minutia(2, 240, 200)]
    assert add_chaff(template, params, np.random.default_rng(0), r=4) == []

    p1 = SystemParams(f=1, t=0, r=50, k=2, chi=0, d=10)
    chaff = add_chaff([], p1, np.random.default_rng(1))
    assert len(chaff) == 50
    for a, b in itertools.combinations(chaff, 2):
        assert np.hypot(a.a - b.a, a.b - b.b) >= 10

    huge = SystemParams(f=1, t=0, r=3, k=2, chi=0, d=500, chaff_rejections=200)
    with pytest.raises(ChaffPlacementFailure):
        add_chaff([], huge, np.random.default_rng(2))


def test_build_vault_without_chaff_decodes():
    params = SystemParams(f=2, t=6, r=6, k=3, chi=1)
    rng = np.random.default_rng(3)
    template = [Minutia(1 + i % 2, 150 + 30 * i, 250) for i in range(6)]
    poly = FieldPoly.random(3, params.q, rng)
    v = build_vault(template, [], poly, params, rng)
    pts = [(v.x_of(i), int(y)) for i, y in enumerate(v.rows[:, 3], start=1)]
    assert all(poly_eval(poly, x) == y for x, y in pts)
    assert rs_decode(pts, 3, params.q) == poly


def test_build_vault_rejects_duplicates():
    params = SystemParams()
    m = Minutia(1, 200, 200)
    with pytest.raises(DuplicatePoint):
        build_vault([m], [m], FieldPoly((1, 2), 83), params, np.random.default_rng(0))


def _zero_noise_impressions(user, u, rng):
    return [[sample_impression(fg, NoiseModel(), rng).impression for _ in range(u)]
            for fg in user]


def test_enroll_and_verify_zero_noise():
    params = SystemParams(prealign=False)
    rng = np.random.default_rng(8)
    user = gen_population(1, 2, 30, rng)[0]
    e = enroll(_zero_noise_impressions(user, 2, rng), params, rng)
    assert len(e.template) == params.t and e.vault.r == params.r
    queries = [sample_impression(fg, NoiseModel(), rng).impression for fg in user]
    out = verify(e.vault, queries, params, rng)
    assert out.success and out.recovered == e.poly


def test_enroll_deterministic_per_seed():
    params = SystemParams(prealign=False)

    def run():
        rng = np.random.default_rng(99)
        user = gen_population(1, 2, 30, rng)[0]
        return enroll(_zero_noise_impressions(user, 2, rng), params, rng).vault.to_text()

    assert run() == run()


def test_recapture_gives_up_after_three_attempts():
    params = SystemParams(prealign=False)
    rng = np.random.default_rng(4)
    user = gen_population(1, 2, 30, rng)[0]
    attempts = []

    def capture(theta, attempt):
        attempts.append((theta, attempt))
        if theta == 1:
            pts = user[0].minutiae[:params.chi - 1]
            return [Impression(pts), Impression(pts)]
        return [Impression(user[1].minutiae)] * 2

    with pytest.raises(FingerBelowChi):
        enroll_with_recapture(capture, params, rng)
    assert attempts == [(1, 1), (1, 2), (1, 3)]


def test_recapture_recovers_on_second_attempt():
    params = SystemParams(prealign=False)
    rng = np.random.default_rng(4)
    user = gen_population(1, 2, 30, rng)[0]

    def capture(theta, attempt):
        pts = user[theta - 1].minutiae
        if theta == 1 and attempt == 1:
            pts = pts[:2]
        return [Impression(pts)] * 2

    e, log = enroll_with_recapture(capture, params, rng)
    assert log.attempts == {1: 2, 2: 1}
    assert log.retries == 1
    assert e.vault.r == params.r


def test_enroll_template_helper():
    params = SystemParams(f=2, t=10, r=30, k=4, chi=2)
    rng = np.random.default_rng(0)
    template = [Minutia(1 + i % 2, 150 + 20 * i, 256) for i in range(10)]
    e = enroll_template(template, params, rng)
    genuine = {(m.theta, m.a, m.b) for m in template}
    hits = [i for i, row in enumerate(e.vault.rows.tolist(), start=1)
            if tuple(row[:3]) in genuine]
    assert len(hits) == 10
    assert all(poly_eval(e.poly, e.vault.x_of(i)) == e.vault.rows[i - 1, 3] for i in hits)


@pytest.mark.parametrize("kwargs", [
    dict(f=1), dict(k=20, t=20), dict(t=90, r=80), dict(chi=11), dict(q=84),
    dict(r=600, q=601), dict(Q=1.5),
])
def test_params_validation(kwargs):
    with pytest.raises(ValueError):
        SystemParams(**kwargs).validate()


def test_default_params_valid():
    p = SystemParams().validate()
    assert p.d == 10 and p.q == 83
