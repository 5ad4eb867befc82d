import numpy as np
import pytest

from covarnet import (AmbiguousAnchor, EchoGroup, FilterSpec, all_pairs_scan,
                      apply_shifts, assign_shifts, build_graph, detect_echoes,
                      from_rows, phi, realign_iterate)

SPEC = FilterSpec(min_abs_std_residual=4.0, max_p=1e-6)


def shifted_family(n=160, seed=3, shift_frac=0.5, d=1):
    """Planted C(4)-G(6) / A(4)-T(6) coupling; a fraction of rows pushed right."""
    rng = np.random.RandomState(seed)
    rows = []
    truth = []
    for _ in range(n):
        chars = [("ACGT")[rng.randint(4)] for _ in range(12)]
        if rng.rand() < 0.5:
            chars[4], chars[6] = "C", "G"
        else:
            chars[4], chars[6] = "A", "T"
        text = "".join(chars)
        if rng.rand() < shift_frac:
            text = "-" * d + text[: 12 - d]
            truth.append(d)
        else:
            truth.append(0)
        rows.append(text)
    return from_rows(rows), np.asarray(truth)


def test_phi_is_visible_abs_z_mass():
    m, _ = shifted_family()
    g = build_graph(all_pairs_scan(m))
    idx = np.flatnonzero(g.visible_mask(SPEC))
    assert phi(g, SPEC) == pytest.approx(float(np.abs(g.edges.std_residual(idx)).sum()))
    empty = FilterSpec(min_abs_std_residual=1e9)
    assert phi(g, empty) == 0.0


def test_detect_echoes_finds_planted_ladder():
    m, _ = shifted_family()
    g = build_graph(all_pairs_scan(m))
    groups = detect_echoes(g, spec=SPEC, s_max=3)
    assert groups
    top = groups[0]
    assert (top.cat_j, top.cat_k) in {("C", "G"), ("A", "T")}
    assert top.offset == 2
    assert top.members[0] == (4, 6)
    assert (5, 7) in top.members


def test_detect_echoes_sorted_by_mass():
    m, _ = shifted_family()
    g = build_graph(all_pairs_scan(m))
    groups = detect_echoes(g, spec=SPEC, s_max=3)
    masses = [g_.mass for g_ in groups]
    assert masses == sorted(masses, reverse=True)


def test_aligned_family_has_no_echoes():
    m, _ = shifted_family(shift_frac=0.0)
    g = build_graph(all_pairs_scan(m))
    assert detect_echoes(g, spec=SPEC, s_max=3) == []


def test_echo_members_stay_within_window():
    m, _ = shifted_family()
    g = build_graph(all_pairs_scan(m))
    for grp in detect_echoes(g, spec=SPEC, s_max=2):
        js = [j for j, _ in grp.members]
        assert js == sorted(js)
        assert js[-1] - js[0] <= 2
        assert all(b - a <= 2 for a, b in zip(js, js[1:]))
        assert len(grp.members) >= 2


def test_assign_shifts_matches_truth():
    m, truth = shifted_family()
    g = build_graph(all_pairs_scan(m))
    top = detect_echoes(g, spec=SPEC, s_max=3)[0]
    shifts = assign_shifts(m, top, s_max=3)
    # Rows carrying the group's own category pair must all be recovered.
    cj = m.categories.index(top.cat_j)
    ck = m.categories.index(top.cat_k)
    carriers = [(i, d) for i, d in enumerate(truth)
                if m.codes[i, 4 + d] == cj and m.codes[i, 6 + d] == ck]
    assert carriers
    for i, d in carriers:
        assert shifts[i] == d


def test_assign_shifts_anchor_match_is_zero():
    rows = ["AACGTA", "AACGTA", "CCAGTC", "CCAGTC"]
    m = from_rows(rows)
    grp = EchoGroup(cat_j="C", cat_k="G", offset=1, members=((2, 3), (3, 4)), mass=1.0)
    shifts = assign_shifts(m, grp, s_max=2)
    assert shifts[0] == 0 and shifts[1] == 0       # match at the anchor itself
    assert shifts[2] == 0 or shifts[2] in (-2, 2)  # no direct anchor match


def test_assign_shifts_one_column_later_is_plus_one():
    # Anchor (1, 2); rows 2/3 carry the pattern at (2, 3) instead.
    m = from_rows(["ACGA", "ACGA", "AACG", "AACG"])
    grp = EchoGroup(cat_j="C", cat_k="G", offset=1, members=((1, 2), (2, 3)), mass=1.0)
    shifts = assign_shifts(m, grp, s_max=2)
    assert shifts.tolist() == [0, 0, 1, 1]


def test_assign_shifts_empty_group_raises():
    m = from_rows(["AC", "CA"])
    grp = EchoGroup(cat_j="A", cat_k="C", offset=1, members=(), mass=0.0)
    with pytest.raises(AmbiguousAnchor):
        assign_shifts(m, grp)


def test_apply_shifts_translation_example():
    m = from_rows(["ACGT", "ACGT"])
    out = apply_shifts(m, [1, 0])
    assert out.rows() == ["CGT-", "ACGT"]
    out2 = apply_shifts(m, [-1, 0])
    assert out2.rows() == ["-ACG", "ACGT"]


def test_apply_shifts_zero_is_identity():
    m = from_rows(["ACGT", "TGCA"])
    out = apply_shifts(m, [0, 0])
    assert np.array_equal(out.codes, m.codes)


def test_apply_shifts_round_trip_up_to_boundary():
    m = from_rows(["ACGT", "TGCA"])
    back = apply_shifts(apply_shifts(m, [1, 1]), [-1, -1])
    # Interior cells recover; first column is pad-contaminated.
    assert back.rows()[0][1:] == "CGT"
    assert back.rows()[0][0] == "-"


def test_apply_shifts_conserves_symbols_up_to_truncation():
    m = from_rows(["ACGTACGT", "ACGTACGT"])
    out = apply_shifts(m, [2, -2])
    for i, s in enumerate((2, 2)):
        before = sorted(m.rows()[i].replace("-", ""))
        after = sorted(out.rows()[i].replace("-", ""))
        assert len(before) - len(after) <= s
        # The surviving symbols are a sub-multiset of the originals.
        b = list(before)
        for ch in after:
            b.remove(ch)


def test_apply_shifts_validates_input():
    m = from_rows(["ACGT", "TGCA"])
    with pytest.raises(ValueError):
        apply_shifts(m, [1])
    with pytest.raises(ValueError):
        apply_shifts(m, [4, 0])


def test_realign_iterate_recovers_and_reports():
    m, truth = shifted_family()
    res = realign_iterate(m, spec=SPEC, s_max=3, max_rounds=5)
    assert res.final_phi > res.initial_phi
    doc = res.to_document()
    assert set(doc) == {"initial_phi", "rounds", "final_phi"}
    assert doc["rounds"]
    for rnd in doc["rounds"]:
        assert set(rnd) == {"phi", "echoes", "shifts_applied"}
        assert sum(rnd["shifts_applied"].values()) == m.n
    phis = [r["phi"] for r in doc["rounds"]]
    assert phis == sorted(phis)
    assert phis[0] > doc["initial_phi"]


def test_realign_iterate_aligned_input_is_noop():
    m, _ = shifted_family(shift_frac=0.0)
    res = realign_iterate(m, spec=SPEC, s_max=3, max_rounds=4)
    assert res.rounds == []
    assert res.final_phi == res.initial_phi
    assert np.array_equal(res.matrix.codes, m.codes)


def test_realign_manual_shifts_mapping_and_sequence():
    m, _ = shifted_family(n=40)
    res = realign_iterate(m, manual_shifts={1: 2, 3: -1})
    assert len(res.rounds) == 1
    hist = res.rounds[0]["shifts_applied"]
    assert hist == {"-1": 1, "0": 38, "2": 1}
    full = [0] * m.n
    full[1], full[3] = 2, -1
    res2 = realign_iterate(m, manual_shifts=full)
    assert np.array_equal(res2.matrix.codes, res.matrix.codes)


def test_realign_validates_rounds():
    m, _ = shifted_family(n=20)
    with pytest.raises(ValueError):
        realign_iterate(m, max_rounds=0)
