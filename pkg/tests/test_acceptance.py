"""End-to-end acceptance checks.

Each test prints one `ACCEPTANCE <n> (<label>): PASS|FAIL` line directly to
the terminal (bypassing capture) so a full run yields a scannable scorecard.
Generators with planted ground truth use frozen seeds; every threshold and
tolerance is stated inline.
"""

import gc
import json
import time
from contextlib import contextmanager
from functools import lru_cache

import numpy as np
import pytest

from covarnet import (
    FilterSpec,
    all_pairs_scan,
    assign_shifts,
    build_crf,
    build_graph,
    colinear_overlaps,
    compute_layout,
    detect_echoes,
    from_rows,
    joint_counts,
    marginal_counts,
    rank_variants,
    realign_iterate,
    standardized_residuals,
)
from covarnet.demo import demo_rows
from oracles import (
    oracle_expected,
    oracle_fisher,
    oracle_joint,
    oracle_std_residual,
)

fisher_ref = lru_cache(maxsize=None)(oracle_fisher)


@pytest.fixture()
def announce(capsys):
    @contextmanager
    def _announce(num: int, label: str):
        try:
            yield
        except BaseException:
            with capsys.disabled():
                print(f"\nACCEPTANCE {num} ({label}): FAIL", flush=True)
            raise
        else:
            with capsys.disabled():
                print(f"\nACCEPTANCE {num} ({label}): PASS", flush=True)
    return _announce


# --- 1: contingency statistics against brute-force references --------------


def _random_family(rng):
    n = rng.randint(2, 13)
    L = rng.randint(2, 9)
    A = rng.randint(2, 5)
    syms = "ACGT"[:A] + "-"
    probs = np.full(A + 1, 0.85 / A)
    probs[-1] = 0.15
    while True:
        rows = ["".join(syms[c] for c in rng.choice(A + 1, size=L, p=probs))
                for _ in range(n)]
        if any(ch != "-" for r in rows for ch in r):
            return rows


def test_criterion_1_contingency_oracle_equivalence(announce):
    with announce(1, "contingency oracle equivalence, 200 matrices"):
        rng = np.random.RandomState(20260823)
        t0 = time.perf_counter()
        for _ in range(200):
            rows = _random_family(rng)
            m = from_rows(rows)
            marg = marginal_counts(m)
            for j in range(m.L):
                for k in range(j + 1, m.L):
                    joint = joint_counts(m, j, k)
                    ref = oracle_joint(rows, j, k)
                    z = standardized_residuals(joint, marg[j], marg[k], m.n)
                    for a, ca in enumerate(m.categories):
                        for b, cb in enumerate(m.categories):
                            assert joint[a, b] == ref.get((ca, cb), 0)
                            er = oracle_expected(rows, j, k, ca, cb)
                            assert abs(marg[j, a] * marg[k, b] / m.n - er) \
                                <= 1e-12 * max(1.0, er)
                            zr = oracle_std_residual(rows, j, k, ca, cb)
                            assert abs(z[a, b] - zr) <= 1e-12 * max(1.0, abs(zr))
            edges = all_pairs_scan(m)
            for i in range(len(edges)):
                e = edges.edge(i)
                cj = int(marg[e.j, m.categories.index(e.cat_j)])
                ck = int(marg[e.k, m.categories.index(e.cat_k)])
                a = e.observed
                pr = fisher_ref(a, cj - a, ck - a, m.n - cj - ck + a)
                assert abs(e.p_value - pr) <= 1e-12 * pr
        assert time.perf_counter() - t0 < 10.0


# --- 2: planted stem recovery ----------------------------------------------

_COMP = {"A": "T", "T": "A", "C": "G", "G": "C"}
_STEMS = [(2, 27), (3, 26), (4, 25), (5, 24), (6, 23), (7, 22), (8, 21), (9, 20)]


def _stem_family(seed, n=200, L=30, compliance=0.95):
    rng = np.random.RandomState(seed)
    rows = []
    for _ in range(n):
        chars = ["ACGT"[c] for c in rng.randint(0, 4, size=L)]
        for (j, k) in _STEMS:
            if rng.rand() < compliance:
                chars[k] = _COMP[chars[j]]
        rows.append("".join(chars))
    return rows


def test_criterion_2_planted_stem_recovery(announce):
    with announce(2, "8 planted stem pairs recovered, <=2 false"):
        t0 = time.perf_counter()
        for seed in (5, 11, 23):
            g = build_graph(all_pairs_scan(from_rows(_stem_family(seed))))
            idx = g.apply_filter(FilterSpec(min_abs_std_residual=4.0, max_p=1e-6))
            got = {(int(g.edges.j[i]), int(g.edges.k[i])) for i in idx}
            assert set(_STEMS) <= got
            assert len(got - set(_STEMS)) <= 2
        assert time.perf_counter() - t0 < 5.0


# --- 3: working-envelope scan ----------------------------------------------


def test_criterion_3_scale_envelope(announce):
    with announce(3, "1000x500x26 scan, 124750 pair tables"):
        rng = np.random.RandomState(7)
        letters = np.frombuffer(b"ABCDEFGHIJKLMNOPQRSTUVWXYZ", dtype=np.uint8)
        codes = rng.randint(0, 26, size=(1000, 500))
        rows = [bytes(letters[r]).decode() for r in codes]
        del codes

        t0 = time.perf_counter()
        edges = all_pairs_scan(from_rows(rows))
        assert edges.pair_count() == 124_750
        assert time.perf_counter() - t0 < 600.0
        del edges
        gc.collect()

        edges = all_pairs_scan(from_rows([r[:300] for r in rows]))
        assert edges.pair_count() == 44_850
        del edges
        gc.collect()


# --- 4: coupled-motif variant ordering -------------------------------------


def _motif_keys(pairs):
    out = []
    for (j, k) in pairs:
        out.append(f"{j}.A.{k}.{'A' if k < 6 else 'C'}")
        out.append(f"{j}.B.{k}.{'B' if k < 6 else 'D'}")
    return out


def test_criterion_4_variant_ordering_and_small_model_caveat(announce):
    with announce(4, "12-edge variant ordering + 6-edge inversion"):
        # two subfamilies sharing a 6-column coupled motif (cols 0-5) with
        # subfamily-specific context (cols 6-11)
        rows = ["AAAAAACCCCCC"] * 180 + ["BBBBBBDDDDDD"] * 220
        graph = build_graph(all_pairs_scan(from_rows(rows)))
        variants = {
            "wild_type":              "AAAAAACCCCCC",
            "two_swap":               "AAAABBCCCCCC",
            "six_swap_consistent":    "BBBBBBCCCCCC",
            "four_swap_inconsistent": "AABBBBCCCCCC",
            "chimeric":               "BBBAAACCCCCC",
        }

        big = build_crf(graph, selection=_motif_keys(
            [(0, 2), (1, 3), (0, 3), (3, 4), (0, 6), (1, 7)]), kappa=0.5)
        ranked = rank_variants(big, list(variants.values()),
                               ids=list(variants.keys()), reference="wild_type")
        assert [r["id"] for r in ranked] == [
            "wild_type", "two_swap", "six_swap_consistent",
            "four_swap_inconsistent", "chimeric"]
        scores = [r["total_log_score"] for r in ranked]
        assert all(a > b for a, b in zip(scores, scores[1:]))

        # motif-only model: the fully swapped variant is internally consistent
        # with the larger subfamily and outranks wild type
        small = build_crf(graph, selection=_motif_keys(
            [(0, 2), (1, 3), (0, 3)]), kappa=0.5)
        assert small.score("BBBBBBCCCCCC").total_log_score \
            > small.score("AAAAAACCCCCC").total_log_score


# --- 5: echo detection and realignment -------------------------------------

_ECHO_SYMS = "ABCDEFGHJKLM"
_ECHO_ANCHOR = (8, 10, "K", "A")
_ECHO_PAYLOADS = [(4, 6, "C", "G"), (13, 15, "G", "C"), (17, 19, "A", "K"),
                  (21, 23, "E", "F"), (5, 7, "H", "J"), (14, 16, "B", "D"),
                  (18, 20, "L", "E"), (22, 24, "F", "H"), (12, 14, "J", "L")]


def _echo_family(seed, n=300, L=30, shifted_frac=0.4,
                 anchor_comp=0.9, pay_comp=0.15):
    """40% of rows carry the motif displaced rightward by 1-3 columns."""
    rng = np.random.RandomState(seed)
    rows, truth = [], np.zeros(n, dtype=np.int64)
    for i in range(n):
        chars = [_ECHO_SYMS[c] for c in rng.randint(0, len(_ECHO_SYMS), size=L)]
        s = rng.randint(1, 4) if rng.rand() < shifted_frac else 0
        truth[i] = s
        j, k, M, N = _ECHO_ANCHOR
        if rng.rand() < anchor_comp:
            chars[j + s], chars[k + s] = M, N
        for (j, k, M, N) in _ECHO_PAYLOADS:
            if rng.rand() < pay_comp:
                chars[j + s], chars[k + s] = M, N
        rows.append("".join(chars))
    return rows, truth


def test_criterion_5_echo_realignment(announce):
    with announce(5, "echo recovery >=95%, visible mass doubles"):
        # The operating threshold keeps the anchor ladder visible while the
        # weak payload couplings and their displaced copies stay subcritical;
        # consolidation then pulls the payloads across the visibility gate.
        spec = FilterSpec(min_abs_std_residual=8.0, max_p=1e-6)
        t0 = time.perf_counter()
        for seed in (2, 19, 37):
            rows, truth = _echo_family(seed)
            m = from_rows(rows)
            g = build_graph(all_pairs_scan(m), filter_spec=spec)
            groups = detect_echoes(g, spec=spec)
            assert groups, "no echo ladder detected"
            top = groups[0]
            j0, k0, M, N = _ECHO_ANCHOR
            assert (top.cat_j, top.cat_k, top.offset) == (M, N, k0 - j0)
            assert top.base == (j0, k0)
            assert len(top.members) == 4          # base + shifts 1..3

            shifts = assign_shifts(m, top)
            assert float((shifts == truth).mean()) >= 0.95

            result = realign_iterate(m, spec=spec)
            assert result.final_phi >= 2.0 * result.initial_phi
            phis = [r["phi"] for r in result.rounds]
            assert all(a < b for a, b in zip([result.initial_phi] + phis, phis))
        assert time.perf_counter() - t0 < 30.0


# --- 6: filtering invariance and monotonicity ------------------------------


def test_criterion_6_filter_invariance_1000_trials(announce):
    with announce(6, "1000 filter trials: landscape/monotone/pins/replay"):
        rng = np.random.RandomState(99)
        trials = 0
        for _ in range(40):
            rows = _random_family(rng)
            while len(rows) < 5 or len(rows[0]) < 3:
                rows = _random_family(rng)
            graph = build_graph(all_pairs_scan(from_rows(rows)))
            landscape = json.dumps(graph.node_documents(), sort_keys=True)
            E = len(graph.edges)
            for _ in range(25):
                z_lo = rng.uniform(0, 2)
                p_hi = rng.uniform(0.5, 1.0)
                r_lo = rng.uniform(0, 0.5)
                loose = FilterSpec(min_abs_std_residual=z_lo, max_p=p_hi,
                                   min_abs_raw=r_lo)
                tight = FilterSpec(min_abs_std_residual=z_lo + rng.uniform(0, 3),
                                   max_p=p_hi * rng.uniform(0.01, 1.0),
                                   min_abs_raw=r_lo + rng.uniform(0, 2))
                vis_loose = graph.visible_mask(loose)
                vis_tight = graph.visible_mask(tight)
                assert not np.any(vis_tight & ~vis_loose)

                i = rng.randint(E)
                e = graph.edges.edge(i)
                key = f"{e.j}.{e.cat_j}.{e.k}.{e.cat_k}"
                graph.edit_edge(key, str(rng.choice(["pin", "remove", "reset"])))
                strict = FilterSpec(min_abs_std_residual=1e9, max_p=1e-300)
                if graph.edge_state(key) == "pinned":
                    assert graph.visible_mask(strict)[i]

                graph.apply_filter(tight)
                assert json.dumps(graph.node_documents(),
                                  sort_keys=True) == landscape

                twin = build_graph(all_pairs_scan(from_rows(rows)))
                twin.replay(graph.edit_log)
                assert np.array_equal(twin.state, graph.state)
                trials += 1
        assert trials == 1000


# --- 7: layout contract ----------------------------------------------------


def test_criterion_7_layout_500_scenes(announce):
    with announce(7, "500 scenes: no colinear overlaps, stable bytes"):
        rng = np.random.RandomState(4242)
        scenes = 0
        while scenes < 500:
            n = rng.randint(6, 30)
            L = rng.randint(3, 11)
            A = rng.randint(2, 5)
            syms = "ACGT"[:A] + "-"
            probs = np.full(A + 1, 0.9 / A)
            probs[-1] = 0.1
            rows = ["".join(syms[c] for c in rng.choice(A + 1, size=L, p=probs))
                    for _ in range(n)]
            if not any(ch != "-" for r in rows for ch in r):
                continue
            graph = build_graph(all_pairs_scan(from_rows(rows)))
            spec = FilterSpec(min_abs_std_residual=rng.uniform(0.5, 4.0),
                              max_p=rng.uniform(0.05, 1.0))
            if graph.apply_filter(spec).size > 500:
                continue
            scene = compute_layout(graph, spec)
            assert colinear_overlaps(scene.edges) == []
            assert compute_layout(graph, spec).to_json() == scene.to_json()
            scenes += 1


# --- 8: CLI / service byte parity ------------------------------------------


def test_criterion_8_cli_service_parity(announce, tmp_path):
    from fastapi.testclient import TestClient

    from covarnet.cli import main
    from covarnet.service import create_app

    with announce(8, "CLI and service artifacts byte-identical"):
        client = TestClient(create_app())
        did = client.post("/datasets", json={"demo": "hairpin"}).json()["id"]

        align = tmp_path / "family.txt"
        align.write_text("".join(r + "\n" for r in demo_rows()))

        # scan -> edges.csv
        csv_path = tmp_path / "edges.csv"
        assert main(["scan", str(align), "-o", str(csv_path)]) == 0
        assert client.get(f"/datasets/{did}/export/edges.csv").content \
            == csv_path.read_bytes()

        # filter -> graph.json (service filter arrives as view state)
        graph_path = tmp_path / "graph.json"
        assert main(["filter", str(align), "--min-z", "2", "-o", str(graph_path)]) == 0
        client.get(f"/datasets/{did}/graph", params={"min_z": 2.0})
        assert client.get(f"/datasets/{did}/export/graph.json").content \
            == graph_path.read_bytes()

        # model -> model.json
        model_path = tmp_path / "model.json"
        assert main(["model", str(graph_path), "-o", str(model_path)]) == 0
        model_id = client.post(f"/datasets/{did}/model", json={}).json()["model_id"]
        assert client.get(f"/datasets/{did}/export/model.json").content \
            == model_path.read_bytes()

        # score -> ranked report
        seqs = tmp_path / "variants.txt"
        seqs.write_text("".join(r + "\n" for r in demo_rows()[:5]))
        score_path = tmp_path / "scores.json"
        assert main(["score", str(model_path), str(seqs), "-o", str(score_path)]) == 0
        resp = client.post(f"/models/{model_id}/score",
                           json={"sequences": demo_rows()[:5]})
        assert resp.content == score_path.read_bytes()

        # layout -> scene.json
        scene_path = tmp_path / "scene.json"
        assert main(["layout", str(graph_path), "-o", str(scene_path)]) == 0
        assert client.get(f"/datasets/{did}/scene",
                          params={"min_z": 2.0}).content == scene_path.read_bytes()
