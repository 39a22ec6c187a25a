"""Primary acceptance criteria, one test each, at the stated tolerances.

Every test records a PASS / FAIL / SKIP line that is printed in the
"acceptance criteria" section of the pytest terminal summary.
"""

import json
import os
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.special import expit

from kgembed import poincare as pb
from kgembed.analysis import khs_table, krackhardt_score, path_stats, symmetry_score
from kgembed.cli import main as cli
from kgembed.data import add_reciprocals, build_filter_index, build_store, load_triples
from kgembed.evaluation import evaluate_ranking, metrics_from_ranks
from kgembed.models import (
    MODELS,
    ModelParams,
    build_fully_expressive_tucker,
    build_special_case_core,
    get_model,
    score_reference,
)
from kgembed.synthetic import planted_hierarchy
from kgembed.training import OptimizerState, default_config, train_epoch

from oracles import brute_metrics, brute_rank, check_gradients, philox, random_dag, random_model_params


def test_gradient_correctness(criterion):
    start = time.perf_counter()
    failures, worst, checked = [], 0.0, 0
    for kind in sorted(MODELS):
        for seed in range(100):
            bad, w, n = check_gradients(kind, 1000 + seed)
            worst, checked = max(worst, w), checked + n
            if bad:
                failures.append((kind, seed, bad))
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 30.0
    criterion("gradient correctness", ok,
              f"7 models x 100 configs, {checked} entries, worst rel err {worst:.1e}, "
              f"{len(failures)} failing configs, {elapsed:.1f}s (< 30s)")
    assert not failures, failures[:5]
    assert elapsed < 30.0


def _ball(rng, n, d):
    v = rng.normal(size=(n, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v * 0.95 * rng.uniform(size=(n, 1)) ** (1.0 / d)


def test_hyperbolic_identity_suite(criterion):
    start = time.perf_counter()
    errors = {}
    for d in (2, 5, 40):
        rng = np.random.default_rng(100 + d)
        x, y, z = _ball(rng, 1000, d), _ball(rng, 1000, d), _ball(rng, 1000, d)
        zero = np.zeros_like(x)
        tangent = rng.normal(size=(1000, d))
        tangent *= rng.uniform(size=(1000, 1)) * 2.0 / (
            pb.conformal_factor(x)[:, None] * np.linalg.norm(tangent, axis=1, keepdims=True)
        )
        outs = [pb.mobius_add(x, zero), pb.mobius_add(zero, x), pb.mobius_add(-x, x),
                pb.exp_map(x, pb.log_map(x, y)), pb.exp_map(x, tangent), pb.mobius_add(x, y)]
        errors[d] = {
            "right identity": np.max(np.abs(outs[0] - x)),
            "left identity": np.max(np.abs(outs[1] - x)),
            "left inverse": np.max(np.abs(outs[2])),
            "d(x,x)": np.max(pb.distance(x, x)),
            "symmetry": np.max(np.abs(pb.distance(x, y) - pb.distance(y, x))),
            "triangle": np.max(pb.distance(x, z) - pb.distance(x, y) - pb.distance(y, z)),
            "exp.log": np.max(np.abs(outs[3] - y)),
            "log.exp": np.max(np.abs(pb.log_map(x, outs[4]) - tangent)),
            "ball": 0.0 if all(pb.in_ball(o) for o in outs) else 1.0,
        }
    elapsed = time.perf_counter() - start
    tol = {"triangle": 1e-9, "exp.log": 1e-9, "log.exp": 1e-9, "d(x,x)": 0.0, "ball": 0.0}
    bad = [(d, k, v) for d, e in errors.items() for k, v in e.items() if v > tol.get(k, 1e-12)]
    ok = not bad and elapsed < 10.0
    worst_inv = max(max(e["exp.log"], e["log.exp"]) for e in errors.values())
    criterion("hyperbolic identity suite", ok,
              f"3000 draws over d in (2,5,40), worst exp/log error {worst_inv:.1e}, "
              f"{len(bad)} violations, {elapsed:.2f}s (< 10s)")
    assert not bad, bad
    assert elapsed < 10.0


def _tucker(core, E, R):
    return ModelParams("tucker", {"E": E, "Rvec": R, "core": core},
                       {"n_e": len(E), "n_r": len(R), "dim": E.shape[1], "rel_dim": R.shape[1]})


def test_tucker_reduction_suite(criterion):
    rng = np.random.default_rng(7)
    tucker = get_model("tucker")
    worst = {}
    for kind in ("distmult", "complex", "simple"):
        err = 0.0
        for _ in range(1000):
            d = int(rng.integers(1, 6))
            width = d if kind == "distmult" else 2 * d
            E, R = rng.normal(size=(3, width)), rng.normal(size=(2, width))
            p = _tucker(build_special_case_core(kind, d), E, R)
            s, r, o = rng.integers(3), rng.integers(2), rng.integers(3)
            if kind == "simple":
                arrays = {"Eh": E[:, :d], "Et": E[:, d:], "W": R[:, :d], "W_inv": R[:, d:]}
                ref = score_reference("simple", arrays, s, r, o)
            else:
                other = get_model(kind).zeros(3, 2, dim=d)
                other["E"], other["Rvec"] = E, R
                ref = get_model(kind).score(other, s, r, o)[0]
            err = max(err, abs(tucker.score(p, s, r, o)[0] - ref))
        worst[kind] = err
    err = 0.0
    for _ in range(200):
        d, n_r = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        E, Rm = rng.normal(size=(3, d)), rng.normal(size=(n_r, d, d))
        p = _tucker(np.transpose(Rm, (1, 0, 2)), E, np.eye(n_r))
        s, r, o = rng.integers(3), rng.integers(n_r), rng.integers(3)
        err = max(err, abs(tucker.score(p, s, r, o)[0] - score_reference("rescal", {"E": E, "R": Rm}, s, r, o)))
    worst["rescal"] = err
    ok = all(v <= 1e-12 for v in worst.values())
    criterion("TuckER reduction suite", ok, ", ".join(f"{k} max err {v:.1e}" for k, v in worst.items()) + " (<= 1e-12)")
    assert ok, worst


def test_full_expressiveness_suite(criterion):
    rng = np.random.default_rng(2024)
    tucker = get_model("tucker")
    correct = total = 0
    for _ in range(20):
        truth = rng.random((5, 3, 5)) < rng.uniform(0.1, 0.9)
        p = build_fully_expressive_tucker(truth)
        for r in range(3):
            pred = expit(tucker.score_all(p, np.arange(5), np.full(5, r))) > 0.5
            correct += int(np.sum(pred == truth[:, r, :]))
            total += pred.size
    ok = correct == total == 20 * 75
    criterion("full-expressiveness suite", ok, f"{correct}/{total} triples classified correctly over 20 ground truths")
    assert ok


def test_hyper_equivalence(criterion):
    m = get_model("hyper")
    err = 0.0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        _, p = random_model_params("hyper", rng)
        r = int(rng.integers(p.n_r))
        e = rng.normal(size=p.settings["dim"])
        conv, _ = m.feature_maps(e[None, :], m.filters(p, [r]))
        sparse = np.einsum("i,itf->tf", e, m.sparse_filter_tensor(p, r))
        err = max(err, float(np.max(np.abs(conv[0] - sparse))))
    ok = err <= 1e-12
    criterion("HypER equivalence", ok, f"100 instances, max |conv - sparse| {err:.1e} (<= 1e-12)")
    assert ok


def _toy(seed, reciprocal):
    rng = np.random.default_rng(seed)
    n_e, n_r = int(rng.integers(3, 9)), int(rng.integers(1, 3))
    names, rels = [f"e{i}" for i in range(n_e)], [f"r{j}" for j in range(n_r)]
    draw = lambda: (names[rng.integers(n_e)], rels[rng.integers(n_r)], names[rng.integers(n_e)])
    train = list(dict.fromkeys([(names[i], rels[i % n_r], names[(i + 1) % n_e]) for i in range(n_e)]
                               + [draw() for _ in range(8)]))
    store = build_store(train, test=list(dict.fromkeys(draw() for _ in range(5))))
    store = add_reciprocals(store) if reciprocal else store
    # coarse integer scores produce many ties
    table = rng.integers(0, 4, size=(store.n_e, store.n_r, store.n_e)).astype(float)
    return store, table


class TableModel:
    """Scores looked up from a fixed random table."""

    kind = "table"

    def __init__(self, table, transform=lambda x: x):
        self.table, self.transform = table, transform

    def score_all(self, p, s, r):
        return self.transform(self.table[np.asarray(s), np.asarray(r), :])

    def score_subjects(self, p, r, o):
        return self.transform(self.table[:, np.asarray(r), np.asarray(o)].T)


def test_ranking_oracle(criterion):
    mismatches, ties, n = 0, 0, 0
    fake = ModelParams("table", {}, {"n_e": 0, "n_r": 0, "dim": 1})
    for seed in range(100):
        for reciprocal in (False, True):
            store, table = _toy(seed, reciprocal)
            known = {tuple(t) for name in ("train", "valid", "test") for t in store.split(name).tolist()}
            filt = build_filter_index(store)
            model = TableModel(table)
            report = evaluate_ranking(model, fake, store, filt)
            warped = evaluate_ranking(TableModel(table, lambda x: np.tanh(x / 3.0) * 5 - 1), fake, store, filt)
            expected = []
            for s, r, o in report.triples.tolist():
                obj = table[s, r]
                obj_mask = [x for x in range(store.n_e) if (s, r, x) in known]
                if reciprocal:
                    ri = r + store.n_r_base
                    sub = table[o, ri]
                    sub_mask = [x for x in range(store.n_e) if (o, ri, x) in known]
                else:
                    sub = table[:, r, o]
                    sub_mask = [x for x in range(store.n_e) if (x, r, o) in known]
                ties += int(np.sum(obj == obj[o]) > 1)
                expected.append((brute_rank(obj, o, obj_mask), brute_rank(sub, s, sub_mask)))
            expected = np.array(expected)
            n += len(expected)
            mismatches += int(not np.array_equal(report.ranks, expected))
            mismatches += int(report.overall != brute_metrics(expected))
            mismatches += int(not np.array_equal(report.ranks, warped.ranks))
    ok = mismatches == 0 and ties > 0
    criterion("ranking oracle", ok,
              f"{n} triples on 200 toy stores ({ties} with tied object scores), {mismatches} mismatches "
              "vs brute-force ranks / metrics / monotone transform")
    assert ok


def test_graph_metric_endpoints(criterion):
    rng = np.random.default_rng(50)
    dags = [krackhardt_score(random_dag(rng, int(rng.integers(2, 40)), 0.15) or [(0, 1)]) for _ in range(50)]
    cycles = [krackhardt_score([(i, (i + 1) % n) for i in range(n)]) for n in range(2, 12)]
    cliques = [krackhardt_score([(i, j) for i in range(n) for j in range(n) if i != j]) for n in range(2, 8)]
    sym, anti = [], []
    for _ in range(50):
        n = int(rng.integers(3, 12))
        m = rng.normal(size=(n, n))
        sym.append(symmetry_score(m + m.T))
        anti.append(symmetry_score(m - m.T))
    ok = (all(k == 1.0 for k in dags) and all(k == 0.0 for k in cycles + cliques)
          and all(s == 1.0 for s in sym) and all(a == -1.0 for a in anti))
    criterion("graph-metric endpoints", ok,
              f"Khs=1 on {sum(k == 1.0 for k in dags)}/50 DAGs, Khs=0 on {sum(k == 0.0 for k in cycles + cliques)}/16 "
              f"cycles+cliques, symmetry exact on {sum(s == 1.0 for s in sym)}/50 sym and "
              f"{sum(a == -1.0 for a in anti)}/50 anti-sym")
    assert ok


def test_wn18rr_structure(criterion):
    root = os.environ.get("KGE_DATA_DIR")
    folder = Path(root) / "WN18RR" if root else None
    if folder is None or not (folder / "train.txt").exists():
        criterion("WN18RR structural reproduction", None,
                  "dataset files not found (set KGE_DATA_DIR to a folder containing WN18RR/train.txt)")
        pytest.skip("WN18RR files not available")
    start = time.perf_counter()
    splits = [load_triples(folder / f"{n}.txt") for n in ("train", "valid", "test")]
    table = khs_table(build_store(*splits))
    elapsed = time.perf_counter() - start
    got = {name: table[name] for name in ("_has_part", "_verb_group", "_hypernym")}
    ok = (round(got["_has_part"]["khs"], 2) == 1.00 and round(got["_verb_group"]["khs"], 2) == 0.00
          and abs(got["_hypernym"]["khs"] - 0.99) <= 0.01 and got["_hypernym"]["max_path"] == 18
          and elapsed < 60.0)
    criterion("WN18RR structural reproduction", ok,
              f"Khs has_part {got['_has_part']['khs']:.3f}, verb_group {got['_verb_group']['khs']:.3f}, "
              f"hypernym {got['_hypernym']['khs']:.3f}, hypernym max path {got['_hypernym']['max_path']}, "
              f"{elapsed:.1f}s")
    assert ok


def _planted_run(kind, store, epochs=200):
    model = get_model(kind)
    settings, cfg = default_config(kind)
    settings["dim"] = 10
    rng = philox(cfg.seed)
    start = time.perf_counter()
    params = model.init(store.n_e, store.n_r, rng, **settings)
    state = OptimizerState(lr=cfg.lr)
    in_ball = True
    for _ in range(epochs):
        train_epoch(model, params, store, cfg, state, rng)
        in_ball &= all(pb.in_ball(params[name]) for name in model.ball_params)
    filt = build_filter_index(store)
    ranks = np.concatenate([evaluate_ranking(model, params, store, filt, split).ranks for split in ("valid", "test")])
    elapsed = time.perf_counter() - start
    return metrics_from_ranks(ranks), elapsed, in_ball


@pytest.mark.parametrize("kind", ["mure", "murp"])
def test_planted_hierarchy_end_to_end(kind, criterion):
    store = add_reciprocals(planted_hierarchy())
    m, elapsed, in_ball = _planted_run(kind, store)
    ok = m["hits@10"] >= 0.8 and elapsed < 60.0 and in_ball
    criterion(f"planted hierarchy ({kind})", ok,
              f"held-out filtered Hits@10 {m['hits@10']:.3f} (>= 0.8), MRR {m['mrr']:.3f}, "
              f"{elapsed:.1f}s (< 60s), ball invariant {'held' if in_ball else 'VIOLATED'}")
    assert ok


def test_planted_hierarchy_cli_murp(tmp_path, criterion, capsys):
    store = planted_hierarchy()
    for name in ("train", "valid", "test"):
        rows = store.decode(store.split(name))
        (tmp_path / f"{name}.txt").write_text("".join(f"{s}\t{r}\t{o}\n" for s, r, o in rows))
    prepared = tmp_path / "store.kge"
    assert cli(["prepare", "--out", str(prepared)] + sum(
        ([f"--{n}", str(tmp_path / f"{n}.txt")] for n in ("train", "valid", "test")), [])) == 0
    capsys.readouterr()
    start = time.perf_counter()
    code = cli(["train", "--data", str(prepared), "--model", "murp", "--dim", "10", "--epochs", "200",
                "--eval-every", "50", "--threads", "1", "--out", str(tmp_path / "murp.ckpt")])
    elapsed = time.perf_counter() - start
    final = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    ok = code == 0 and final["valid_hits@10"] >= 0.8 and elapsed < 60.0
    criterion("planted hierarchy (CLI murp)", ok,
              f"final log line valid Hits@10 {final['valid_hits@10']:.3f} (>= 0.8), {elapsed:.1f}s (< 60s)")
    assert ok


def test_determinism(tmp_path, criterion, capsys):
    store = planted_hierarchy(depth=3)
    for name in ("train", "valid", "test"):
        rows = store.decode(store.split(name))
        (tmp_path / f"{name}.txt").write_text("".join(f"{s}\t{r}\t{o}\n" for s, r, o in rows))
    prepared = tmp_path / "store.kge"
    cli(["prepare", "--out", str(prepared)] + sum(
        ([f"--{n}", str(tmp_path / f"{n}.txt")] for n in ("train", "valid", "test")), []))
    same = []
    for kind in sorted(MODELS):
        outputs = []
        for run in ("a", "b"):
            ckpt, report = tmp_path / f"{kind}_{run}.ckpt", tmp_path / f"{kind}_{run}.json"
            capsys.readouterr()
            cli(["train", "--data", str(prepared), "--model", kind, "--dim", "6", "--rel-dim", "4",
                 "--filter-len", "3", "--n-filters", "2", "--epochs", "3", "--seed", "11",
                 "--threads", "1", "--out", str(ckpt)])
            log = capsys.readouterr().out
            cli(["eval", "--data", str(prepared), "--ckpt", str(ckpt), "--classify", "--out", str(report)])
            outputs.append((log, ckpt.read_bytes(), report.read_bytes()))
        same.append(outputs[0] == outputs[1])
    from kgembed.io import load_checkpoint, save_checkpoint

    round_trip = []
    for kind in sorted(MODELS):
        for seed in range(10):
            _, p = random_model_params(kind, np.random.default_rng(seed))
            save_checkpoint(tmp_path / "rt.ckpt", p)
            q, _ = load_checkpoint(tmp_path / "rt.ckpt")
            round_trip.append(all(q[k].tobytes() == p[k].tobytes() for k in p))
    ok = all(same) and all(round_trip)
    criterion("determinism", ok,
              f"identical logs/checkpoints/reports for {sum(same)}/7 models at --threads 1; "
              f"bit-exact round trip {sum(round_trip)}/70")
    assert ok


def test_extended_wn18rr_mure_not_in_default_suite(criterion):
    criterion("WN18RR MuRE d=40 MRR within 0.03 of 0.459 (extended)", None,
              "excluded from the default suite; run scripts/wn18rr_mure_extended.py (hours on CPU)")
    pytest.skip("extended criterion, run separately")
