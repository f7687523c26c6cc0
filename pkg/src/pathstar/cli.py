"""Operator entry point: gen / train / eval / audit / report.

Exit codes: 0 success, 1 config or usage failure, 2 audit/property failure.
The audit checks live here as plain functions so the acceptance tests can
run the same code at full scale.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import supervision as sv
from .evaluation import ChcUniformPredictor, aggregate, solve_path_oracle, teacher_forced_eval
from .graphs import (
    GraphError,
    enumerate_traversals,
    edge_list,
    sample_path_star,
    sample_space_size,
    sample_tree_star,
    validate_traversal,
)
from .model import (
    ModelConfig,
    Transformer,
    load_checkpoint,
    next_token_loss,
    numerical_gradients,
)
from .tokens import ParseError, Vocabulary, build_query, parse_example, tokenize
from .training import ExperimentSpec, RunRecord, build_example, make_batch, run_seed

_CORPUS_NS = 10**12 + 2  # matches the offline-corpus stream in training


# ---------------------------------------------------------------------------
# audit checks (shared with the acceptance suite)


class AuditFailure(AssertionError):
    pass


def _check(tally: dict, prop: str, ok: bool, detail: str = ""):
    tally[prop] = tally.get(prop, 0) + 1
    if not ok:
        raise AuditFailure(f"{prop}: {detail}")


def _edge_invariants(graph, el, tally):
    want = set()
    for arm in graph.arms:
        for u, v in zip(arm, arm[1:]):
            want.add((u, v))
    _check(tally, "edges_exactly_once", set(el.edges) == want and len(el.edges) == len(want))
    if el.shuffle_mode == "causal_wise":
        pos = {e: i for i, e in enumerate(el.edges)}
        ok = all(
            pos[(u, v)] < pos[(v, w)]
            for arm in graph.arms
            for (u, v), (v2, w) in zip(zip(arm, arm[1:]), list(zip(arm, arm[1:]))[1:])
        )
        _check(tally, "causal_prefix_order", ok)
    elif el.shuffle_mode == "arm_wise":
        arm_of = {}
        for i, arm in enumerate(graph.arms):
            for e in zip(arm, arm[1:]):
                arm_of[e] = i
        runs = [arm_of[e] for e in el.edges]
        m = graph.arm_len
        blocks = [runs[i : i + m - 1] for i in range(0, len(runs), m - 1)]
        ok = all(len(set(b)) == 1 for b in blocks) and sorted(b[0] for b in blocks) == list(
            range(graph.num_arms)
        )
        in_order = all(
            [e for e in el.edges if arm_of[e] == i] == list(zip(a, a[1:]))
            for i, a in enumerate(graph.arms)
        )
        _check(tally, "arm_blocks_contiguous_in_order", ok and in_order)


def _example_invariants(graph, el, query, tok, vocab, tally):
    n_edges = len(el.edges)
    _check(
        tally,
        "source_token_count",
        len(tok.source_ids) == len(query.nodes) + (query.width - len(query.nodes)) + 2 + 3 * n_edges + 1,
    )
    src = tok.source_ids
    _check(tally, "source_markers", src[0] == vocab.query_open_id and src[-1] == vocab.answer_id)
    arm = tok.target_ids[tok.sp_total :]
    _check(
        tally,
        "target_arm_segment",
        len(arm) == graph.arm_len and arm[0] == graph.start and arm[-1] == graph.target,
    )
    tags = tok.segment_tags
    _check(tally, "tags_cover_sequence", len(tags) == len(src) + len(tok.target_ids))
    pad_ok = all(
        t == vocab.pad_id or tag != "query"
        for t, tag in zip(src, tags)
        if t == vocab.pad_id
    ) and all(t != vocab.pad_id or tag == "query" for t, tag in zip(src, tags))
    _check(tally, "pads_only_in_query", pad_ok)
    _check(tally, "no_mask_token", vocab.mask_id not in src and vocab.mask_id not in tok.target_ids)
    adj, q = parse_example(tok.full_ids(), vocab)
    want_adj = {}
    for u, v in el.edges:
        want_adj.setdefault(u, []).append(v)
    _check(tally, "parse_round_trip", q == tuple(n for n in query.nodes) and adj == want_adj)


def audit_structural(n: int = 100_000, seed: int = 0, log=None) -> dict:
    """Invariant sweep over the D x M grid; raises AuditFailure on the first hit."""
    rng = np.random.default_rng([seed, 11])
    grid = [(d, m) for d in (2, 3, 4, 5) for m in (5, 7, 9)]
    modes = ("edge_wise", "arm_wise", "causal_wise")
    tally: dict = {}
    for i in range(n):
        d, m = grid[i % len(grid)]
        graph = sample_path_star(d, m, d * (m - 1) + 1, rng)
        graph.validate()
        _check(tally, "graph_invariants", True)
        el = edge_list(graph, modes[i % 3], rng)
        _edge_invariants(graph, el, tally)
        vocab = Vocabulary(graph.node_universe_size)
        query = build_query(graph, rng=rng)
        tok = tokenize(graph, el, query, vocab)
        _example_invariants(graph, el, query, tok, vocab, tally)
        if log and (i + 1) % 20000 == 0:
            log(f"structural: {i + 1}/{n}")
    tally["examples"] = n
    return tally


def audit_oracle(n: int = 100_000, seed: int = 1, log=None) -> dict:
    """solve_path_oracle vs generator ground truth across all shuffles."""
    rng = np.random.default_rng([seed, 13])
    modes = ("edge_wise", "arm_wise", "causal_wise")
    tally: dict = {}
    for i in range(n):
        d = int(rng.integers(2, 6))
        m = int(rng.integers(3, 8))
        graph = sample_path_star(d, m, d * (m - 1) + 1, rng)
        el = edge_list(graph, modes[i % 3], rng)
        vocab = Vocabulary(graph.node_universe_size)
        tok = tokenize(graph, el, build_query(graph, rng=rng), vocab)
        got = solve_path_oracle(tok.full_ids(), vocab)
        _check(
            tally,
            f"oracle_matches_{modes[i % 3]}",
            tuple(got) == graph.target_arm,
            f"case {i}",
        )
        if log and (i + 1) % 20000 == 0:
            log(f"oracle: {i + 1}/{n}")
    tally["examples"] = n
    return tally


def audit_traversals(n_trees: int = 10_000, seed: int = 2, max_nodes: int = 12, log=None) -> dict:
    """Traversal validator vs exhaustive enumeration on small trees."""
    rng = np.random.default_rng([seed, 17])
    shapes = [(d, m) for d in (2, 3) for m in (2, 3, 4, 5, 6) if d * (m - 1) + 1 <= max_nodes]
    tally: dict = {}
    for i in range(n_trees):
        d, m = shapes[int(rng.integers(len(shapes)))]
        variant = ("d_ary", "split")[i % 2]
        tree = sample_tree_star(d, m, d * (m - 1) + 1, variant, rng)
        tree.validate()
        valid = enumerate_traversals(tree)
        _check(tally, "reference_enumerated", tuple(tree.traversal) in valid, f"tree {i}")
        for t in valid:
            _check(tally, "validator_accepts_valid", validate_traversal(tree, t), f"tree {i}")
        if variant == "split":
            _check(tally, "split_unique_traversal", len(valid) == 1, f"tree {i}: {len(valid)}")
        # a corrupted candidate must be rejected
        bad = list(tree.traversal)
        if len(bad) > 2:
            bad[1], bad[-1] = bad[-1], bad[1]
            _check(
                tally,
                "validator_rejects_corrupt",
                tuple(bad) in valid or not validate_traversal(tree, bad),
                f"tree {i}",
            )
        if log and (i + 1) % 2000 == 0:
            log(f"traversals: {i + 1}/{n_trees}")
    tally["trees"] = n_trees
    return tally


def audit_enumeration() -> dict:
    """Sample-space formula vs brute force for D=2, M=2, |V| in {3,4,5}."""
    tally: dict = {}
    from itertools import permutations

    for v in (3, 4, 5):
        count = 0
        for nodes in permutations(range(1, v + 1), 3):
            count += 2  # either leaf may be the target
        formula = sample_space_size(2, 2, v)
        _check(tally, f"enumeration_V{v}", count == formula, f"{count} != {formula}")
        tally[f"count_V{v}"] = formula
    return tally


def audit_chc(n_graphs: int = 10_000, ds=(2, 3, 4, 5), m: int = 5, seed: int = 3, log=None) -> dict:
    """Reference predictor: leading node at chance, the rest perfect."""
    tally: dict = {}
    # the two-point tolerance is calibrated to 10k graphs; smaller smoke
    # runs get a matching-sigma bound instead of guaranteed flakes
    tol = max(0.02, 4.0 * math.sqrt(0.25 / n_graphs))
    for d in ds:
        spec = ExperimentSpec(name=f"chc_d{d}", d=d, m=m, shuffle="edge_wise")
        predictor = ChcUniformPredictor(spec.vocabulary(), np.random.default_rng([seed, d]))
        lead_hits = 0.0
        start_hits = 0.0
        rest_hits = 0.0
        rest_slots = 0
        done = 0
        index = 0
        while done < n_graphs:
            size = min(1024, n_graphs - done)
            batch = make_batch(spec, index, seed=seed + d, size=size, eval_time=True)
            rep = teacher_forced_eval(predictor, batch)
            start_hits += rep.arm_pos_acc[0] * size
            lead_hits += rep.arm_pos_acc[1] * size
            rest_hits += sum(rep.arm_pos_acc[2:]) * size
            rest_slots += (len(rep.arm_pos_acc) - 2) * size
            done += size
            index += 1
        lead = lead_hits / n_graphs
        rest = rest_hits / rest_slots
        tally[f"lead_acc_d{d}"] = round(lead, 4)
        tally[f"rest_acc_d{d}"] = round(rest, 4)
        _check(tally, f"start_perfect_d{d}", start_hits == n_graphs, f"{start_hits}")
        _check(tally, f"lead_within_2pct_d{d}", abs(lead - 1.0 / d) < tol, f"{lead:.4f}")
        _check(tally, f"rest_perfect_d{d}", rest == 1.0, f"{rest:.6f}")
        if log:
            log(f"chc d={d}: lead {lead:.4f} rest {rest:.4f}")
    return tally


def audit_samplers(n: int = 100_000, seed: int = 4, log=None) -> dict:
    """Statistical checks on every stochastic knob in supervision/graphs.

    Tolerances are calibrated to 100k draws; smaller smoke runs widen each
    bound to four standard errors so they test the mechanism, not luck.
    """
    tally: dict = {}
    rng = np.random.default_rng([seed, 19])
    wide = lambda fixed, sd: max(fixed, 4.0 * sd / math.sqrt(n))
    for p in (0.4, 0.5, 0.8):
        draws = rng.geometric(p, size=n)
        mean = float(draws.mean())
        tally[f"span_mean_p{p}"] = round(mean, 4)
        tol = wide(0.02 / p, math.sqrt(1 - p) / p)
        _check(tally, f"span_mean_within_2pct_p{p}", abs(mean - 1.0 / p) < tol, f"{mean}")
    # fair coin on the first span type
    firsts = 0
    for _ in range(n):
        plan = sv.sample_span_plan(6, 0.5, 0.8, rng, noise="dropout", vocab_size=None)
        firsts += plan.actions[0] != sv.KEEP
    frac = firsts / n
    tally["mask_first_frac"] = round(frac, 4)
    _check(tally, "mask_first_50pct", abs(frac - 0.5) < wide(0.01, 0.5), f"{frac}")
    # raw branch decisions, before the budget cap
    branch_log: list = []
    while len(branch_log) < n:
        sample_tree_star(3, 6, 16, "d_ary", rng, branch_log=branch_log)
    counts = np.bincount(np.array(branch_log[:n]), minlength=5)[1:5] / n
    want = (0.3, 0.4, 0.2, 0.1)
    for k, (got, exp) in enumerate(zip(counts, want), start=1):
        tally[f"branch_freq_{k}"] = round(float(got), 4)
        tol = wide(0.02, math.sqrt(exp * (1 - exp)))
        _check(tally, f"branch_freq_within_02_{k}", abs(got - exp) < tol, f"{got}")
    # tree/path mix as the trainer stream sees it
    spec = ExperimentSpec(name="mix", d=2, m=3, graph_kind="d_ary", shuffle="edge_wise")
    paths = 0
    for i in range(n):
        ex = build_example(spec, np.random.default_rng([seed, 23, i]))
        paths += ex.kind == "path"
    frac = paths / n
    tally["path_mix_frac"] = round(frac, 4)
    _check(tally, "path_mix_10pct", abs(frac - 0.10) < wide(0.01, 0.3), f"{frac}")
    if log:
        log(f"samplers: {json.dumps(tally)}")
    return tally


def audit_gradients(log=None) -> dict:
    """Finite-difference checks plus closed-form weight properties."""
    tally: dict = {}
    rng = np.random.default_rng(99)
    # RITF alone, double precision
    b, m, vocab = 3, 4, 12
    w = vocab + 7
    scores = rng.normal(size=(b, m, w))
    arms = np.stack([rng.choice(np.arange(1, vocab + 1), size=m, replace=False) for _ in range(b)])
    loss, grad = sv.ritf_loss_batch(scores, arms, vocab)
    num = np.zeros_like(scores)
    eps = 1e-6
    it = np.nditer(scores, flags=["multi_index"])
    for _ in it:
        ix = it.multi_index
        orig = scores[ix]
        scores[ix] = orig + eps
        up, _ = sv.ritf_loss_batch(scores, arms, vocab)
        scores[ix] = orig - eps
        dn, _ = sv.ritf_loss_batch(scores, arms, vocab)
        scores[ix] = orig
        num[ix] = (up - dn) / (2 * eps)
    denom = max(np.abs(grad).max(), 1e-8)
    rel = float(np.abs(grad - num).max() / denom)
    tally["ritf_fd_rel_err"] = rel
    _check(tally, "ritf_fd_below_1e4", rel < 1e-4, f"{rel}")
    # end-to-end on a tiny double-precision model
    cfg = ModelConfig(vocab_size=20, max_len=16, layers=2, heads=2, dim=8, ff_dim=16, dtype="float64")
    model = Transformer(cfg, seed=5)
    tokens = rng.integers(0, 20, size=(2, 16))
    labels = rng.integers(0, 20, size=(2, 16))
    mask = np.ones_like(labels, dtype=bool)

    def loss_fn():
        tr = model.forward(tokens, need_cache=False)
        return next_token_loss(tr.logits, labels, mask)[0]

    trace = model.forward(tokens)
    _, dlogits = next_token_loss(trace.logits, labels, mask)
    grads = model.backward(trace, dlogits)
    numg = numerical_gradients(loss_fn, model.params, eps=1e-5)
    worst = 0.0
    for name in grads:
        scale = max(np.abs(grads[name]).max(), 1e-8)
        worst = max(worst, float(np.abs(grads[name] - numg[name]).max() / scale))
    tally["model_fd_rel_err"] = worst
    _check(tally, "model_fd_below_1e3", worst < 1e-3, f"{worst}")
    # LS weights: normalized, arithmetic-decreasing
    for count in (1, 2, 5, 9):
        wts = np.array(sv.ls_weights(count))
        _check(tally, "ls_sums_to_1", abs(wts.sum() - 1.0) < 1e-12, f"count {count}")
        diffs = np.diff(wts)
        _check(
            tally,
            "ls_arithmetic_decreasing",
            count == 1 or (np.all(diffs < 0) and np.allclose(diffs, diffs[0])),
            f"count {count}",
        )
    # attention rows sum to one
    att_cfg = ModelConfig(vocab_size=20, max_len=16, layers=2, heads=2, dim=8, ff_dim=16)
    att_model = Transformer(att_cfg, seed=6)
    tr = att_model.forward(rng.integers(0, 20, size=(2, 16)))
    for cache in tr.caches:
        rows = cache["att"].sum(axis=-1)
        _check(tally, "attention_rows_normalized", bool(np.all(np.abs(rows - 1.0) < 1e-6)))
    if log:
        log(f"gradients: ritf {tally['ritf_fd_rel_err']:.2e} model {tally['model_fd_rel_err']:.2e}")
    return tally


def audit_dataset(path, log=None) -> dict:
    """Re-validate a JSONL dataset: parse, structure, and oracle agreement."""
    tally: dict = {}
    n = 0
    with open(path) as fh:
        for index, line in enumerate(fh):
            if not line.strip():
                continue
            n += 1
            try:
                rec = json.loads(line)
                meta = rec["meta"]
                vocab_size = meta.get("vocab", meta["d"] * (meta["m"] - 1) + 1)
                vocab = Vocabulary(vocab_size)
                tokens = list(rec["source_ids"]) + list(rec["target_ids"])
                adj, query = parse_example(tokens, vocab)
                arm = [t for t, tag in zip(tokens, rec["segment_tags"]) if tag == "arm"]
                _check(tally, "arm_length", len(arm) == meta["m"], f"record {index}")
                got = solve_path_oracle(tokens, vocab)
                _check(tally, "oracle_agrees", list(got) == arm, f"record {index}")
            except (ParseError, GraphError, KeyError, ValueError) as exc:
                raise AuditFailure(f"record {index}: {exc}") from exc
    tally["records"] = n
    if log:
        log(f"dataset: {n} records clean")
    return tally


# ---------------------------------------------------------------------------
# subcommands


def _spec_from_args(args) -> ExperimentSpec:
    file_values = cfgmod.load_config(args.config) if args.config else {}
    overrides = cfgmod.parse_overrides(args.override or [])
    cfg = cfgmod.resolve(file_values, overrides)
    spec = cfgmod.spec_from_config(cfg)
    return spec


def _cmd_gen(args) -> int:
    spec = _spec_from_args(args)
    seed = args.seed if args.seed is not None else spec.data_seed
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    mode = "a" if args.start and out.exists() else "w"
    with open(out, mode) as fh:
        for i in range(args.start, args.start + args.n):
            rng = np.random.default_rng([seed, _CORPUS_NS, i])
            ex = build_example(spec, rng)
            rec = {
                "source_ids": [int(t) for t in ex.tok.source_ids],
                "target_ids": [int(t) for t in ex.tok.target_ids],
                "segment_tags": list(ex.tok.segment_tags),
                "meta": {
                    "d": ex.d,
                    "m": ex.m,
                    "seed": seed,
                    "variant": ex.kind,
                    "index": i,
                    "vocab": spec.node_universe(),
                },
            }
            fh.write(json.dumps(rec) + "\n")
    cfgmod.write_manifest(
        out.parent,
        cfgmod.config_from_spec(spec),
        [seed],
        [out],
        name=f"{out.stem}.manifest.json",
    )
    print(f"wrote {args.n} records to {out}")
    return 0


def _cmd_train(args) -> int:
    spec = _spec_from_args(args)
    seeds = (
        tuple(int(s) for s in args.seeds.split(",")) if args.seeds else spec.seeds
    )
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    artifacts = []
    for seed in seeds:
        record = run_seed(spec, seed, out_dir=out, log=print, resume=args.resume)
        metrics = out / f"seed{seed}.metrics.jsonl"
        with open(metrics, "w") as fh:
            for point in record.points:
                fh.write(json.dumps(point) + "\n")
        artifacts += [out / f"seed{seed}.npz", out / f"seed{seed}.json", metrics]
    cfgmod.write_manifest(out, cfgmod.config_from_spec(spec), seeds, artifacts)
    return 0


def _cmd_eval(args) -> int:
    from .training import evaluate_model

    model, _, extra = load_checkpoint(args.checkpoint)
    if "spec" not in extra:
        print("checkpoint carries no experiment settings", file=sys.stderr)
        return 1
    stored = extra["spec"]
    stored["d"] = tuple(stored["d"]) if isinstance(stored["d"], list) else stored["d"]
    stored["m"] = tuple(stored["m"]) if isinstance(stored["m"], list) else stored["m"]
    stored["seeds"] = tuple(stored["seeds"])
    spec = ExperimentSpec(**stored)
    if args.n:
        spec.eval_samples = args.n
    tf, gen = evaluate_model(model, spec, seed=args.seed, round_=0)
    print(json.dumps({"tf": tf.to_dict(), "gen": gen.to_dict()}, indent=1))
    return 0


def _cmd_audit(args) -> int:
    report = {}
    try:
        if args.dataset:
            report["dataset"] = audit_dataset(args.dataset, log=print)
        else:
            n = args.n
            report["structural"] = audit_structural(n, log=print)
            report["oracle"] = audit_oracle(n, log=print)
            report["traversals"] = audit_traversals(max(n // 10, 100), log=print)
            report["enumeration"] = audit_enumeration()
            report["chc"] = audit_chc(max(n // 10, 100), log=print)
            report["samplers"] = audit_samplers(n, log=print)
            report["gradients"] = audit_gradients(log=print)
    except AuditFailure as exc:
        print(json.dumps(report, indent=1))
        print(f"AUDIT FAILURE: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(report, indent=1))
    print("audit passed")
    return 0


def _load_run_dir(run_dir: Path):
    """Yield (record, d, m) for every seed record in a run directory."""
    manifest = cfgmod.read_manifest(run_dir)
    for path in sorted(run_dir.glob("seed*.json")):
        record = RunRecord.from_json(path.read_text())
        d = m = None
        if record.spec:
            d, m = record.spec.get("d"), record.spec.get("m")
        elif manifest:
            d, m = manifest["config"].get("task.d"), manifest["config"].get("task.m")
        yield record, d, m


def _cmd_report(args) -> int:
    rows = []
    problems = []
    groups: dict = {}
    for run_dir in map(Path, args.run_dirs):
        if not run_dir.is_dir():
            problems.append(f"{run_dir}: not a directory")
            continue
        found = False
        for record, d, m in _load_run_dir(run_dir):
            found = True
            if not record.points:
                problems.append(f"{run_dir} seed {record.seed}: no metrics")
                continue
            if d is None:
                problems.append(f"{run_dir} seed {record.seed}: no config stored")
                continue
            key = (record.name, json.dumps(d), json.dumps(m))
            final = record.final
            groups.setdefault(key, {"d": d, "m": m, "tf": [], "gen": []})
            groups[key]["tf"].append(final["tf"]["extras"].get("joint_seq_acc", final["tf"]["arm_seq_acc"]))
            groups[key]["gen"].append(final["gen"]["extras"].get("joint_seq_acc", final["gen"]["arm_seq_acc"]))
        if not found:
            problems.append(f"{run_dir}: no seed records")
    for (name, _, _), g in sorted(groups.items()):
        d = g["d"] if isinstance(g["d"], int) else tuple(g["d"])
        m = g["m"] if isinstance(g["m"], int) else tuple(g["m"])
        d_scalar = d if isinstance(d, int) else d[1]
        row = aggregate(name, d_scalar, m if isinstance(m, int) else m[1], g["tf"], g["gen"])
        row["d"], row["m"] = str(d), str(m)
        row["seeds"] = len(g["tf"])
        rows.append(row)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=list(rows[0].keys()) if rows else ["experiment"])
            writer.writeheader()
            writer.writerows(rows)
    print(json.dumps({"rows": rows, "problems": problems}, indent=1))
    return 0 if rows or not problems else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pathstar", description="Path-star task experiment harness."
    )
    sub = parser.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("gen", help="generate a JSONL dataset")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--n", type=int, required=True, help="number of records")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--seed", type=int, help="stream seed (default: train.data_seed)")
    p.add_argument("--start", type=int, default=0, help="first record index (resume)")
    p.add_argument("override", nargs="*", help="key=value overrides")
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("train", help="train one spec over its seeds")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", help="comma list, overrides train.seeds")
    p.add_argument("--resume", action="store_true", help="continue from checkpoints")
    p.add_argument("override", nargs="*", help="key=value overrides")
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--n", type=int, help="evaluation examples")
    p.add_argument("--seed", type=int, default=0, help="evaluation stream seed")
    p.set_defaults(fn=_cmd_eval)

    p = sub.add_parser("audit", help="run property suites or validate a dataset")
    p.add_argument("--config", help="unused for property mode; reserved")
    p.add_argument("--dataset", help="JSONL file to validate instead")
    p.add_argument("--n", type=int, default=5000, help="examples per suite")
    p.set_defaults(fn=_cmd_audit)

    p = sub.add_parser("report", help="aggregate run directories into a table")
    p.add_argument("run_dirs", nargs="+")
    p.add_argument("--csv", help="also write CSV here")
    p.set_defaults(fn=_cmd_report)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except (cfgmod.ConfigError, GraphError, ParseError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
