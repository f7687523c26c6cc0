"""Acceptance gate: one test and one pass/fail line per stated guarantee.

Criteria 1 through 6 measure everything live at full scale and carry their
own time budgets.  Criteria 7 through 10 read finished training runs from
``runs/acceptance``; produce those with::

    python3 -m pathstar.experiments

which takes hours of CPU time and resumes cleanly if interrupted.  A
missing or incomplete run fails its criterion here rather than skipping:
the gate reports what has actually been demonstrated.
"""

import math
import time

from pathstar.cli import (
    AuditFailure,
    audit_chc,
    audit_enumeration,
    audit_gradients,
    audit_oracle,
    audit_samplers,
    audit_structural,
    audit_traversals,
)
from pathstar.experiments import (
    baseline_edge_wise,
    causal_wise,
    load_cached,
    reverse_sp,
    span_dropout,
)

_ABB_D2 = 1.0 / 2 + 0.10  # chance plus ten points at two arms


def criterion(num: int, desc: str, ok: bool, detail: str = ""):
    line = f"[criterion {num:2d}] {'PASS' if ok else 'FAIL'} {desc}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    try:
        fn(*args, **kwargs)
        err = None
    except AuditFailure as e:
        err = str(e)
    return err, time.perf_counter() - t0


def records_for(spec, root=None):
    kw = {} if root is None else {"root": root}
    return {s: r for s in spec.seeds if (r := load_cached(spec, s, **kw))}


def sample_bound(spec, budget):
    """First eval boundary at or past the budget.

    Eval points land on whole batches, so a 1M budget at batch 256 and
    100k cadence reports its closing point at 1000960 samples.  The
    overshoot is under one interval and is the point that certifies the
    budget was spent, so "within budget" admits it.
    """
    per = math.ceil(spec.eval_every / spec.batch_size) * spec.batch_size
    return math.ceil(budget / per) * per


def test_criterion_01_structural_invariants_at_scale():
    err, dt = timed(audit_structural, n=100_000, seed=0)
    criterion(
        1,
        "100k examples over D 2..5, M {5,7,9} satisfy every structural "
        "invariant in under a minute",
        err is None and dt < 60,
        err or f"{dt:.1f}s",
    )


def test_criterion_02_order_oracles_and_tree_traversals():
    err1, dt1 = timed(audit_oracle, n=100_000)
    err2, dt2 = timed(audit_traversals, n_trees=10_000, max_nodes=12)
    err = err1 or err2
    dt = dt1 + dt2
    criterion(
        2,
        "100k path solutions across all three edge orders plus 10k tree "
        "traversals validated against exhaustive enumeration in under "
        "two minutes",
        err is None and dt < 120,
        err or f"{dt:.1f}s",
    )


def test_criterion_03_enumeration_matches_closed_form():
    err, dt = timed(audit_enumeration)
    criterion(
        3,
        "exhaustive instance enumeration at D=2, M=2 equals the "
        "closed-form count for 3, 4, and 5 node ids (12/48/120)",
        err is None,
        err or f"{dt:.1f}s",
    )


def test_criterion_04_reference_predictor_profile():
    err, dt = timed(audit_chc, n_graphs=10_000)
    criterion(
        4,
        "single-edge lookup with a uniform leading-node guess: lead "
        "within 2% of 1/D, every later position exact, 10k graphs each "
        "for D 2..5",
        err is None,
        err or f"{dt:.1f}s",
    )


def test_criterion_05_gradients_and_closed_form_weights():
    err, dt = timed(audit_gradients)
    criterion(
        5,
        "rank-loss gradient within 1e-4 of finite differences, full "
        "backward within 1e-3 end to end, smoothing weights exact, "
        "attention rows normalized, under five minutes",
        err is None and dt < 300,
        err or f"{dt:.1f}s",
    )


def test_criterion_06_sampler_statistics():
    err, dt = timed(audit_samplers, n=100_000)
    criterion(
        6,
        "100k-draw statistics: span means within 2% of 1/p, first-span "
        "coin within 1%, branch frequencies within 0.02, path mix "
        "within 1%",
        err is None,
        err or f"{dt:.1f}s",
    )


def test_criterion_07_edge_wise_baseline_never_learns():
    spec = baseline_edge_wise()
    recs = records_for(spec)
    missing = [s for s in spec.seeds if s not in recs]
    if missing:
        criterion(7, "edge-wise baseline stays at chance", False,
                  f"seeds {missing} not trained yet")
    worst_gen = max(
        p["gen"]["arm_seq_acc"] for r in recs.values() for p in r.points
    )
    weakest_tail = min(
        min([p["tf"]["arm_pos_acc"][0]] + p["tf"]["arm_pos_acc"][2:])
        for r in recs.values()
        for p in (r.points[-1],)
    )
    full = all(r.samples_seen >= spec.total_samples for r in recs.values())
    criterion(
        7,
        "edge-wise order, D=2 M=5, 2M samples x 3 seeds: generative "
        "accuracy never beats chance+10 while every non-leading "
        "position ends above 99%",
        full and worst_gen <= _ABB_D2 and weakest_tail >= 0.99,
        f"max gen {worst_gen:.3f}, min tail pos {weakest_tail:.3f}",
    )


def test_criterion_08_causal_wise_becomes_learnable():
    spec = causal_wise()
    recs = records_for(spec)
    best = {
        s: max(p["gen"]["arm_seq_acc"] for p in r.points)
        for s, r in recs.items()
    }
    winners = [s for s, acc in best.items() if acc > 0.95]
    criterion(
        8,
        "causal-wise order, same budget: at least one of three seeds "
        "passes 95% generative sequence accuracy",
        len(winners) >= 1,
        f"trained {sorted(recs)}, best {max(best.values(), default=0):.3f}"
        if recs else "no seeds trained yet",
    )


def test_criterion_09_reverse_scratchpad_solves_quickly():
    spec = reverse_sp()
    recs = records_for(spec)
    bound = sample_bound(spec, 1_000_000)
    perfect = [
        s
        for s, r in recs.items()
        if any(
            p["samples"] <= bound
            and p["gen"]["sp_seq_acc"] == 1.0
            and p["gen"]["arm_seq_acc"] == 1.0
            for p in r.points
        )
    ]
    criterion(
        9,
        "reversed-answer scratchpad, D=5 M=5: at least two of three "
        "seeds reach 100% on both the scratchpad and the answer "
        "within 1M samples",
        len(perfect) >= 2,
        f"perfect seeds {sorted(perfect)} of trained {sorted(recs)}"
        if recs else "no seeds trained yet",
    )


def test_criterion_10_span_dropout_restores_learnability():
    spec = span_dropout()
    recs = records_for(spec)
    bound = sample_bound(spec, 3_000_000)
    winners = [
        s
        for s, r in recs.items()
        if any(
            p["samples"] <= bound and p["gen"]["arm_seq_acc"] > 0.95
            for p in r.points
        )
    ]
    criterion(
        10,
        "span token dropout on the answer, canonical order: at least "
        "one of three seeds passes 95% generative sequence accuracy "
        "within 3M samples",
        len(winners) >= 1,
        f"winning seeds {sorted(winners)} of trained {sorted(recs)}"
        if recs else "no seeds trained yet",
    )
