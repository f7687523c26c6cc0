"""Experiment specification, batch assembly, and the training loop.

Every example is a pure function of (spec, stream coordinates): online
batches derive their rng from [seed, batch_index, slot], evaluation batches
and the offline corpus from their own namespaced coordinates.  Batches can
therefore be rebuilt from a run record alone, and prefetching cannot change
what a run sees.
"""

from __future__ import annotations

import json
import time
from dataclasses import asdict, dataclass, field
from hashlib import sha256
from pathlib import Path

import numpy as np

from . import supervision as sv
from .evaluation import EvalReport, generative_eval, teacher_forced_eval
from .graphs import GraphError, edge_list, sample_path_star, sample_tree_star
from .model import Adam, ModelConfig, Transformer, load_checkpoint, next_token_loss, save_checkpoint
from .tokens import TokenizedExample, Vocabulary, build_query, tokenize

# Namespace sentinels for derived rng streams; far above any batch index.
_EVAL_NS = 10**12 + 1
_CORPUS_NS = 10**12 + 2
_SHUFFLE_NS = 10**12 + 3


class TrainingDiverged(RuntimeError):
    def __init__(self, message: str, diagnostics: dict):
        super().__init__(f"{message}: {json.dumps(diagnostics, default=str)}")
        self.diagnostics = diagnostics


def _as_range(value) -> tuple[int, int]:
    if isinstance(value, int):
        return (value, value)
    lo, hi = int(value[0]), int(value[1])
    if lo > hi or lo < 2:
        raise GraphError(f"bad range {value}")
    return (lo, hi)


@dataclass
class ExperimentSpec:
    """Everything that defines a run, resolvable to flat config keys."""

    name: str = "run"
    d: tuple[int, int] | int = 2
    m: tuple[int, int] | int = 5
    vocab: int = 0  # 0 sizes the universe to the largest graph
    graph_kind: str = "path"  # path | d_ary | split
    tree_path_mix: float = 0.10
    shuffle: str = "edge_wise"
    layout: str = "q_before_g"
    query_mode: str = "standard"
    scratchpad: str = ""
    sp_p_mask: float = 0.5
    sp_p_keep: float = 0.8
    mask_kind: str = ""  # "" | uniform | span
    mask_rate: float = 0.5
    mask_p_mask: float = 0.5
    mask_p_keep: float = 0.8
    mask_noise: str = "dropout"
    mask_scheme: str = "bernoulli"
    aux_kind: str = ""  # "" | bow | ls | ritf
    aux_weight: float = 1.0
    aux_hinge: float = 1.0
    ls_temperature: float = 0.0  # 0 disables the reshaping
    layers: int = 8
    heads: int = 2
    dim: int = 64
    ff_dim: int = 256
    init_std: float = 0.02
    dtype: str = "float32"
    lr: float = 5e-4
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    batch_size: int = 1024
    total_samples: int = 2_000_000
    offline: bool = False
    corpus_size: int = 1_000_000
    epochs: int = 100
    data_seed: int = 7  # identity of the offline corpus, shared across seeds
    eval_every: int = 100_000
    eval_samples: int = 2048
    eval_chunk: int = 2048
    seeds: tuple[int, ...] = (0, 1, 2)
    early_stop_acc: float = 0.0  # stop once generative seq acc strictly exceeds
    prefetch: bool = False

    def d_range(self) -> tuple[int, int]:
        return _as_range(self.d)

    def m_range(self) -> tuple[int, int]:
        return _as_range(self.m)

    def node_universe(self) -> int:
        d_hi, m_hi = self.d_range()[1], self.m_range()[1]
        largest = d_hi * (m_hi - 1) + 1
        if self.vocab == 0:
            return largest
        if self.vocab < largest:
            raise GraphError(f"universe {self.vocab} below graph size {largest}")
        return self.vocab

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(self.node_universe())

    def max_seq_len(self) -> int:
        d_hi, m_hi = self.d_range()[1], self.m_range()[1]
        width = 2 if self.query_mode == "standard" else m_hi
        src = 1 + width + 1 + 3 * d_hi * (m_hi - 1) + 1
        sp = 0
        if self.scratchpad:
            sp = 1 + (2 * d_hi if self.scratchpad.startswith("recon") else m_hi)
        return src + sp + m_hi

    def model_layers(self) -> int:
        # Aux runs grow the stack by one so the head reads a true interior
        # state without shortening the backbone.
        return self.layers + (1 if self.aux_kind else 0)

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            vocab_size=self.vocabulary().total_size,
            max_len=self.max_seq_len(),
            layers=self.model_layers(),
            heads=self.heads,
            dim=self.dim,
            ff_dim=self.ff_dim,
            aux_head=bool(self.aux_kind),
            dtype=self.dtype,
            init_std=self.init_std,
        )

    def validate(self) -> None:
        self.node_universe()
        if self.graph_kind not in ("path", "d_ary", "split"):
            raise GraphError(f"unknown graph kind {self.graph_kind!r}")
        if self.graph_kind != "path":
            if self.shuffle != "edge_wise":
                raise GraphError("tree training presents edges edge_wise only")
            if self.scratchpad or self.aux_kind:
                raise GraphError("tree training composes with neither "
                                 "scratchpads nor auxiliary heads")
            if self.query_mode != "standard":
                raise GraphError("tree training uses the standard query")
        if self.scratchpad and self.scratchpad not in sv.SCRATCHPAD_VARIANTS:
            raise GraphError(f"unknown scratchpad {self.scratchpad!r}")
        if self.aux_kind and self.aux_kind not in sv.AUX_KINDS:
            raise GraphError(f"unknown aux kind {self.aux_kind!r}")
        if self.scratchpad and self.aux_kind:
            raise GraphError("pick a scratchpad or an aux head, not both")
        if self.aux_kind and self.m_range()[0] != self.m_range()[1]:
            raise GraphError("aux heads need a fixed answer length")
        if self.mask_kind not in ("", "uniform", "span"):
            raise GraphError(f"unknown mask kind {self.mask_kind!r}")
        if self.mask_noise not in sv.NOISE_KINDS:
            raise GraphError(f"unknown mask noise {self.mask_noise!r}")
        if not 0.0 <= self.tree_path_mix <= 1.0:
            raise GraphError("tree_path_mix outside [0, 1]")
        self.model_config()

    def digest(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, default=list)
        return sha256(blob.encode()).hexdigest()[:16]


@dataclass
class TrainExample:
    tok: TokenizedExample
    target_plan: sv.MaskPlan | None
    dense_rows: list  # (target_offset, tokens, weights)
    d: int
    m: int
    kind: str


def build_example(
    spec: ExperimentSpec, rng: np.random.Generator, eval_time: bool = False
) -> TrainExample:
    """Sample one task instance plus its supervision shaping."""
    vocab = spec.vocabulary()
    universe = spec.node_universe()
    d_lo, d_hi = spec.d_range()
    m_lo, m_hi = spec.m_range()
    d = d_lo if d_lo == d_hi else int(rng.integers(d_lo, d_hi + 1))
    m = m_lo if m_lo == m_hi else int(rng.integers(m_lo, m_hi + 1))
    kind = spec.graph_kind
    if kind != "path" and eval_time:
        kind = "path"  # trained on trees, tested on the plain task
    elif kind != "path" and rng.random() < spec.tree_path_mix:
        kind = "path"
    dense_rows: list = []
    if kind == "path":
        graph = sample_path_star(d, m, universe, rng)
        shuffle = spec.shuffle
    else:
        graph = sample_tree_star(d, m, universe, kind, rng)
        shuffle = "edge_wise"
    edges = edge_list(graph, shuffle, rng)
    query = build_query(graph, spec.query_mode, rng, eval_time=eval_time)
    sp_plan = None
    if spec.scratchpad:
        sp_plan = sv.build_scratchpad(
            graph, spec.scratchpad, rng, spec.sp_p_mask, spec.sp_p_keep
        )
    tok = tokenize(
        graph,
        edges,
        query,
        vocab,
        scratchpad=None if sp_plan is None else sp_plan.tokens,
        layout=spec.layout,
    )
    sp_total = tok.sp_total
    if kind != "path":
        tree_targets = sv.build_tree_targets(graph)
        for j, weighted in enumerate(tree_targets.step_targets):
            if len(weighted) > 1:
                toks = tuple(t for t, _ in weighted)
                ws = tuple(w for _, w in weighted)
                dense_rows.append((sp_total + j + 1, toks, ws))
    if sp_plan is not None and sp_plan.step_targets is not None:
        for p, weighted in enumerate(sp_plan.step_targets):
            if len(weighted) > 1:
                toks = tuple(t for t, _ in weighted)
                ws = tuple(w for _, w in weighted)
                dense_rows.append((1 + p, toks, ws))
    plan = None
    if not eval_time:
        parts = []
        if sp_total:
            parts.append(sv.keep_plan(1))  # '#'
            parts.append(
                sp_plan.mask_plan
                if sp_plan.mask_plan is not None
                else sv.keep_plan(len(sp_plan.tokens))
            )
        if spec.mask_kind == "uniform":
            parts.append(
                sv.sample_uniform_mask(
                    len(tok.arm), spec.mask_rate, rng,
                    noise=spec.mask_noise, scheme=spec.mask_scheme,
                    vocab_size=universe, keep_first=True,
                )
            )
        elif spec.mask_kind == "span":
            parts.append(
                sv.sample_span_plan(
                    len(tok.arm), spec.mask_p_mask, spec.mask_p_keep, rng,
                    noise=spec.mask_noise, vocab_size=universe, keep_first=True,
                )
            )
        else:
            parts.append(sv.keep_plan(len(tok.arm)))
        actions = tuple(a for p_ in parts for a in p_.actions)
        if any(a != sv.KEEP for a in actions):
            repl = tuple(r for p_ in parts for r in p_.replacements)
            plan = sv.MaskPlan(actions, repl)
    return TrainExample(tok, plan, dense_rows, d, m, kind)


@dataclass
class Batch:
    examples: list
    full_ids: np.ndarray
    model_input: np.ndarray
    labels: np.ndarray
    loss_mask: np.ndarray
    src_lens: np.ndarray
    sp_totals: np.ndarray
    arm_lens: np.ndarray
    arms: np.ndarray
    arm_label_pos: np.ndarray
    dense_rows: list
    sp_variant: str
    meta: dict = field(default_factory=dict)


def _assemble(examples: list[TrainExample], vocab: Vocabulary, spec) -> Batch:
    toks = [e.tok for e in examples]
    B = len(toks)
    lens = [len(t.source_ids) + len(t.target_ids) for t in toks]
    T = max(lens)
    m_width = max(len(t.arm) for t in toks)
    full = np.zeros((B, T), dtype=np.int64)
    noised = np.zeros((B, T), dtype=np.int64)
    loss_mask = np.zeros((B, T - 1), dtype=bool)
    src_lens = np.zeros(B, dtype=np.int64)
    sp_totals = np.zeros(B, dtype=np.int64)
    arm_lens = np.zeros(B, dtype=np.int64)
    arms = np.zeros((B, m_width), dtype=np.int64)
    dense_rows = []
    for b, ex in enumerate(examples):
        t = ex.tok
        seq = t.full_ids()
        full[b, : len(seq)] = seq
        target = t.target_ids
        if ex.target_plan is not None:
            target = sv.apply_mask_plan(target, ex.target_plan, vocab)
        noised[b, : len(seq)] = t.source_ids + target
        src = len(t.source_ids)
        src_lens[b] = src
        sp_totals[b] = t.sp_total
        arm_lens[b] = len(t.arm)
        arms[b, : len(t.arm)] = t.arm
        first = 1 if t.sp_total else 0  # '#' is forced input, never a label
        for k in range(first, len(t.target_ids)):
            loss_mask[b, src + k - 1] = True
        for offset, toks_, ws in ex.dense_rows:
            dense_rows.append((b, src + offset - 1, toks_, ws))
    arm_label_pos = np.clip(
        src_lens[:, None] + sp_totals[:, None] + np.arange(m_width)[None, :] - 1,
        0,
        T - 2,
    )
    return Batch(
        examples=toks,
        full_ids=full,
        model_input=noised[:, :-1],
        labels=full[:, 1:],
        loss_mask=loss_mask,
        src_lens=src_lens,
        sp_totals=sp_totals,
        arm_lens=arm_lens,
        arms=arms,
        arm_label_pos=arm_label_pos,
        dense_rows=dense_rows,
        sp_variant=spec.scratchpad,
    )


def make_batch(
    spec: ExperimentSpec,
    batch_index: int,
    seed: int,
    size: int | None = None,
    eval_time: bool = False,
    corpus_indices=None,
) -> Batch:
    """Assemble one batch from its deterministic stream coordinates."""
    size = spec.batch_size if size is None else size
    examples = []
    if corpus_indices is not None:
        for idx in corpus_indices:
            rng = np.random.default_rng([spec.data_seed, _CORPUS_NS, int(idx)])
            examples.append(build_example(spec, rng))
    else:
        ns = (_EVAL_NS,) if eval_time else ()
        for slot in range(size):
            rng = np.random.default_rng([seed, *ns, batch_index, slot])
            examples.append(build_example(spec, rng, eval_time=eval_time))
    return _assemble(examples, spec.vocabulary(), spec)


def _dense_targets(batch: Batch, total_vocab: int, dtype) -> np.ndarray | None:
    if not batch.dense_rows:
        return None
    B, L = batch.labels.shape
    dense = np.zeros((B, L, total_vocab), dtype=dtype)
    rows = np.arange(B)[:, None]
    cols = np.arange(L)[None, :]
    dense[rows, cols, batch.labels] = 1.0
    for b, pos, toks, ws in batch.dense_rows:
        dense[b, pos, :] = 0.0
        dense[b, pos, list(toks)] = ws
    return dense


def _aux_dense(spec: ExperimentSpec, arms: np.ndarray, total_vocab: int, dtype):
    """Per-step target distributions for the bow / ls auxiliary heads."""
    B, M = arms.shape
    out = np.zeros((B, M, total_vocab), dtype=dtype)
    rows = np.arange(B)[:, None]
    temp = spec.ls_temperature or None
    for i in range(M):
        fut = arms[:, i:]
        if spec.aux_kind == "bow":
            w = np.full(M - i, 1.0 / (M - i))
        else:
            w = np.asarray(sv.ls_weights(M - i, temp))
        out[rows, i, fut] = w
    return out


def train_step(model: Transformer, opt: Adam, batch: Batch, spec: ExperimentSpec):
    """One optimization step; returns scalar metrics."""
    trace = model.forward(batch.model_input)
    dt = trace.logits.dtype
    dense = _dense_targets(batch, model.config.vocab_size, dt)
    loss, dlogits = next_token_loss(
        trace.logits, batch.labels, batch.loss_mask, dense_targets=dense
    )
    aux_loss = 0.0
    daux = None
    if spec.aux_kind:
        B = len(batch.examples)
        pos = batch.arm_label_pos
        rows = np.take_along_axis(
            trace.aux_scores, pos[:, :, None], axis=1
        )
        if spec.aux_kind == "ritf":
            raw, g_rows = sv.ritf_loss_batch(
                rows, batch.arms, spec.node_universe(), spec.aux_hinge
            )
            aux_loss = raw / B
            g_rows = g_rows * (spec.aux_weight / B)
        else:
            targets = _aux_dense(spec, batch.arms, model.config.vocab_size, dt)
            step_mask = np.ones(pos.shape, dtype=bool)
            aux_loss, g_rows = next_token_loss(rows, None, step_mask, targets)
            g_rows = g_rows * spec.aux_weight
        daux = np.zeros_like(trace.aux_scores)
        np.put_along_axis(daux, pos[:, :, None], g_rows, axis=1)
    grads = model.backward(trace, dlogits, daux)
    total = loss + spec.aux_weight * aux_loss
    if not np.isfinite(total):
        raise TrainingDiverged(
            "non-finite loss",
            {
                "loss": loss,
                "aux_loss": aux_loss,
                "step": opt.t,
                "max_abs_logit": float(np.abs(trace.logits).max()),
                "max_abs_param": max(
                    float(np.abs(v).max()) for v in model.params.values()
                ),
            },
        )
    opt.step(model.params, grads)
    return {"loss": float(loss), "aux_loss": float(aux_loss)}


@dataclass
class RunRecord:
    """Everything an evaluation or report needs to know about one seed."""

    name: str
    seed: int
    spec_digest: str
    points: list = field(default_factory=list)
    wall_seconds: float = 0.0
    samples_seen: int = 0
    converged_samples: int | None = None
    completed: bool = False
    spec: dict | None = None  # resolved settings, so run dirs are self-describing

    @property
    def final(self) -> dict:
        return self.points[-1] if self.points else {}

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=1)

    @classmethod
    def from_json(cls, blob: str) -> "RunRecord":
        return cls(**json.loads(blob))


def evaluate_model(model: Transformer, spec: ExperimentSpec, seed: int, round_: int):
    """Fresh held-out evaluation; returns (tf_report, gen_report)."""
    remaining = spec.eval_samples
    chunks = []
    index = 0
    while remaining > 0:
        size = min(spec.eval_chunk, remaining)
        batch = make_batch(
            spec, round_ * 10000 + index, seed, size=size, eval_time=True
        )
        chunks.append(
            (teacher_forced_eval(model, batch), generative_eval(model, batch), batch)
        )
        remaining -= size
        index += 1
    return _merge(chunks, 0), _merge(chunks, 1)


def _merge(chunks, which) -> EvalReport:
    if len(chunks) == 1:
        return chunks[0][which]
    n = sum(len(c[2].examples) for c in chunks)
    width = max(len(c[which].arm_pos_acc) for c in chunks)
    pos_num = np.zeros(width)
    pos_den = np.zeros(width)
    seq = joint = 0.0
    sp_any = any(c[which].sp_seq_acc is not None for c in chunks)
    sp_width = max((len(c[which].sp_pos_acc or ()) for c in chunks), default=0)
    sp_num = np.zeros(sp_width)
    sp_den = np.zeros(sp_width)
    sp_seq = 0.0
    membership = False
    for rep, batch in ((c[which], c[2]) for c in chunks):
        counts = (
            np.arange(width)[None, :] < batch.arm_lens[:, None]
        ).sum(axis=0)
        accs = np.array(
            list(rep.arm_pos_acc) + [0.0] * (width - len(rep.arm_pos_acc))
        )
        good = counts > 0
        pos_num[good] += np.nan_to_num(accs[good]) * counts[good]
        pos_den[good] += counts[good]
        seq += rep.arm_seq_acc * rep.n
        joint += rep.seq_acc * rep.n
        if rep.sp_seq_acc is not None:
            sp_seq += rep.sp_seq_acc * rep.n
            membership |= rep.sp_membership
        if rep.sp_pos_acc is not None and sp_width:
            # sp_totals counts the separator too; positions exclude it
            sp_counts = (
                np.arange(sp_width)[None, :] < (batch.sp_totals[:, None] - 1)
            ).sum(axis=0)
            sp_accs = np.array(
                list(rep.sp_pos_acc) + [0.0] * (sp_width - len(rep.sp_pos_acc))
            )
            sp_good = sp_counts > 0
            sp_num[sp_good] += np.nan_to_num(sp_accs[sp_good]) * sp_counts[sp_good]
            sp_den[sp_good] += sp_counts[sp_good]
    pos = tuple(
        float(a / b) if b else float("nan") for a, b in zip(pos_num, pos_den)
    )
    return EvalReport(
        mode=chunks[0][which].mode,
        n=n,
        arm_pos_acc=pos,
        arm_seq_acc=seq / n,
        sp_pos_acc=tuple(
            float(a / b) if b else float("nan")
            for a, b in zip(sp_num, sp_den)
        )
        if sp_any and sp_width
        else None,
        sp_seq_acc=(sp_seq / n) if sp_any else None,
        sp_membership=membership,
        extras={"joint_seq_acc": joint / n},
    )


def _offline_order(spec: ExperimentSpec, seed: int, epoch: int) -> np.ndarray:
    rng = np.random.default_rng([seed, _SHUFFLE_NS, epoch])
    return rng.permutation(spec.corpus_size)


def run_seed(
    spec: ExperimentSpec,
    seed: int,
    out_dir: str | Path | None = None,
    log=None,
    resume: bool = False,
    session_budget: int | None = None,
) -> RunRecord:
    """Train one seed to its sample budget (or early stop) and record it.

    With resume=True and a matching checkpoint pair in out_dir, training
    restarts from the saved state and reproduces the uninterrupted metric
    curve exactly: batches, eval batches, and init are all keyed by counters
    that the checkpoint preserves.  session_budget bounds the samples taken
    in this call without marking the record complete, so long runs can be
    split across sessions.
    """
    spec.validate()
    record = RunRecord(
        name=spec.name, seed=seed, spec_digest=spec.digest(), spec=asdict(spec)
    )
    model = Transformer(spec.model_config(), seed=seed)
    opt = Adam(
        model.params,
        lr=spec.lr,
        betas=(spec.beta1, spec.beta2),
        eps=spec.adam_eps,
    )
    out = Path(out_dir) if out_dir else None
    if out:
        out.mkdir(parents=True, exist_ok=True)
    seen = 0
    if resume and out:
        ckpt = out / f"seed{seed}.npz"
        rec_path = out / f"seed{seed}.json"
        if ckpt.exists() and rec_path.exists():
            stored = RunRecord.from_json(rec_path.read_text())
            if stored.spec_digest != spec.digest():
                raise ValueError(
                    f"checkpoint in {out} was written under different settings"
                )
            if stored.completed:
                return stored
            model, opt, extra = load_checkpoint(ckpt)
            record = stored
            record.spec = asdict(spec)
            seen = int(extra["samples"])
    t0 = time.time()
    wall_base = record.wall_seconds
    session_start = seen
    next_eval = (seen // spec.eval_every + 1) * spec.eval_every
    budget = (
        spec.corpus_size * spec.epochs if spec.offline else spec.total_samples
    )

    def batches():
        if spec.offline:
            first_epoch, offset = divmod(seen, spec.corpus_size)
            for epoch in range(first_epoch, spec.epochs):
                order = _offline_order(spec, seed, epoch)
                for lo in range(offset, spec.corpus_size, spec.batch_size):
                    yield make_batch(
                        spec, 0, seed,
                        corpus_indices=order[lo : lo + spec.batch_size],
                    )
                offset = 0
        else:
            index = seen // spec.batch_size
            while True:
                yield make_batch(spec, index, seed)
                index += 1

    source = batches()
    if spec.prefetch:
        source = _prefetched(source)
    stop = False
    last_metrics = {}
    for batch in source:
        last_metrics = train_step(model, opt, batch, spec)
        seen += len(batch.examples)
        if seen >= next_eval or seen >= budget:
            tf, gen = evaluate_model(model, spec, seed, round_=len(record.points))
            point = {
                "samples": seen,
                "loss": last_metrics["loss"],
                "aux_loss": last_metrics["aux_loss"],
                "tf": tf.to_dict(),
                "gen": gen.to_dict(),
            }
            record.points.append(point)
            record.samples_seen = seen
            record.wall_seconds = wall_base + (time.time() - t0)
            if log:
                log(
                    f"[{spec.name} seed {seed}] {seen} samples "
                    f"loss {last_metrics['loss']:.4f} "
                    f"tf_seq {tf.seq_acc:.3f} gen_seq {gen.seq_acc:.3f}"
                )
            if out:
                save_checkpoint(
                    out / f"seed{seed}.npz",
                    model,
                    opt,
                    extra={
                        "spec": asdict(spec),
                        "seed": seed,
                        "samples": seen,
                        "next_batch_index": seen // spec.batch_size,
                    },
                )
                (out / f"seed{seed}.json").write_text(record.to_json())
            if (
                spec.early_stop_acc
                and gen.seq_acc > spec.early_stop_acc
                and record.converged_samples is None
            ):
                record.converged_samples = seen
                stop = True
            while next_eval <= seen:
                next_eval += spec.eval_every
        if session_budget is not None and seen - session_start >= session_budget:
            # paused, not finished: the record stays incomplete on disk
            record.wall_seconds = wall_base + (time.time() - t0)
            return record
        if stop or seen >= budget:
            break
    record.wall_seconds = wall_base + (time.time() - t0)
    record.completed = True
    if out:
        (out / f"seed{seed}.json").write_text(record.to_json())
    return record


def _prefetched(gen):
    """Build the next batch on a worker thread while the current one trains."""
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=1) as pool:
        fut = pool.submit(next, gen, None)
        while True:
            batch = fut.result()
            if batch is None:
                return
            fut = pool.submit(next, gen, None)
            yield batch


def run_experiment(
    spec: ExperimentSpec,
    out_dir: str | Path | None = None,
    seeds=None,
    log=None,
) -> list[RunRecord]:
    """Train every seed sequentially; returns one record per seed."""
    return [
        run_seed(spec, seed, out_dir=out_dir, log=log)
        for seed in (seeds if seeds is not None else spec.seeds)
    ]
