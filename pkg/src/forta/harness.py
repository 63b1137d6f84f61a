"""Federated round loop on a desk-scale softmax-regression task.

One round: broadcast, local mini-batch gradients, attack transformations,
analog sharing and pairwise-difference exchange, first-pass reconstruction,
joint localization, optional hinted second pass, Krum-family selection,
secure aggregation of the selected set, and the global step.  FedAvg skips
the secure pipeline entirely and averages raw updates.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field, replace

import numpy as np

from . import adversary, analog_sharing, joint_localizer, robust_select
from .adversary import AttackSpec
from .analog_sharing import SharingParams
from .dft_codec import CodecParams
from .errors import (
    DecodeUnreliable,
    IngestionError,
    InvalidConfiguration,
    ProtocolViolation,
)


@dataclass
class GlobalModel:
    w: np.ndarray
    round: int = 0


@dataclass
class UserState:
    id: int
    x: np.ndarray
    y: np.ndarray
    role: str = "honest"  # honest | byzantine


@dataclass(frozen=True)
class TrainingConfig:
    n_users: int = 30
    collusion: int = 9
    byzantine_bound: int = 10
    select_m: int = 8
    rounds: int = 50
    learning_rate: float = 0.5
    batch_size: int = 32
    # ridge penalty on the local objective; besides regularizing, it gives
    # the loss curvature at the optimum, so update-scaling attacks push the
    # effective aggregate step past the stable range instead of only
    # inflating a vanishing gradient
    weight_decay: float = 1.2
    rule: str = "modified_krum"
    aggregation: str = "mean"  # mean | sum
    # synthetic task
    features: int = 16
    classes: int = 4
    # small feature scale keeps the loss curvature low, so the honest step
    # is well inside the stable range while a 10x update-scaling attack
    # pushes the effective aggregate step outside it
    cluster_spread: float = 0.25
    center_scale: float = 0.5
    samples_per_user: int = 200
    test_samples: int = 2000
    csv_path: str = None
    # protocol numerics
    privacy_sigma: float = 1.0
    injected_precision_sigma: float = 0.0
    rank_tolerance: float = 1e-4
    noise_floor: float = 1e-9
    evidence_floor: float = 1e-12
    temperature: float = 0.1
    hint_floor: float = 0.05
    attack: AttackSpec = field(default_factory=AttackSpec)
    local_epochs: int = 1
    seed: int = 0

    def __post_init__(self):
        n, a, t = self.n_users, self.byzantine_bound, self.collusion
        if 2 * a + 2 >= n:
            raise InvalidConfiguration(f"need 2A + 2 < N, got N={n}, A={a}")
        if n < 2 * a + t + 1:
            raise InvalidConfiguration(
                f"need N >= 2A + T + 1 so the code can correct A corruptors (N={n}, A={a}, T={t})")
        if not 1 <= self.select_m <= n - a:
            raise InvalidConfiguration(f"need 1 <= m <= N - A, got m={self.select_m}")
        if self.rule not in robust_select.RULES:
            raise InvalidConfiguration(f"unknown rule {self.rule!r}")
        if self.aggregation not in ("mean", "sum"):
            raise InvalidConfiguration("aggregation must be 'mean' or 'sum'")
        if self.rounds < 0 or self.batch_size < 1 or self.learning_rate <= 0:
            raise InvalidConfiguration("bad rounds/batch_size/learning_rate")
        if self.weight_decay < 0:
            raise InvalidConfiguration("weight_decay must be nonnegative")
        adversary.validate_threat(self.attack, a, t)

    @property
    def dim(self) -> int:
        return self.classes * (self.features + 1)

    def codec(self) -> CodecParams:
        return CodecParams(self.n_users, self.collusion + 1,
                           rank_tolerance=self.rank_tolerance,
                           noise_floor=self.noise_floor,
                           evidence_floor=self.evidence_floor)

    def sharing(self, round_idx: int = 0) -> SharingParams:
        return SharingParams(self.n_users, self.collusion,
                             privacy_sigma=self.privacy_sigma,
                             injected_precision_sigma=self.injected_precision_sigma,
                             rng_seed=self.seed * 1_000_003 + round_idx)


@dataclass
class RoundRecord:
    round: int
    rule: str
    accuracy: float
    loss: float
    selected: tuple
    scores: np.ndarray
    lam: np.ndarray
    mod_scores: np.ndarray
    decode_failures: int
    profile_counts: np.ndarray
    aborted: bool = False


@dataclass
class RunLog:
    config: TrainingConfig
    records: list
    wall_clock: float = 0.0


# --- task construction ------------------------------------------------------

@dataclass
class Task:
    users: list
    x_test: np.ndarray
    y_test: np.ndarray


def make_blob_task(cfg: TrainingConfig, rng: np.random.Generator) -> Task:
    """Gaussian-blob classification with i.i.d. per-user splits."""
    centers = rng.normal(scale=cfg.center_scale, size=(cfg.classes, cfg.features))

    def draw(count):
        labels = rng.integers(cfg.classes, size=count)
        x = centers[labels] + rng.normal(scale=cfg.cluster_spread,
                                         size=(count, cfg.features))
        return x, labels

    users = []
    for uid in range(1, cfg.n_users + 1):
        x, y = draw(cfg.samples_per_user)
        users.append(UserState(id=uid, x=x, y=y))
    x_test, y_test = draw(cfg.test_samples)
    return Task(users=users, x_test=x_test, y_test=y_test)


def load_csv_task(path, cfg: TrainingConfig, rng: np.random.Generator) -> Task:
    """CSV ingestion: header row, a 'label' column, numeric feature columns.

    Features are standardized with training-split statistics; rows are dealt
    i.i.d. to users after a seeded shuffle, with cfg.test_samples held out.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise IngestionError(f"{path}: empty file")
        if "label" not in header:
            raise IngestionError(f"{path}: line 1: no 'label' column in header")
        label_col = header.index("label")
        rows, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise IngestionError(f"{path}: line {lineno}: expected {len(header)} fields")
            try:
                labels.append(int(float(row[label_col])))
                rows.append([float(v) for i, v in enumerate(row) if i != label_col])
            except ValueError as exc:
                raise IngestionError(f"{path}: line {lineno}: {exc}")
    x = np.asarray(rows, dtype=float)
    y = np.asarray(labels, dtype=int)
    classes = int(y.max()) + 1
    if classes != cfg.classes or x.shape[1] != cfg.features:
        raise IngestionError(
            f"{path}: found {classes} classes / {x.shape[1]} features, "
            f"config says {cfg.classes} / {cfg.features}")
    perm = rng.permutation(len(x))
    x, y = x[perm], y[perm]
    n_test = min(cfg.test_samples, len(x) // 5)
    need = cfg.n_users * cfg.samples_per_user
    if len(x) - n_test < cfg.n_users:
        raise IngestionError(f"{path}: not enough rows for {cfg.n_users} users")
    x_test, y_test = x[:n_test], y[:n_test]
    x_tr, y_tr = x[n_test:], y[n_test:]
    mu, sd = x_tr.mean(axis=0), x_tr.std(axis=0)
    sd[sd == 0] = 1.0
    x_tr = (x_tr - mu) / sd
    x_test = (x_test - mu) / sd
    per_user = min(cfg.samples_per_user, len(x_tr) // cfg.n_users)
    users = []
    for uid in range(1, cfg.n_users + 1):
        sl = slice((uid - 1) * per_user, uid * per_user)
        users.append(UserState(id=uid, x=x_tr[sl], y=y_tr[sl]))
    return Task(users=users, x_test=x_test, y_test=y_test)


# --- model ------------------------------------------------------------------

def _with_bias(x: np.ndarray) -> np.ndarray:
    return np.hstack([x, np.ones((x.shape[0], 1))])


def _softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _unflatten(w: np.ndarray, classes: int, features: int) -> np.ndarray:
    return w.reshape(classes, features + 1)


def cross_entropy_loss(w, x, y, classes: int) -> float:
    xb = _with_bias(x)
    p = _softmax(xb @ _unflatten(w, classes, x.shape[1]).T)
    return float(-np.mean(np.log(np.maximum(p[np.arange(len(y)), y], 1e-300))))


def gradient(w, x, y, classes: int, weight_decay: float = 0.0) -> np.ndarray:
    """Exact gradient of the ridge-penalized mean cross-entropy over (x, y)."""
    xb = _with_bias(x)
    p = _softmax(xb @ _unflatten(w, classes, x.shape[1]).T)
    p[np.arange(len(y)), y] -= 1.0
    return (p.T @ xb / len(y)).ravel() + weight_decay * w


def local_update(model: GlobalModel, user: UserState, batch_size: int,
                 classes: int, rng: np.random.Generator,
                 epochs: int = 1, weight_decay: float = 0.0) -> np.ndarray:
    """Mini-batch gradient estimate at the broadcast model.

    With epochs == 1 this is a single unbiased stochastic gradient; larger
    epoch counts return the averaged multi-step displacement / learning-rate
    surrogate and are an extension, not part of the core round contract.
    """
    if len(user.y) == 0:
        raise InvalidConfiguration(f"user {user.id} has no data")
    batch_size = min(batch_size, len(user.y))
    if epochs <= 1:
        idx = rng.choice(len(user.y), size=batch_size, replace=False)
        return gradient(model.w, user.x[idx], user.y[idx], classes, weight_decay)
    w = model.w.copy()
    steps = 0
    total = np.zeros_like(w)
    for _ in range(epochs):
        idx = rng.choice(len(user.y), size=batch_size, replace=False)
        g = gradient(w, user.x[idx], user.y[idx], classes, weight_decay)
        total += g
        steps += 1
    return total / steps


def evaluate(w: np.ndarray, x_test: np.ndarray, y_test: np.ndarray,
             classes: int) -> float:
    """Fraction of argmax-correct test predictions."""
    if len(y_test) == 0:
        raise InvalidConfiguration("test set is empty")
    xb = _with_bias(x_test)
    pred = np.argmax(xb @ _unflatten(w, classes, x_test.shape[1]).T, axis=1)
    return float(np.mean(pred == y_test))


# --- round loop -------------------------------------------------------------

def _pair_list(n: int) -> list:
    return [(j, k) for j in range(1, n + 1) for k in range(j + 1, n + 1)]


def _secure_distances(updates, cfg: TrainingConfig, codec, round_idx, rule):
    """Sharing, exchange, reconstruction and localization for one round.

    Returns (diff_vectors, profile, lam, hints, decode_failures).
    """
    n = cfg.n_users
    spec = cfg.attack
    sharing = cfg.sharing(round_idx)
    plan = None
    if spec.kind in ("precision_mimic", "combined") and spec.byzantine_set:
        plan = adversary.plan_precision_mimic(spec, codec, len(updates[0]))

    all_shares = {owner: analog_sharing.make_shares(updates[owner - 1], sharing, owner)
                  for owner in range(1, n + 1)}
    per_pair = {pair: [] for pair in _pair_list(n)}
    for holder in range(1, n + 1):
        held = [all_shares[owner][holder - 1] for owner in range(1, n + 1)]
        msgs = analog_sharing.difference_messages(held, n)
        msgs = adversary.corrupt_messages(msgs, spec, round_idx=round_idx)
        msgs = adversary.precision_mimic(msgs, spec, codec, plan=plan)
        for msg in msgs:
            per_pair[msg.pair].append(msg)

    first_pass = {}
    for pair, msgs in per_pair.items():
        words = analog_sharing.assemble_codewords(msgs, n)
        first_pass[pair] = analog_sharing.reconstruct(words, codec)

    evidence = joint_localizer.ErrorEvidence.from_reports(
        (pair, rep) for pair, rep in first_pass.items())
    profile, hints, _ = joint_localizer.localize(
        evidence, n, budget=cfg.byzantine_bound, hint_floor=cfg.hint_floor)
    lam = robust_select.soft_confidences(profile, cfg.temperature).lam

    failures = sum(rep.decode_failures for rep in first_pass.values())
    if rule == "modified_krum" and hints:
        diffs = {}
        for pair, msgs in per_pair.items():
            words = analog_sharing.assemble_codewords(msgs, n)
            rep = analog_sharing.reconstruct(words, codec, hints=hints)
            diffs[pair] = rep.secret
            failures += rep.decode_failures
    else:
        diffs = {pair: rep.secret for pair, rep in first_pass.items()}
    return diffs, profile, lam, hints, failures, all_shares


def _secure_aggregate(all_shares, selected, cfg: TrainingConfig, codec,
                      hints, round_idx):
    """Sum-of-shares aggregation of the selected set, decoded at the server."""
    n = cfg.n_users
    spec = cfg.attack
    agg_msgs = np.zeros((n, cfg.dim), dtype=complex)
    for holder in range(1, n + 1):
        held = [all_shares[owner][holder - 1] for owner in range(1, n + 1)]
        vec = analog_sharing.aggregation_message(held, selected, n)
        if (spec.is_byzantine(holder) and spec.kind in ("share_corrupt", "combined")
                and spec.magnitude > 0):
            rng = np.random.default_rng([spec.rng_seed, round_idx, holder, 99])
            vec = vec + (rng.normal(size=cfg.dim) + 1j * rng.normal(size=cfg.dim)) \
                * (spec.magnitude / np.sqrt(2))
        agg_msgs[holder - 1] = vec
    words = agg_msgs.T  # (d, n): coordinate l across holders
    report = analog_sharing.reconstruct(words, codec, hints=hints)
    if report.decode_failures:
        raise DecodeUnreliable(report, "aggregate reconstruction unreliable")
    return report.secret


def run_round(model: GlobalModel, task: Task, cfg: TrainingConfig,
              rule: str = None):
    """Execute one full round; returns (new model, RoundRecord).

    Aborted rounds (protocol violation or unreliable aggregate decode) leave
    the model unchanged.
    """
    rule = rule or cfg.rule
    n = cfg.n_users
    codec = cfg.codec()
    round_idx = model.round
    spec = cfg.attack
    plan = None
    if spec.kind in ("precision_mimic", "combined") and spec.byzantine_set:
        plan = adversary.plan_precision_mimic(spec, codec, cfg.dim)

    updates = []
    for user in task.users:
        rng = np.random.default_rng([cfg.seed, 101, round_idx, user.id])
        upd = local_update(model, user, cfg.batch_size, cfg.classes, rng,
                           epochs=cfg.local_epochs,
                           weight_decay=cfg.weight_decay)
        updates.append(adversary.poison_update(upd, spec, user.id, plan=plan))

    loss = float(np.mean([cross_entropy_loss(model.w, u.x, u.y, cfg.classes)
                          for u in task.users]))
    zeros = np.zeros(n)
    if rule == "fedavg":
        selected = robust_select.select(zeros, n, rule="fedavg")
        agg = np.mean(updates, axis=0) if cfg.aggregation == "mean" \
            else np.sum(updates, axis=0)
        new_w = model.w - cfg.learning_rate * agg
        record = RoundRecord(round=round_idx, rule=rule,
                             accuracy=evaluate(new_w, task.x_test, task.y_test, cfg.classes),
                             loss=loss, selected=selected.users, scores=zeros,
                             lam=np.full(n, 1.0 / n), mod_scores=zeros,
                             decode_failures=0, profile_counts=np.zeros(n, dtype=int))
        return GlobalModel(w=new_w, round=round_idx + 1), record

    try:
        diffs, profile, lam, hints, failures, all_shares = _secure_distances(
            updates, cfg, codec, round_idx, rule)
        dist = robust_select.distances(diffs, n)
        table = robust_select.krum_scores(dist, cfg.byzantine_bound)
        if rule == "modified_krum":
            conf = robust_select.ConfidenceVector(lam=lam, temperature=cfg.temperature)
            mod = robust_select.modified_scores(table, conf, n, cfg.byzantine_bound)
            selected = robust_select.select(mod, cfg.select_m, rule=rule)
        else:
            mod = table.scores
            selected = robust_select.select(table.scores, cfg.select_m, rule=rule)
        agg = _secure_aggregate(all_shares, selected, cfg, codec,
                                hints if rule == "modified_krum" else None, round_idx)
    except (ProtocolViolation, DecodeUnreliable):
        record = RoundRecord(round=round_idx, rule=rule,
                             accuracy=evaluate(model.w, task.x_test, task.y_test, cfg.classes),
                             loss=loss, selected=(), scores=zeros, lam=np.full(n, 1.0 / n),
                             mod_scores=zeros, decode_failures=-1,
                             profile_counts=np.zeros(n, dtype=int), aborted=True)
        return GlobalModel(w=model.w, round=round_idx + 1), record

    if cfg.aggregation == "mean":
        agg = agg / len(selected.users)
    new_w = model.w - cfg.learning_rate * agg
    record = RoundRecord(round=round_idx, rule=rule,
                         accuracy=evaluate(new_w, task.x_test, task.y_test, cfg.classes),
                         loss=loss, selected=selected.users, scores=table.scores,
                         lam=lam, mod_scores=mod, decode_failures=failures,
                         profile_counts=profile.counts)
    return GlobalModel(w=new_w, round=round_idx + 1), record


def run_experiment(cfg: TrainingConfig, rule: str = None) -> RunLog:
    """Seeded end-to-end run over the configured round budget."""
    rule = rule or cfg.rule
    start = time.perf_counter()
    rng = np.random.default_rng([cfg.seed, 1])
    task = load_csv_task(cfg.csv_path, cfg, rng) if cfg.csv_path \
        else make_blob_task(cfg, rng)
    for user in task.users:
        if cfg.attack.is_byzantine(user.id):
            user.role = "byzantine"
    model = GlobalModel(w=np.zeros(cfg.dim))
    records = []
    for _ in range(cfg.rounds):
        model, record = run_round(model, task, cfg, rule=rule)
        records.append(record)
    return RunLog(config=cfg, records=records,
                  wall_clock=time.perf_counter() - start)


# --- persistence ------------------------------------------------------------

def runlog_rows(log: RunLog):
    for rec in log.records:
        yield [rec.round, rec.rule, repr(rec.accuracy), repr(rec.loss),
               rec.decode_failures, ";".join(str(u) for u in rec.selected)]


def write_runlog_csv(logs, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "rule", "accuracy", "loss",
                         "decode_failures", "selected"])
        for log in logs:
            for row in runlog_rows(log):
                writer.writerow(row)


def write_scores_csv(logs, path) -> None:
    rows = []
    for log in logs:
        for rec in log.records:
            sel = set(rec.selected)
            for user in range(1, log.config.n_users + 1):
                rows.append([rec.round, rec.rule, user,
                             repr(float(rec.scores[user - 1])),
                             repr(float(rec.lam[user - 1])),
                             repr(float(rec.mod_scores[user - 1])),
                             int(user in sel)])
    robust_select.scores_to_csv(rows, path)


def write_profile_csv(logs, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["round", "rule", "user", "count"])
        for log in logs:
            for rec in log.records:
                for user in range(1, log.config.n_users + 1):
                    writer.writerow([rec.round, rec.rule, user,
                                     int(rec.profile_counts[user - 1])])
