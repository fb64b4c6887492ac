"""Per-stem binary purity head: a small MLP over pooled encoder embeddings.

Architecture: three Linear -> ReLU layers with output widths [D, D/2, D/4]
followed by a linear map to a scalar logit; sigmoid gives the purity
probability. Training minimizes mean binary cross-entropy with
adaptive-moment mini-batch gradient descent, early-stopping on a validation
F1 plateau. Forward, backward and the optimizer are written out explicitly
so the gradients can be checked against finite differences.
"""

import json
from dataclasses import dataclass

import numpy as np

from .embedding import Embedding

CHECKPOINT_VERSION = 1
DEFAULT_DECISION_THRESHOLD = 0.5


class HeadError(Exception):
    pass


class TrainingError(HeadError):
    pass


def _sigmoid(z):
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _bce(logits, labels):
    # stable form: max(z,0) - z*y + log(1+exp(-|z|))
    return float(
        np.mean(
            np.maximum(logits, 0.0)
            - logits * labels
            + np.log1p(np.exp(-np.abs(logits)))
        )
    )


@dataclass
class HeadParams:
    """Weights and biases of the four linear layers.

    weights[i] has shape (in_dim, out_dim); layer widths are
    D->D, D->D/2, D/2->D/4, D/4->1.
    """

    weights: list
    biases: list

    def __post_init__(self):
        if len(self.weights) != 4 or len(self.biases) != 4:
            raise HeadError("head has exactly 4 layers")
        d = self.weights[0].shape[0]
        expected = [(d, d), (d, d // 2), (d // 2, d // 4), (d // 4, 1)]
        shapes = [w.shape for w in self.weights]
        if d % 4 != 0 or shapes != expected:
            raise HeadError(f"inconsistent layer shapes {shapes} for D={d}")
        for w, b in zip(self.weights, self.biases):
            if b.shape != (w.shape[1],):
                raise HeadError("bias shape mismatch")
            if not (np.isfinite(w).all() and np.isfinite(b).all()):
                raise HeadError("non-finite parameters")

    @property
    def dim_d(self):
        return self.weights[0].shape[0]

    def parameter_count(self):
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def copy(self):
        return HeadParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    @classmethod
    def initialize(cls, dim_d, rng):
        """He-scaled random init; D must be divisible by 4.

        Biases get a small random offset so no unit starts exactly on the
        ReLU kink (keeps finite-difference gradient checks well-posed).
        """
        if dim_d % 4 != 0:
            raise HeadError(f"D must be divisible by 4, got {dim_d}")
        dims = [dim_d, dim_d, dim_d // 2, dim_d // 4, 1]
        weights, biases = [], []
        for d_in, d_out in zip(dims, dims[1:]):
            weights.append(rng.normal(0.0, np.sqrt(2.0 / d_in), size=(d_in, d_out)))
            biases.append(rng.normal(0.0, 0.01, size=d_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, dim_d):
        if dim_d % 4 != 0:
            raise HeadError(f"D must be divisible by 4, got {dim_d}")
        dims = [dim_d, dim_d, dim_d // 2, dim_d // 4, 1]
        return cls(
            [np.zeros((i, o)) for i, o in zip(dims, dims[1:])],
            [np.zeros(o) for o in dims[1:]],
        )

    def forward_batch(self, x):
        """Logits for a (N, D) matrix."""
        h = np.asarray(x, dtype=np.float64)
        if h.ndim != 2 or h.shape[1] != self.dim_d:
            raise HeadError(f"input must be (N, {self.dim_d}), got {h.shape}")
        for w, b in zip(self.weights[:3], self.biases[:3]):
            h = np.maximum(h @ w + b, 0.0)
        return (h @ self.weights[3] + self.biases[3]).ravel()

    def predict_proba(self, x):
        return _sigmoid(self.forward_batch(x))


def head_forward(e, params: HeadParams):
    """Single embedding -> (logit, probability)."""
    values = e.values if isinstance(e, Embedding) else np.asarray(e, dtype=np.float64)
    if values.shape != (params.dim_d,):
        raise HeadError(f"embedding length {values.shape} != D={params.dim_d}")
    logit = float(params.forward_batch(values[None, :])[0])
    return logit, float(_sigmoid(np.array([logit]))[0])


def decide(probability, threshold=DEFAULT_DECISION_THRESHOLD):
    """Hard 0/1 decision; label 1 when probability >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise HeadError(f"threshold must lie in (0, 1), got {threshold}")
    return 1 if probability >= threshold else 0


# ---------------------------------------------------------------------------
# gradients


def _forward_cache(params, x):
    acts = [np.asarray(x, dtype=np.float64)]
    pre = []
    h = acts[0]
    for w, b in zip(params.weights[:3], params.biases[:3]):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0)
        acts.append(h)
    logits = (h @ params.weights[3] + params.biases[3]).ravel()
    return logits, pre, acts


def _backward(params, x, labels):
    """Mean-BCE gradients for a batch. Returns (loss, grad_w, grad_b)."""
    n = x.shape[0]
    logits, pre, acts = _forward_cache(params, x)
    loss = _bce(logits, labels)
    delta = ((_sigmoid(logits) - labels) / n)[:, None]

    grad_w = [None] * 4
    grad_b = [None] * 4
    grad_w[3] = acts[3].T @ delta
    grad_b[3] = delta.sum(axis=0)
    upstream = delta @ params.weights[3].T
    for layer in (2, 1, 0):
        dz = upstream * (pre[layer] > 0.0)
        grad_w[layer] = acts[layer].T @ dz
        grad_b[layer] = dz.sum(axis=0)
        if layer:
            upstream = dz @ params.weights[layer].T
    return loss, grad_w, grad_b


def grad_check(params: HeadParams, e, label, epsilon=1e-5):
    """Max relative error of the analytic BCE gradient against central
    finite differences, over every parameter."""
    if not 1e-6 <= epsilon <= 1e-3:
        raise HeadError(f"epsilon {epsilon} outside [1e-6, 1e-3]")
    values = e.values if isinstance(e, Embedding) else np.asarray(e, dtype=np.float64)
    x = values[None, :]
    y = np.array([float(label)])
    _, grad_w, grad_b = _backward(params, x, y)

    def loss_now():
        return _bce(params.forward_batch(x), y)

    worst = 0.0
    for arrs, grads in ((params.weights, grad_w), (params.biases, grad_b)):
        for arr, grad in zip(arrs, grads):
            flat = arr.ravel()
            gflat = grad.ravel()
            for i in range(flat.size):
                keep = flat[i]
                flat[i] = keep + epsilon
                up = loss_now()
                flat[i] = keep - epsilon
                down = loss_now()
                flat[i] = keep
                numeric = (up - down) / (2.0 * epsilon)
                # the 1e-6 floor keeps fp64 central-difference noise on
                # numerically-negligible components out of the ratio
                denom = max(abs(gflat[i]), abs(numeric), 1e-6)
                worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    learning_rate: float = 1e-3
    batch_size: int = 64
    max_epochs: int = 200
    early_stop_patience: int = 10
    seed: int = 0
    val_fraction: float = 0.2
    n_per_class: int = 512  # used by pipeline-level epoch synthesis
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.max_epochs) <= 0:
            raise HeadError("learning_rate, batch_size, max_epochs must be positive")
        if self.early_stop_patience < 1:
            raise HeadError("early_stop_patience must be >= 1")
        if not 0.0 < self.val_fraction < 1.0:
            raise HeadError("val_fraction must lie in (0, 1)")

    def to_dict(self):
        return dict(self.__dict__)


class _Adam:
    def __init__(self, params, cfg):
        self.cfg = cfg
        self.lr = cfg.learning_rate
        self.t = 0
        self.m_w = [np.zeros_like(w) for w in params.weights]
        self.v_w = [np.zeros_like(w) for w in params.weights]
        self.m_b = [np.zeros_like(b) for b in params.biases]
        self.v_b = [np.zeros_like(b) for b in params.biases]

    def step(self, params, grad_w, grad_b):
        b1, b2, eps = self.cfg.adam_beta1, self.cfg.adam_beta2, self.cfg.adam_eps
        self.t += 1
        correction = np.sqrt(1.0 - b2**self.t) / (1.0 - b1**self.t)
        for i in range(4):
            for store_m, store_v, grad, target in (
                (self.m_w, self.v_w, grad_w[i], params.weights[i]),
                (self.m_b, self.v_b, grad_b[i], params.biases[i]),
            ):
                store_m[i] = b1 * store_m[i] + (1 - b1) * grad
                store_v[i] = b2 * store_v[i] + (1 - b2) * grad * grad
                target -= self.lr * correction * store_m[i] / (np.sqrt(store_v[i]) + eps)


def _as_matrix(dataset):
    xs, ys = [], []
    for e, label in dataset:
        values = e.values if isinstance(e, Embedding) else np.asarray(e, dtype=np.float64)
        xs.append(values)
        ys.append(float(label))
    return np.stack(xs), np.array(ys)


def _stratified_split(y, val_fraction, rng):
    train_idx, val_idx = [], []
    for cls in (0.0, 1.0):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        n_val = max(1, int(round(len(idx) * val_fraction)))
        val_idx.extend(idx[:n_val])
        train_idx.extend(idx[n_val:])
    return np.sort(train_idx), np.sort(val_idx)


def train_head(dataset, cfg: TrainConfig):
    """Train a purity head; returns (best-validation HeadParams, epoch log).

    The dataset is a list of (embedding, label) pairs with both labels
    present. A deterministic stratified split feeds validation; training
    stops when validation F1 has not improved for ``early_stop_patience``
    epochs, halving the learning rate halfway through a plateau.
    """
    x, y = _as_matrix(dataset)
    classes = np.unique(y)
    if len(classes) < 2:
        raise TrainingError(f"degenerate label set {classes.tolist()}; need both classes")
    if set(classes) - {0.0, 1.0}:
        raise TrainingError(f"labels must be 0/1, got {classes.tolist()}")
    dim = x.shape[1]
    if dim % 4 != 0:
        raise TrainingError(f"embedding dimension {dim} not divisible by 4")

    rng = np.random.default_rng(cfg.seed)
    train_idx, val_idx = _stratified_split(y, cfg.val_fraction, rng)
    if len(train_idx) == 0:
        raise TrainingError("no training examples left after the validation split")
    x_train, y_train = x[train_idx], y[train_idx]
    x_val, y_val = x[val_idx], y[val_idx]

    params = HeadParams.initialize(dim, rng)
    optimizer = _Adam(params, cfg)
    best = params.copy()
    best_f1 = -1.0
    best_val_loss = np.inf
    stall = 0
    half_patience = max(1, cfg.early_stop_patience // 2)
    log = []

    for epoch in range(cfg.max_epochs):
        order = rng.permutation(len(x_train))
        epoch_loss = 0.0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start : start + cfg.batch_size]
            loss, grad_w, grad_b = _backward(params, x_train[batch], y_train[batch])
            if not np.isfinite(loss):
                raise TrainingError(
                    f"training diverged (loss={loss}) at epoch {epoch}; "
                    f"lr={optimizer.lr}, log={log[-3:]}"
                )
            optimizer.step(params, grad_w, grad_b)
            epoch_loss += loss * len(batch)
        epoch_loss /= len(order)

        val_logits = params.forward_batch(x_val)
        val_loss = _bce(val_logits, y_val)
        val_report = evaluate_probs(_sigmoid(val_logits), y_val, DEFAULT_DECISION_THRESHOLD)
        log.append(
            {
                "epoch": epoch,
                "train_loss": epoch_loss,
                "val_loss": val_loss,
                "val_f1": val_report.f1,
                "val_accuracy": val_report.accuracy,
                "lr": optimizer.lr,
            }
        )

        improved_f1 = val_report.f1 > best_f1 + 1e-12
        # ties on F1 resolve to the lower validation loss, so the returned
        # head is the most confident of the equally-accurate epochs
        if improved_f1 or (
            val_report.f1 >= best_f1 - 1e-12 and val_loss < best_val_loss - 1e-12
        ):
            best_f1 = max(best_f1, val_report.f1)
            best_val_loss = val_loss
            best = params.copy()
        if improved_f1:
            stall = 0
        else:
            stall += 1
            if stall == half_patience:
                optimizer.lr /= 2.0
            if stall >= cfg.early_stop_patience:
                break
    return best, log


# ---------------------------------------------------------------------------
# evaluation


@dataclass
class EvalReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    tp: int
    fp: int
    tn: int
    fn: int
    threshold: float
    undefined: tuple = ()  # ratios whose denominator was zero, reported as 0

    def to_dict(self):
        d = dict(self.__dict__)
        d["undefined"] = list(self.undefined)
        return d


def f1_score(precision, recall):
    """Harmonic mean 2PR/(P+R); 0 when both are 0."""
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def metrics_from_counts(tp, fp, tn, fn, threshold):
    """accuracy=(tp+tn)/n, precision=tp/(tp+fp), recall=tp/(tp+fn),
    f1=2PR/(P+R); zero-denominator ratios come back as 0 and are flagged."""
    n = tp + fp + tn + fn
    if n == 0:
        raise HeadError("empty dataset")
    undefined = []
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        precision = 0.0
        undefined.append("precision")
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        recall = 0.0
        undefined.append("recall")
    if precision + recall > 0:
        f1 = f1_score(precision, recall)
    else:
        f1 = 0.0
        undefined.append("f1")
    return EvalReport(
        accuracy=(tp + tn) / n,
        precision=precision,
        recall=recall,
        f1=f1,
        tp=tp,
        fp=fp,
        tn=tn,
        fn=fn,
        threshold=threshold,
        undefined=tuple(undefined),
    )


def evaluate_probs(probabilities, labels, threshold=DEFAULT_DECISION_THRESHOLD):
    probabilities = np.asarray(probabilities, dtype=np.float64)
    labels = np.asarray(labels)
    if probabilities.size == 0:
        raise HeadError("empty dataset")
    predicted = probabilities >= threshold
    actual = labels >= 0.5
    tp = int(np.sum(predicted & actual))
    fp = int(np.sum(predicted & ~actual))
    tn = int(np.sum(~predicted & ~actual))
    fn = int(np.sum(~predicted & actual))
    return metrics_from_counts(tp, fp, tn, fn, threshold)


def evaluate(params: HeadParams, dataset, threshold=DEFAULT_DECISION_THRESHOLD):
    """Confusion counts and derived metrics of the head on a labeled set."""
    if not 0.0 < threshold < 1.0:
        raise HeadError(f"threshold must lie in (0, 1), got {threshold}")
    dataset = list(dataset)
    if not dataset:
        raise HeadError("empty dataset")
    x, y = _as_matrix(dataset)
    return evaluate_probs(params.predict_proba(x), y, threshold)


# ---------------------------------------------------------------------------
# checkpoints


def save_head(path, params: HeadParams, backend_name, seed, extra=None):
    """Versioned binary checkpoint (.npz) carrying D, shapes, parameters,
    the training seed and the embedding backend the head was trained on."""
    meta = {
        "version": CHECKPOINT_VERSION,
        "dim_d": params.dim_d,
        "backend_name": backend_name,
        "seed": seed,
        "layer_shapes": [list(w.shape) for w in params.weights],
    }
    if extra:
        meta["extra"] = extra
    arrays = {f"w{i}": w for i, w in enumerate(params.weights)}
    arrays.update({f"b{i}": b for i, b in enumerate(params.biases)})
    np.savez(path, meta=json.dumps(meta), **arrays)


def load_head(path, backend=None):
    """Load a checkpoint; rejects version or backend-dimension mismatches.

    Returns (HeadParams, meta dict).
    """
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise HeadError(f"unsupported checkpoint version {meta.get('version')}")
        params = HeadParams(
            [data[f"w{i}"] for i in range(4)], [data[f"b{i}"] for i in range(4)]
        )
    if params.dim_d != meta["dim_d"]:
        raise HeadError("checkpoint metadata disagrees with stored shapes")
    if backend is not None and backend.dim_d != params.dim_d:
        raise HeadError(
            f"head expects D={params.dim_d} but backend {backend.name} "
            f"produces D={backend.dim_d}"
        )
    return params, meta
