"""Extension-scoring policy: a GIN encoder over vertex features feeding a
shared MLP that scores every candidate move, softmaxed into a distribution.

Vertex input is [LDP; step embedding; clustering] (8 numbers).  Three GIN
layers with sum aggregation produce 32-dim embeddings h_v; a slot
(apex, {v, w}) is represented as [h_apex + h_v + h_w; h_v + h_w; gamma] with
h of the empty apex zero and the pair-sum block zeroed for 0-extensions.
gamma one-hot encodes slot type: invalid, 0-extension, or a 1-extension
whose triple spans 1, 2 or 3 edges.  Scores of *all* slots, invalid ones
included, go through one softmax; sampling resamples invalid draws.

Everything runs in float64 numpy with hand-derived gradients, checked in the
tests against central finite differences.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .graphs import Graph, clustering, ldp
from .rigidity import ONE, ZERO, Extension, enumerate_slots

FEATURE_DIM = 8
EMBED_DIM = 32
GIN_HIDDEN = 128
GIN_LAYERS = 3
HEAD_HIDDEN = 128
GAMMA_DIM = 5
SLOT_DIM = 2 * EMBED_DIM + GAMMA_DIM
FLAT_HIDDEN = 128

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

FORMAT_VERSION = 1

GIN_VARIANT = "gin"
FLAT_VARIANT = "flat-mlp"


@dataclass
class PolicyParams:
    variant: str
    n_max: int
    tensors: dict[str, np.ndarray]
    adam_m: dict[str, np.ndarray]
    adam_v: dict[str, np.ndarray]
    adam_t: int = 0

    def copy(self) -> "PolicyParams":
        return PolicyParams(
            variant=self.variant,
            n_max=self.n_max,
            tensors={k: v.copy() for k, v in self.tensors.items()},
            adam_m={k: v.copy() for k, v in self.adam_m.items()},
            adam_v={k: v.copy() for k, v in self.adam_v.items()},
            adam_t=self.adam_t,
        )


def _mlp_shapes(prefix: str, dims: list[int]) -> dict[str, tuple[int, ...]]:
    shapes: dict[str, tuple[int, ...]] = {}
    for i in range(len(dims) - 1):
        shapes[f"{prefix}.W{i + 1}"] = (dims[i], dims[i + 1])
        shapes[f"{prefix}.b{i + 1}"] = (dims[i + 1],)
    return shapes


def flat_input_dim(n_max: int) -> int:
    return n_max * (n_max - 1) // 2


def flat_output_dim(n_max: int) -> int:
    k = n_max - 1  # largest state a policy for target n_max ever scores
    return k * (k - 1) // 2 * (k - 1)


def param_shapes(variant: str, n_max: int) -> dict[str, tuple[int, ...]]:
    if n_max < 3:
        raise ValueError(f"need n_max >= 3, got {n_max}")
    if variant == GIN_VARIANT:
        shapes: dict[str, tuple[int, ...]] = {}
        for l in range(GIN_LAYERS):
            in_dim = FEATURE_DIM if l == 0 else EMBED_DIM
            shapes.update(_mlp_shapes(f"gin{l}", [in_dim, GIN_HIDDEN, EMBED_DIM]))
            shapes[f"gin{l}.eps"] = ()
        shapes["step_embed"] = (n_max - 2, 2)  # rows are lambda_k, k = 2..n_max-1
        shapes.update(_mlp_shapes("head", [SLOT_DIM, HEAD_HIDDEN, HEAD_HIDDEN, 1]))
        return shapes
    if variant == FLAT_VARIANT:
        return _mlp_shapes(
            "flat", [flat_input_dim(n_max), FLAT_HIDDEN, FLAT_HIDDEN, flat_output_dim(n_max)])
    raise ValueError(f"unknown policy variant {variant!r}")


def init_params(variant: str, n_max: int, seed=0) -> PolicyParams:
    """Glorot-uniform weights, zero biases and eps, std-0.01 step embeddings."""
    rng = np.random.default_rng(seed)
    tensors: dict[str, np.ndarray] = {}
    for name, shape in param_shapes(variant, n_max).items():
        if name == "step_embed":
            tensors[name] = rng.normal(0.0, 0.01, shape)
        elif name.endswith(".eps") or len(shape) < 2:
            tensors[name] = np.zeros(shape)
        else:
            limit = np.sqrt(6.0 / (shape[0] + shape[1]))
            tensors[name] = rng.uniform(-limit, limit, shape)
    zeros = lambda: {k: np.zeros_like(v) for k, v in tensors.items()}
    return PolicyParams(variant, n_max, tensors, zeros(), zeros(), 0)


# ---------------------------------------------------------------------------
# forward passes


def build_features(g: Graph, params: PolicyParams) -> np.ndarray:
    """(k, 8) matrix of [LDP; lambda_k; clustering] rows."""
    k = g.n
    if not 2 <= k <= params.n_max - 1:
        raise ValueError(f"state size {k} outside policy range [2, {params.n_max - 1}]")
    lam = params.tensors["step_embed"][k - 2]
    feats = np.zeros((k, FEATURE_DIM))
    for v in range(k):
        feats[v, :5] = ldp(g, v)
        feats[v, 5:7] = lam
        feats[v, 7] = clustering(g, v)
    return feats


def _dense_adj(g: Graph) -> np.ndarray:
    a = np.zeros((g.n, g.n))
    for u, v in g.edges():
        a[u, v] = a[v, u] = 1.0
    return a


def gin_forward(params: PolicyParams, g: Graph, feats: np.ndarray | None = None):
    """Vertex embeddings (k, 32) plus the caches backprop needs."""
    t = params.tensors
    if feats is None:
        feats = build_features(g, params)
    adj = _dense_adj(g)
    h = feats
    layers = []
    for l in range(GIN_LAYERS):
        eps = t[f"gin{l}.eps"]
        s = (1.0 + eps) * h + adj @ h
        z1 = s @ t[f"gin{l}.W1"] + t[f"gin{l}.b1"]
        a1 = np.maximum(z1, 0.0)
        out = a1 @ t[f"gin{l}.W2"] + t[f"gin{l}.b2"]
        layers.append({"h_in": h, "s": s, "z1": z1, "a1": a1})
        h = out
    return h, {"adj": adj, "feats": feats, "layers": layers}


@lru_cache(maxsize=None)
def _slot_arrays(k: int):
    """Index arrays aligned with enumerate_slots(k); empty apex points at the
    padded zero row k."""
    slots = enumerate_slots(k)
    a_idx = np.array([k if e.apex is None else e.apex for e in slots])
    v_idx = np.array([e.pair[0] for e in slots])
    w_idx = np.array([e.pair[1] for e in slots])
    is_one = np.array([e.kind == ONE for e in slots])
    return slots, a_idx, v_idx, w_idx, is_one


def slot_representation(params: PolicyParams, g: Graph, h: np.ndarray):
    """(S, 69) slot matrix in the shared slot order, plus scatter metadata."""
    k = g.n
    slots, a_idx, v_idx, w_idx, is_one = _slot_arrays(k)
    hp = np.vstack([h, np.zeros((1, h.shape[1]))])
    phi = hp[a_idx] + hp[v_idx] + hp[w_idx]
    psi = (hp[v_idx] + hp[w_idx]) * is_one[:, None]
    adj = np.zeros((k + 1, k + 1), dtype=bool)
    for u, v in g.edges():
        adj[u, v] = adj[v, u] = True
    e_vw = adj[v_idx, w_idx]
    among = adj[a_idx, v_idx].astype(int) + adj[a_idx, w_idx].astype(int) + e_vw
    valid = ~is_one | e_vw
    gamma = np.zeros((len(slots), GAMMA_DIM))
    gamma[:, 0] = is_one & ~e_vw
    gamma[:, 1] = ~is_one
    for j, cnt in enumerate((1, 2, 3)):
        gamma[:, 2 + j] = is_one & e_vw & (among == cnt)
    rep = np.hstack([phi, psi, gamma])
    aux = {"slots": slots, "a_idx": a_idx, "v_idx": v_idx, "w_idx": w_idx,
           "is_one": is_one, "valid": valid}
    return rep, aux


def _head_forward(params: PolicyParams, rep: np.ndarray):
    t = params.tensors
    z1 = rep @ t["head.W1"] + t["head.b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ t["head.W2"] + t["head.b2"]
    a2 = np.maximum(z2, 0.0)
    logits = (a2 @ t["head.W3"] + t["head.b3"])[:, 0]
    return logits, {"rep": rep, "z1": z1, "a1": a1, "z2": z2, "a2": a2}


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


@dataclass
class ActionDistribution:
    slots: tuple[Extension, ...]
    valid: np.ndarray
    probs: np.ndarray
    logits: np.ndarray
    _index: dict[Extension, int] | None = field(default=None, repr=False)

    def index_of(self, ext: Extension) -> int:
        if self._index is None:
            self._index = {e: i for i, e in enumerate(self.slots)}
        return self._index[ext]

    @property
    def entropy(self) -> float:
        p = self.probs
        return float(-(p * np.log(np.where(p > 0, p, 1.0))).sum())


# --- flat-MLP ablation ------------------------------------------------------


@lru_cache(maxsize=None)
def _triangle_positions(n_max: int) -> dict[tuple[int, int], int]:
    pos = {}
    i = 0
    for u in range(n_max):
        for v in range(u + 1, n_max):
            pos[(u, v)] = i
            i += 1
    return pos


@lru_cache(maxsize=None)
def _flat_present(n_max: int, k: int) -> np.ndarray:
    """Positions of the k-state slots inside the fixed maximal slot list."""
    table = {e: i for i, e in enumerate(enumerate_slots(n_max - 1))}
    return np.array([table[e] for e in enumerate_slots(k)])


def flat_input_vector(g: Graph, n_max: int) -> np.ndarray:
    x = np.zeros(flat_input_dim(n_max))
    pos = _triangle_positions(n_max)
    for u, v in g.edges():
        x[pos[(u, v)]] = 1.0
    return x


def _flat_forward(params: PolicyParams, g: Graph):
    t = params.tensors
    x = flat_input_vector(g, params.n_max)
    z1 = x @ t["flat.W1"] + t["flat.b1"]
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ t["flat.W2"] + t["flat.b2"]
    a2 = np.maximum(z2, 0.0)
    full = a2 @ t["flat.W3"] + t["flat.b3"]
    present = _flat_present(params.n_max, g.n)
    logits = full[present]
    return logits, {"x": x, "z1": z1, "a1": a1, "z2": z2, "a2": a2, "present": present}


def flat_mlp_policy(params: PolicyParams, g: Graph) -> ActionDistribution:
    """Ablation policy: plain MLP on the zero-padded adjacency bits, one
    logit per slot of the maximal slot indexing; slots absent at the current
    size carry no probability mass.  Deliberately not permutation
    equivariant."""
    if not 2 <= g.n <= params.n_max - 1:
        raise ValueError(f"state size {g.n} outside policy range [2, {params.n_max - 1}]")
    logits, _ = _flat_forward(params, g)
    slots, _, _, _, is_one = _slot_arrays(g.n)
    valid = np.array([e.kind == ZERO or g.has_edge(*e.pair) for e in slots])
    return ActionDistribution(slots, valid, _softmax(logits), logits)


def action_distribution(params: PolicyParams, g: Graph) -> ActionDistribution:
    """Softmax over every slot of the current state, invalid ones included."""
    if params.variant == FLAT_VARIANT:
        return flat_mlp_policy(params, g)
    h, _ = gin_forward(params, g)
    rep, aux = slot_representation(params, g, h)
    logits, _ = _head_forward(params, rep)
    return ActionDistribution(aux["slots"], aux["valid"], _softmax(logits), logits)


def sample_action(dist: ActionDistribution, rng, max_resample: int = 32) -> Extension:
    """Draw from the full softmax; invalid draws are rejected and retried up
    to the cap, after which the valid mass is renormalized and sampled."""
    cum = np.cumsum(dist.probs)
    last = len(cum) - 1
    for _ in range(max_resample):
        i = min(int(np.searchsorted(cum, rng.random(), side="right")), last)
        if dist.valid[i]:
            return dist.slots[i]
    w = dist.probs * dist.valid
    total = w.sum()
    if total <= 0.0:
        raise ValueError("no valid slot carries probability mass")
    cum = np.cumsum(w / total)
    i = min(int(np.searchsorted(cum, rng.random(), side="right")), len(cum) - 1)
    return dist.slots[i]


# ---------------------------------------------------------------------------
# loss and gradients


def _zero_grads(params: PolicyParams) -> dict[str, np.ndarray]:
    return {k: np.zeros_like(v) for k, v in params.tensors.items()}


def _logit_grad_terms(logits: np.ndarray, action_counts: dict[int, int], eta: float):
    """Loss and d/dlogits of sum_a c_a * (-log p_a) - eta * c_tot * H(p)."""
    z = logits - logits.max()
    logp = z - np.log(np.exp(z).sum())
    p = np.exp(logp)
    c_tot = sum(action_counts.values())
    ent = float(-(p * logp).sum())
    loss = -sum(c * logp[a] for a, c in action_counts.items()) - eta * c_tot * ent
    dz = c_tot * p.copy()
    for a, c in action_counts.items():
        dz[a] -= c
    dz += eta * c_tot * p * (logp + ent)
    return float(loss), dz, ent


@lru_cache(maxsize=None)
def _slot_index_table(k: int) -> dict[Extension, int]:
    return {e: i for i, e in enumerate(enumerate_slots(k))}


def _gin_pair_grads(params, g, action_counts, eta, grads):
    t = params.tensors
    h, cache = gin_forward(params, g)
    rep, aux = slot_representation(params, g, h)
    logits, hcache = _head_forward(params, rep)
    loss, dz, _ = _logit_grad_terms(logits, action_counts, eta)

    # head: logits = relu(relu(rep W1 + b1) W2 + b2) W3 + b3
    dz2d = dz[:, None]
    grads["head.W3"] += hcache["a2"].T @ dz2d
    grads["head.b3"] += dz2d.sum(axis=0)
    da2 = dz2d @ t["head.W3"].T
    dzz2 = da2 * (hcache["z2"] > 0)
    grads["head.W2"] += hcache["a1"].T @ dzz2
    grads["head.b2"] += dzz2.sum(axis=0)
    da1 = dzz2 @ t["head.W2"].T
    dzz1 = da1 * (hcache["z1"] > 0)
    grads["head.W1"] += rep.T @ dzz1
    grads["head.b1"] += dzz1.sum(axis=0)
    drep = dzz1 @ t["head.W1"].T

    # scatter slot-rep gradients back onto vertex embeddings
    k = g.n
    dphi = drep[:, :EMBED_DIM]
    dpsi = drep[:, EMBED_DIM:2 * EMBED_DIM] * aux["is_one"][:, None]
    dhp = np.zeros((k + 1, EMBED_DIM))
    np.add.at(dhp, aux["a_idx"], dphi)
    np.add.at(dhp, aux["v_idx"], dphi + dpsi)
    np.add.at(dhp, aux["w_idx"], dphi + dpsi)
    dh = dhp[:k]

    adj = cache["adj"]
    for l in range(GIN_LAYERS - 1, -1, -1):
        lc = cache["layers"][l]
        grads[f"gin{l}.W2"] += lc["a1"].T @ dh
        grads[f"gin{l}.b2"] += dh.sum(axis=0)
        da1 = dh @ t[f"gin{l}.W2"].T
        dz1 = da1 * (lc["z1"] > 0)
        grads[f"gin{l}.W1"] += lc["s"].T @ dz1
        grads[f"gin{l}.b1"] += dz1.sum(axis=0)
        ds = dz1 @ t[f"gin{l}.W1"].T
        grads[f"gin{l}.eps"] += (ds * lc["h_in"]).sum()
        dh = (1.0 + t[f"gin{l}.eps"]) * ds + adj @ ds

    # only the step-embedding columns of the input features are learnable
    grads["step_embed"][g.n - 2] += dh[:, 5:7].sum(axis=0)
    return loss


def _flat_pair_grads(params, g, action_counts, eta, grads):
    t = params.tensors
    logits, cache = _flat_forward(params, g)
    loss, dz, _ = _logit_grad_terms(logits, action_counts, eta)
    dfull = np.zeros(flat_output_dim(params.n_max))
    dfull[cache["present"]] = dz
    grads["flat.W3"] += np.outer(cache["a2"], dfull)
    grads["flat.b3"] += dfull
    da2 = dfull @ t["flat.W3"].T
    dz2 = da2 * (cache["z2"] > 0)
    grads["flat.W2"] += np.outer(cache["a1"], dz2)
    grads["flat.b2"] += dz2
    da1 = dz2 @ t["flat.W2"].T
    dz1 = da1 * (cache["z1"] > 0)
    grads["flat.W1"] += np.outer(cache["x"], dz1)
    grads["flat.b1"] += dz1
    return loss


def loss_and_gradients(params: PolicyParams, dataset, eta: float):
    """Mean NLL of the taken actions minus eta times the mean full-softmax
    entropy, over all dataset items; returns (loss, grad dict).

    Items are (state, action) pairs or (state, step, action) triples; the
    step of a state is its vertex count.  States repeated across items are
    processed once with multiplicities."""
    if not dataset:
        raise ValueError("empty training batch")
    groups: dict[tuple, tuple[Graph, dict[int, int]]] = {}
    for item in dataset:
        g, ext = item[0], item[-1]
        if len(item) == 3 and item[1] != g.n:
            raise ValueError(f"step {item[1]} does not match state size {g.n}")
        key = (g.n, g.rows)
        if key not in groups:
            groups[key] = (g, {})
        idx = _slot_index_table(g.n)[ext]
        counts = groups[key][1]
        counts[idx] = counts.get(idx, 0) + 1
    grads = _zero_grads(params)
    total = 0.0
    for g, counts in groups.values():
        if params.variant == FLAT_VARIANT:
            total += _flat_pair_grads(params, g, counts, eta, grads)
        else:
            total += _gin_pair_grads(params, g, counts, eta, grads)
    n = len(dataset)
    for name in grads:
        grads[name] /= n
    return total / n, grads


def adam_step(params: PolicyParams, grads: dict[str, np.ndarray], lr: float) -> None:
    """One in-place Adam update (beta1=0.9, beta2=0.999, eps=1e-8)."""
    params.adam_t += 1
    t = params.adam_t
    c1 = 1.0 - ADAM_BETA1 ** t
    c2 = 1.0 - ADAM_BETA2 ** t
    for name, g in grads.items():
        m = params.adam_m[name]
        v = params.adam_v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * np.square(g)
        params.tensors[name] -= lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)


# ---------------------------------------------------------------------------
# persistence and transfer


def save_params(params: PolicyParams, path, extra: dict | None = None) -> None:
    """Versioned npz container: named tensors, Adam moments, JSON manifest.
    `extra` arrays are stored verbatim and ignored by load_params."""
    meta = {
        "format_version": FORMAT_VERSION,
        "variant": params.variant,
        "n_max": params.n_max,
        "adam_t": params.adam_t,
    }
    arrays = {f"t.{k}": v for k, v in params.tensors.items()}
    arrays.update({f"m.{k}": v for k, v in params.adam_m.items()})
    arrays.update({f"v.{k}": v for k, v in params.adam_v.items()})
    arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
    if extra:
        arrays.update(extra)
    if hasattr(path, "write"):
        np.savez(path, **arrays)
    else:
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)


def load_params(path) -> PolicyParams:
    with np.load(path if hasattr(path, "read") else str(path)) as data:
        if "meta" not in data:
            raise ValueError("weight file has no manifest")
        meta = json.loads(bytes(data["meta"].tobytes()).decode())
        if meta.get("format_version") != FORMAT_VERSION:
            raise ValueError(f"unsupported weight format {meta.get('format_version')}")
        variant, n_max = meta["variant"], int(meta["n_max"])
        expected = param_shapes(variant, n_max)
        tensors, adam_m, adam_v = {}, {}, {}
        for name, shape in expected.items():
            for prefix, dest in (("t", tensors), ("m", adam_m), ("v", adam_v)):
                key = f"{prefix}.{name}"
                if key not in data:
                    raise ValueError(f"weight file missing tensor {key}")
                arr = np.asarray(data[key], dtype=float)
                if arr.shape != shape:
                    raise ValueError(
                        f"{key} has shape {arr.shape}, expected {shape}")
                dest[name] = arr
    return PolicyParams(variant, n_max, tensors, adam_m, adam_v, int(meta["adam_t"]))


def extend_to_n(params: PolicyParams, n: int) -> PolicyParams:
    """Transfer a policy trained for smaller targets to target size n by
    copying the last step embedding into each new row (fresh Adam moments)."""
    if params.variant != GIN_VARIANT:
        raise ValueError("flat-mlp weights are sized to n_max and cannot be extended")
    if n < params.n_max:
        raise ValueError(f"cannot shrink policy from n_max={params.n_max} to {n}")
    out = params.copy()
    while out.n_max < n:
        emb = out.tensors["step_embed"]
        out.tensors["step_embed"] = np.vstack([emb, emb[-1:]])
        out.adam_m["step_embed"] = np.vstack(
            [out.adam_m["step_embed"], np.zeros((1, 2))])
        out.adam_v["step_embed"] = np.vstack(
            [out.adam_v["step_embed"], np.zeros((1, 2))])
        out.n_max += 1
    return out
