"""Histogram-based decision-tree ensembles: bagged trees and gradient
boosting, with numba kernels sized for single-core use.

Features are pre-binned once per training table: continuous columns into
quantile bins, categorical columns one bin per category.  Trees split
continuous features on bin thresholds (``code <= b``) and categorical
features one-vs-rest (``code == c`` goes right), which spans the same
split space as thresholding a one-hot expansion while keeping the code
matrix one column per variable.  Histograms for the larger child of a
split are obtained by subtracting the smaller child's histogram from the
parent's, so each tree level costs about half a data pass.

Both ensemble kinds share one growth kernel driven by per-row gradient
and hessian arrays: bagged trees pass ``g = -w*y, h = w`` so leaf values
come out as weighted means, boosting passes the loss derivatives.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from numba import njit
from numpy.typing import NDArray

from .errors import DataError
from .ingest import VariableSchema

__all__ = [
    "TreeBinner", "TreeEnsembleModel",
    "fit_bagged_trees", "fit_boosted_trees",
]

_LEAF = np.int64(-1)
_KIND_THRESHOLD = 0   # continuous: code <= split_code goes left
_KIND_CATEGORY = 1    # categorical: code == split_code goes right


# --------------------------------------------------------------------
# Binning
# --------------------------------------------------------------------

@dataclass
class TreeBinner:
    """Maps typed data-frame columns to a uint8 bin-code matrix."""

    variables: tuple[VariableSchema, ...]
    max_bins: int = 64

    def __init__(self, variables: Sequence[VariableSchema], max_bins: int = 64):
        if not 2 <= max_bins <= 255:
            raise ValueError("max_bins must lie in [2, 255]")
        self.variables = tuple(variables)
        self.max_bins = max_bins
        self._edges: dict[str, NDArray[np.float64]] = {}
        self._fitted = False

    def fit(self, frame: pd.DataFrame) -> "TreeBinner":
        for var in self.variables:
            if var.name not in frame.columns:
                raise DataError(f"feature column {var.name!r} missing from frame")
            if var.kind == "categorical":
                if len(var.categories) > 255:
                    raise DataError(
                        f"column {var.name!r} has too many categories to bin"
                    )
                continue
            values = np.asarray(frame[var.name], dtype=float)
            if not np.all(np.isfinite(values)):
                raise DataError(f"non-finite values in column {var.name!r}")
            quantiles = np.quantile(
                values, np.linspace(0.0, 1.0, self.max_bins + 1)[1:-1]
            )
            self._edges[var.name] = np.unique(quantiles)
        self._fitted = True
        return self

    def transform(self, frame: pd.DataFrame) -> NDArray[np.uint8]:
        if not self._fitted:
            raise RuntimeError("binner used before fit()")
        n = len(frame)
        codes = np.empty((n, len(self.variables)), dtype=np.uint8, order="C")
        for j, var in enumerate(self.variables):
            if var.kind == "categorical":
                raw = pd.Categorical(
                    frame[var.name], categories=list(var.categories)
                ).codes
                if (raw < 0).any():
                    bad = frame[var.name].iloc[int(np.argmax(raw < 0))]
                    raise DataError(
                        f"unknown category {bad!r} in column {var.name!r}"
                    )
                codes[:, j] = raw.astype(np.uint8)
            else:
                values = np.asarray(frame[var.name], dtype=float)
                codes[:, j] = np.searchsorted(
                    self._edges[var.name], values, side="right"
                ).astype(np.uint8)
        return codes

    def fit_transform(self, frame: pd.DataFrame) -> NDArray[np.uint8]:
        return self.fit(frame).transform(frame)

    def edges(self, name: str) -> NDArray[np.float64]:
        """Fitted bin edges of a continuous feature."""
        if not self._fitted:
            raise RuntimeError("binner used before fit()")
        if name not in self._edges:
            raise KeyError(f"no fitted edges for column {name!r}")
        return self._edges[name]

    @property
    def bin_counts(self) -> NDArray[np.int64]:
        counts = np.empty(len(self.variables), dtype=np.int64)
        for j, var in enumerate(self.variables):
            if var.kind == "categorical":
                counts[j] = len(var.categories)
            else:
                counts[j] = self._edges[var.name].size + 1
        return counts

    @property
    def feature_kinds(self) -> NDArray[np.uint8]:
        return np.array(
            [_KIND_CATEGORY if v.kind == "categorical" else _KIND_THRESHOLD
             for v in self.variables],
            dtype=np.uint8,
        )


# --------------------------------------------------------------------
# Numba kernels
# --------------------------------------------------------------------

@njit(cache=True)
def _accumulate_histograms(codes, offsets, g, h, w, node_of_row,
                           node_lo, node_hi, build_slot, hg, hh, hw):
    n, d = codes.shape
    for i in range(n):
        node = node_of_row[i]
        if node < node_lo or node >= node_hi:
            continue
        slot = build_slot[node - node_lo]
        if slot < 0:
            continue
        gi = g[i]
        hi = h[i]
        wi = w[i]
        for f in range(d):
            b = offsets[f] + codes[i, f]
            hg[slot, b] += gi
            hh[slot, b] += hi
            hw[slot, b] += wi


@njit(cache=True)
def _best_splits(hg, hh, hw, offsets, kinds, lam, min_leaf,
                 out_feat, out_code, out_gain, out_gl, out_hl, out_wl):
    n_nodes = hg.shape[0]
    d = kinds.shape[0]
    for nd in range(n_nodes):
        g_tot = 0.0
        h_tot = 0.0
        w_tot = 0.0
        for b in range(offsets[0], offsets[1]):
            g_tot += hg[nd, b]
            h_tot += hh[nd, b]
            w_tot += hw[nd, b]
        parent_score = g_tot * g_tot / (h_tot + lam)
        best_gain = 0.0
        best_feat = -1
        best_code = -1
        best_gl = 0.0
        best_hl = 0.0
        best_wl = 0.0
        for f in range(d):
            lo = offsets[f]
            hi = offsets[f + 1]
            if kinds[f] == 0:
                gl = 0.0
                hl = 0.0
                wl = 0.0
                for b in range(lo, hi - 1):
                    gl += hg[nd, b]
                    hl += hh[nd, b]
                    wl += hw[nd, b]
                    wr = w_tot - wl
                    if wl < min_leaf or wr < min_leaf:
                        continue
                    gr = g_tot - gl
                    hr = h_tot - hl
                    gain = (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                            - parent_score)
                    if gain > best_gain + 1e-12:
                        best_gain = gain
                        best_feat = f
                        best_code = b - lo
                        best_gl = gl
                        best_hl = hl
                        best_wl = wl
            else:
                for b in range(lo, hi):
                    wr = hw[nd, b]
                    wl = w_tot - wr
                    if wl < min_leaf or wr < min_leaf:
                        continue
                    gr = hg[nd, b]
                    hr = hh[nd, b]
                    gl = g_tot - gr
                    hl = h_tot - hr
                    gain = (gl * gl / (hl + lam) + gr * gr / (hr + lam)
                            - parent_score)
                    if gain > best_gain + 1e-12:
                        best_gain = gain
                        best_feat = f
                        best_code = b - lo
                        best_gl = gl
                        best_hl = hl
                        best_wl = wl
        out_feat[nd] = best_feat
        out_code[nd] = best_code
        out_gain[nd] = best_gain
        out_gl[nd] = best_gl
        out_hl[nd] = best_hl
        out_wl[nd] = best_wl


@njit(cache=True)
def _route_rows(codes, node_of_row, node_lo, node_hi,
                feature, split_code, kind, left, right):
    n = node_of_row.shape[0]
    for i in range(n):
        node = node_of_row[i]
        if node < node_lo or node >= node_hi:
            continue
        f = feature[node]
        if f < 0:
            continue
        c = codes[i, f]
        if kind[node] == 0:
            go_left = c <= split_code[node]
        else:
            go_left = c != split_code[node]
        node_of_row[i] = left[node] if go_left else right[node]


@njit(cache=True)
def _predict_ensemble(codes, feature, split_code, kind, left, right, value,
                      roots, scale, base, out):
    n = codes.shape[0]
    n_trees = roots.shape[0]
    for i in range(n):
        acc = base
        for t in range(n_trees):
            node = roots[t]
            f = feature[node]
            while f >= 0:
                c = codes[i, f]
                if kind[node] == 0:
                    if c <= split_code[node]:
                        node = left[node]
                    else:
                        node = right[node]
                else:
                    if c != split_code[node]:
                        node = left[node]
                    else:
                        node = right[node]
                f = feature[node]
            acc += scale * value[node]
        out[i] = acc


# --------------------------------------------------------------------
# Growth driver
# --------------------------------------------------------------------

class _TreeArena:
    """Flat storage shared by all trees of one ensemble."""

    def __init__(self, capacity: int):
        self.feature = np.full(capacity, _LEAF, dtype=np.int64)
        self.split_code = np.zeros(capacity, dtype=np.int64)
        self.kind = np.zeros(capacity, dtype=np.uint8)
        self.left = np.zeros(capacity, dtype=np.int64)
        self.right = np.zeros(capacity, dtype=np.int64)
        self.value = np.zeros(capacity, dtype=np.float64)
        self.n_nodes = 0

    def ensure(self, extra: int) -> None:
        needed = self.n_nodes + extra
        if needed <= self.feature.shape[0]:
            return
        new_cap = max(needed, 2 * self.feature.shape[0])
        for name in ("feature", "split_code", "kind", "left", "right", "value"):
            old = getattr(self, name)
            grown = np.full(new_cap, _LEAF, dtype=old.dtype) \
                if name == "feature" else np.zeros(new_cap, dtype=old.dtype)
            grown[: self.n_nodes] = old[: self.n_nodes]
            setattr(self, name, grown)


def _grow_tree(
    arena: _TreeArena,
    codes: NDArray[np.uint8],
    offsets: NDArray[np.int64],
    kinds: NDArray[np.uint8],
    g: NDArray[np.float64],
    h: NDArray[np.float64],
    w: NDArray[np.float64],
    max_depth: int,
    min_leaf: float,
    lam: float,
    node_of_row: NDArray[np.int64],
) -> tuple[int, NDArray[np.int64]]:
    """Grow one tree level-wise; returns (root id, leaf id per row)."""
    total_bins = int(offsets[-1])
    arena.ensure(1)
    root = arena.n_nodes
    arena.n_nodes += 1
    node_of_row.fill(root)

    level = [root]
    # root histogram, plus per-node totals carried level to level
    hist = {}
    hg = np.zeros((1, total_bins))
    hh = np.zeros((1, total_bins))
    hw = np.zeros((1, total_bins))
    build_slot = np.zeros(1, dtype=np.int64)
    _accumulate_histograms(codes, offsets, g, h, w, node_of_row,
                           root, root + 1, build_slot, hg, hh, hw)
    hist[root] = (hg[0], hh[0], hw[0])

    for depth in range(max_depth):
        k = len(level)
        if k == 0:
            break
        node_lo, node_hi = level[0], level[-1] + 1
        stack_g = np.empty((k, total_bins))
        stack_h = np.empty((k, total_bins))
        stack_w = np.empty((k, total_bins))
        for slot, node in enumerate(level):
            stack_g[slot] = hist[node][0]
            stack_h[slot] = hist[node][1]
            stack_w[slot] = hist[node][2]
        out_feat = np.empty(k, dtype=np.int64)
        out_code = np.empty(k, dtype=np.int64)
        out_gain = np.empty(k)
        out_gl = np.empty(k)
        out_hl = np.empty(k)
        out_wl = np.empty(k)
        _best_splits(stack_g, stack_h, stack_w, offsets, kinds, lam,
                     min_leaf, out_feat, out_code, out_gain,
                     out_gl, out_hl, out_wl)

        to_split = [slot for slot in range(k) if out_feat[slot] >= 0]
        for node in level:
            # leaf value in case the node does not split
            gh = hist[node]
            g_tot = gh[0][offsets[0]:offsets[1]].sum()
            h_tot = gh[1][offsets[0]:offsets[1]].sum()
            arena.value[node] = -g_tot / (h_tot + lam)
        if not to_split:
            for node in level:
                del hist[node]
            break

        arena.ensure(2 * len(to_split))
        next_level = []
        small_children = []
        child_meta = []
        for slot in to_split:
            node = level[slot]
            lid = arena.n_nodes
            rid = arena.n_nodes + 1
            arena.n_nodes += 2
            arena.feature[node] = out_feat[slot]
            arena.split_code[node] = out_code[slot]
            arena.kind[node] = kinds[out_feat[slot]]
            arena.left[node] = lid
            arena.right[node] = rid
            arena.feature[lid] = _LEAF
            arena.feature[rid] = _LEAF
            next_level.extend((lid, rid))
            child_meta.append((node, lid, rid, out_gl[slot], out_hl[slot],
                               out_wl[slot]))

        _route_rows(codes, node_of_row, node_lo, node_hi,
                    arena.feature, arena.split_code, arena.kind,
                    arena.left, arena.right)

        # build histogram for the lighter child; derive the other
        child_lo, child_hi = next_level[0], next_level[-1] + 1
        build_slot = np.full(child_hi - child_lo, -1, dtype=np.int64)
        slot_count = 0
        for node, lid, rid, gl, hl, wl in child_meta:
            parent_tot = hist[node][2][offsets[0]:offsets[1]].sum()
            small = lid if wl <= parent_tot - wl else rid
            build_slot[small - child_lo] = slot_count
            small_children.append(small)
            slot_count += 1
        hg = np.zeros((slot_count, total_bins))
        hh = np.zeros((slot_count, total_bins))
        hw = np.zeros((slot_count, total_bins))
        _accumulate_histograms(codes, offsets, g, h, w, node_of_row,
                               child_lo, child_hi, build_slot, hg, hh, hw)
        for idx, (node, lid, rid, gl, hl, wl) in enumerate(child_meta):
            small = small_children[idx]
            big = rid if small == lid else lid
            pg, ph, pw = hist.pop(node)
            hist[small] = (hg[idx], hh[idx], hw[idx])
            hist[big] = (pg - hg[idx], ph - hh[idx], pw - hw[idx])

        for slot, node in enumerate(level):
            if out_feat[slot] < 0 and node in hist:
                del hist[node]
        level = next_level

    for node in list(hist):
        gh = hist.pop(node)
        g_tot = gh[0][offsets[0]:offsets[1]].sum()
        h_tot = gh[1][offsets[0]:offsets[1]].sum()
        arena.value[node] = -g_tot / (h_tot + lam)
    return root, node_of_row


# --------------------------------------------------------------------
# Public models
# --------------------------------------------------------------------

@dataclass
class TreeEnsembleModel:
    """Immutable fitted ensemble; prediction needs the matching binner."""

    kind: str                 # "bagged" | "boosted"
    task: str                 # "regression" | "binary"
    binner: TreeBinner
    feature: NDArray[np.int64]
    split_code: NDArray[np.int64]
    split_kind: NDArray[np.uint8]
    left: NDArray[np.int64]
    right: NDArray[np.int64]
    value: NDArray[np.float64]
    roots: NDArray[np.int64]
    scale: float              # 1/n_trees for bagged, eta for boosted
    base_score: float

    def _raw(self, codes: NDArray[np.uint8]) -> NDArray[np.float64]:
        out = np.empty(codes.shape[0])
        _predict_ensemble(codes, self.feature, self.split_code,
                          self.split_kind, self.left, self.right, self.value,
                          self.roots, self.scale, self.base_score, out)
        return out

    def _codes_for(self, data) -> NDArray[np.uint8]:
        if isinstance(data, np.ndarray) and data.dtype == np.uint8:
            return data
        return self.binner.transform(data)

    def predict(self, data) -> NDArray[np.float64]:
        raw = self._raw(self._codes_for(data))
        if self.task == "binary" and self.kind == "boosted":
            return 1.0 / (1.0 + np.exp(-raw))
        if self.task == "binary":
            return np.clip(raw, 0.0, 1.0)
        return raw

    def predict_proba(self, data) -> NDArray[np.float64]:
        if self.task != "binary":
            raise ValueError("predict_proba requires a binary-task ensemble")
        p = self.predict(data)
        return np.column_stack([1.0 - p, p])


def _bootstrap_weights(n: int, seed: int, tree: int) -> NDArray[np.float64]:
    key = np.array([seed, tree], dtype=np.uint64)
    rng = np.random.Generator(np.random.Philox(key=key))
    picks = rng.integers(0, n, size=n)
    return np.bincount(picks, minlength=n).astype(np.float64)


def fit_bagged_trees(
    frame: pd.DataFrame,
    y: NDArray[np.float64],
    variables: Sequence[VariableSchema],
    n_trees: int = 50,
    max_depth: int = 24,
    min_samples_leaf: int = 5,
    seed: int = 0,
    classification: bool = False,
    max_bins: int = 64,
) -> TreeEnsembleModel:
    """Bootstrap-aggregated regression trees (class probabilities are
    leaf means when ``classification`` is set)."""
    y = np.asarray(y, dtype=float)
    if len(frame) != y.shape[0]:
        raise ValueError("frame and y length mismatch")
    if y.shape[0] < 2 * min_samples_leaf:
        raise DataError(
            f"need at least {2 * min_samples_leaf} rows to honor "
            f"min_samples_leaf={min_samples_leaf}"
        )
    binner = TreeBinner(variables, max_bins=max_bins)
    codes = binner.fit_transform(frame)
    n = codes.shape[0]
    offsets = np.concatenate([[0], np.cumsum(binner.bin_counts)]).astype(np.int64)
    kinds = binner.feature_kinds
    arena = _TreeArena(capacity=max(64, 2 * n_trees * (n // max(min_samples_leaf, 1) + 2)))
    roots = np.empty(n_trees, dtype=np.int64)
    node_of_row = np.empty(n, dtype=np.int64)
    for t in range(n_trees):
        w = _bootstrap_weights(n, seed, t)
        g = -y * w
        root, _ = _grow_tree(arena, codes, offsets, kinds, g, w, w,
                             max_depth, float(min_samples_leaf), 0.0,
                             node_of_row)
        roots[t] = root
    size = arena.n_nodes
    return TreeEnsembleModel(
        kind="bagged",
        task="binary" if classification else "regression",
        binner=binner,
        feature=arena.feature[:size].copy(),
        split_code=arena.split_code[:size].copy(),
        split_kind=arena.kind[:size].copy(),
        left=arena.left[:size].copy(),
        right=arena.right[:size].copy(),
        value=arena.value[:size].copy(),
        roots=roots,
        scale=1.0 / n_trees,
        base_score=0.0,
    )


def fit_boosted_trees(
    frame: pd.DataFrame,
    y: NDArray[np.float64],
    variables: Sequence[VariableSchema],
    n_rounds: int = 50,
    eta: float = 0.3,
    max_depth: int = 6,
    min_samples_leaf: int = 1,
    reg_lambda: float = 1.0,
    classification: bool = False,
    sample_weight: NDArray[np.float64] | None = None,
    max_bins: int = 64,
) -> TreeEnsembleModel:
    """Gradient-boosted trees: squared error for regression, logistic
    loss for binary classification."""
    y = np.asarray(y, dtype=float)
    if len(frame) != y.shape[0]:
        raise ValueError("frame and y length mismatch")
    n = y.shape[0]
    if n < 2:
        raise DataError("need at least 2 rows to boost")
    if sample_weight is None:
        w = np.ones(n)
    else:
        w = np.asarray(sample_weight, dtype=float)
        if w.shape != (n,) or np.any(w < 0):
            raise ValueError("sample_weight must be non-negative, one per row")
        if w.sum() <= 0:
            raise DataError("all sample weights are zero")
    if classification and not np.all(np.isin(y, (0.0, 1.0))):
        raise DataError("boosted classification expects 0/1 labels")

    binner = TreeBinner(variables, max_bins=max_bins)
    codes = binner.fit_transform(frame)
    offsets = np.concatenate([[0], np.cumsum(binner.bin_counts)]).astype(np.int64)
    kinds = binner.feature_kinds

    if classification:
        rate = float(np.average(y, weights=w))
        rate = min(max(rate, 1e-9), 1.0 - 1e-9)
        base = float(np.log(rate / (1.0 - rate)))
    else:
        base = float(np.average(y, weights=w))

    F = np.full(n, base)
    arena = _TreeArena(capacity=max(64, n_rounds * (2 ** min(max_depth + 1, 12))))
    roots = np.empty(n_rounds, dtype=np.int64)
    node_of_row = np.empty(n, dtype=np.int64)
    for t in range(n_rounds):
        if classification:
            p = 1.0 / (1.0 + np.exp(-F))
            g = w * (p - y)
            h = w * np.maximum(p * (1.0 - p), 1e-9)
        else:
            g = w * (F - y)
            h = w.copy()
        root, leaf_of_row = _grow_tree(
            arena, codes, offsets, kinds, g, h, w,
            max_depth, float(min_samples_leaf), reg_lambda, node_of_row,
        )
        roots[t] = root
        F += eta * arena.value[leaf_of_row]
    size = arena.n_nodes
    return TreeEnsembleModel(
        kind="boosted",
        task="binary" if classification else "regression",
        binner=binner,
        feature=arena.feature[:size].copy(),
        split_code=arena.split_code[:size].copy(),
        split_kind=arena.kind[:size].copy(),
        left=arena.left[:size].copy(),
        right=arena.right[:size].copy(),
        value=arena.value[:size].copy(),
        roots=roots,
        scale=eta,
        base_score=base,
    )
