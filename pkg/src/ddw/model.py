"""Problem data for block-angular LPs, column pools and primal evaluation.

An instance is

    min  sum_n c_n . x_n
    s.t. sum_n A_n x_n  (= or >=)  t        (linking rows)
         B_n x_n <= b_n,  lower_n <= x_n <= upper_n   for every block n
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ddw.errors import DdwError, DimensionError

FORMAT_VERSION = 1
DEDUP_DECIMALS = 9


class Sense(str, enum.Enum):
    EQ = "E"
    GE = "G"


def _as_matrix(a, ncols: int) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 2:
        return a
    if a.size == 0:
        return np.zeros((0, ncols))
    return a.reshape(-1, ncols)


@dataclass(frozen=True)
class BlockData:
    c: np.ndarray
    B: np.ndarray
    b: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    A: np.ndarray

    def __post_init__(self):
        for name in ("c", "b", "lower", "upper"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float).reshape(-1))
        for name in ("B", "A"):
            object.__setattr__(self, name, _as_matrix(getattr(self, name), self.c.size))
        for arr in (self.c, self.B, self.b, self.lower, self.upper, self.A):
            arr.flags.writeable = False

    @property
    def dim(self) -> int:
        return self.c.size

    @property
    def dual_bound(self) -> float:
        """Heuristic bound M_n = 10 ||c_n|| on the linking duals of this block."""
        return 10.0 * float(np.linalg.norm(self.c))


@dataclass(frozen=True)
class BlockAngularInstance:
    t: np.ndarray
    senses: tuple
    blocks: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(-1)
        t.flags.writeable = False
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "senses", tuple(Sense(s) for s in self.senses))
        object.__setattr__(self, "blocks", tuple(self.blocks))

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def num_links(self) -> int:
        return len(self.senses)

    @property
    def num_vars(self) -> int:
        return sum(blk.dim for blk in self.blocks)

    @property
    def seed(self):
        return self.metadata.get("seed")


@dataclass(frozen=True)
class Column:
    """An extreme point of a block polytope with its cached images."""

    block_id: int
    x: np.ndarray
    cost: float
    link: np.ndarray
    link_norm: float

    @classmethod
    def from_point(cls, block_id: int, block: BlockData, x) -> "Column":
        x = np.array(x, dtype=float).reshape(-1)
        link = block.A @ x
        return cls(block_id, x, float(block.c @ x), link, float(np.linalg.norm(link)))


def _dedup_key(x: np.ndarray) -> bytes:
    # +0.0 folds negative zeros produced by rounding tiny negatives
    return (np.round(x, DEDUP_DECIMALS) + 0.0).tobytes()


class ColumnPool:
    """Append-only set of columns for one block, deduplicated on rounded x."""

    def __init__(self, block_id: int):
        self.block_id = block_id
        self.columns: list[Column] = []
        self._keys: set[bytes] = set()

    def __len__(self):
        return len(self.columns)

    def __iter__(self):
        return iter(self.columns)

    def __getitem__(self, i):
        return self.columns[i]

    def contains(self, x) -> bool:
        return _dedup_key(np.asarray(x, dtype=float)) in self._keys

    def add(self, column: Column) -> bool:
        """Append ``column``; return False (and store nothing) for a duplicate."""
        if column.block_id != self.block_id:
            raise DimensionError(f"column of block {column.block_id} offered to pool {self.block_id}")
        key = _dedup_key(column.x)
        if key in self._keys:
            return False
        self._keys.add(key)
        self.columns.append(column)
        return True

    def costs(self) -> np.ndarray:
        return np.array([col.cost for col in self.columns])

    def links(self) -> np.ndarray:
        """Matrix whose rows are the linking images A_n x^i."""
        if not self.columns:
            return np.zeros((0, 0))
        return np.vstack([col.link for col in self.columns])

    def points(self) -> np.ndarray:
        return np.vstack([col.x for col in self.columns])

    def max_link_norm(self) -> float:
        return max(col.link_norm for col in self.columns)


def validate(instance: BlockAngularInstance) -> list[str]:
    """Return a list of human-readable defects; empty means well-formed."""
    defects = []
    m = instance.num_links
    if m == 0:
        defects.append("instance has no linking rows")
    if instance.num_blocks == 0:
        defects.append("instance has no blocks")
    if instance.t.size != m:
        defects.append(f"t has length {instance.t.size}, expected {m} (one per linking row)")
    if not np.all(np.isfinite(instance.t)):
        defects.append("t contains NaN/Inf")
    for n, blk in enumerate(instance.blocks):
        d = blk.dim
        if d == 0:
            defects.append(f"block {n}: no variables")
            continue
        if blk.A.shape != (m, d):
            defects.append(f"block {n}: A has shape {blk.A.shape}, expected {(m, d)}")
        if blk.B.shape[0] != blk.b.size:
            defects.append(f"block {n}: B has {blk.B.shape[0]} rows but b has length {blk.b.size}")
        if blk.lower.size != d or blk.upper.size != d:
            defects.append(f"block {n}: bounds have lengths {blk.lower.size}/{blk.upper.size}, expected {d}")
        else:
            if np.any(blk.lower > blk.upper):
                bad = np.flatnonzero(blk.lower > blk.upper).tolist()
                defects.append(f"block {n}: inverted bounds lower > upper at {bad}")
            if not (np.all(np.isfinite(blk.lower)) and np.all(np.isfinite(blk.upper))):
                defects.append(f"block {n}: bounds must be finite")
        for name in ("c", "B", "b", "A"):
            if not np.all(np.isfinite(getattr(blk, name))):
                defects.append(f"block {n}: {name} contains NaN/Inf")
    return defects


def evaluate_primal(instance: BlockAngularInstance, x_hat) -> tuple[float, np.ndarray]:
    """Objective sum_n c_n.x_n and linking residual sum_n A_n x_n - t."""
    if len(x_hat) != instance.num_blocks:
        raise DimensionError(f"expected {instance.num_blocks} block vectors, got {len(x_hat)}")
    objective = 0.0
    residual = -instance.t.copy()
    for n, (blk, x) in enumerate(zip(instance.blocks, x_hat)):
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != blk.dim:
            raise DimensionError(f"block {n}: x has length {x.size}, expected {blk.dim}")
        objective += float(blk.c @ x)
        residual += blk.A @ x
    return objective, residual


# -- JSON instance format ------------------------------------------------


def instance_to_dict(instance: BlockAngularInstance) -> dict:
    meta = instance.metadata
    return {
        "version": FORMAT_VERSION,
        "seed": meta.get("seed"),
        "generator": meta.get("generator"),
        "prng": meta.get("prng"),
        "N": instance.num_blocks,
        "m": instance.num_links,
        "senses": [s.value for s in instance.senses],
        "t": instance.t.tolist(),
        "blocks": [
            {
                "c": blk.c.tolist(),
                "B": blk.B.tolist(),
                "b": blk.b.tolist(),
                "lower": blk.lower.tolist(),
                "upper": blk.upper.tolist(),
                "A": blk.A.tolist(),
            }
            for blk in instance.blocks
        ],
    }


def dumps_instance(instance: BlockAngularInstance) -> str:
    # json writes floats with repr(), i.e. shortest round-trip digits
    return json.dumps(instance_to_dict(instance), separators=(",", ":"), allow_nan=False)


def instance_from_dict(doc: dict) -> BlockAngularInstance:
    if doc.get("version") != FORMAT_VERSION:
        raise DdwError(f"unsupported instance format version {doc.get('version')!r}")
    blocks = []
    for raw in doc["blocks"]:
        d = len(raw["c"])
        B = np.array(raw["B"], dtype=float).reshape(-1, d)
        A = np.array(raw["A"], dtype=float).reshape(-1, d)
        blocks.append(BlockData(raw["c"], B, raw["b"], raw["lower"], raw["upper"], A))
    meta = {k: doc.get(k) for k in ("seed", "generator", "prng")}
    inst = BlockAngularInstance(doc["t"], doc["senses"], blocks, meta)
    if inst.num_blocks != doc.get("N", inst.num_blocks) or inst.num_links != doc.get("m", inst.num_links):
        raise DimensionError("N/m header disagrees with the block data")
    return inst


def loads_instance(text: str) -> BlockAngularInstance:
    return instance_from_dict(json.loads(text))


def save_instance(instance: BlockAngularInstance, path) -> None:
    Path(path).write_text(dumps_instance(instance), encoding="utf-8")


def load_instance(path) -> BlockAngularInstance:
    return loads_instance(Path(path).read_text(encoding="utf-8"))
