"""Integer and set partitions, diversity indices and the reverse dominance order.

Integer partitions are stored nonincreasing.  ``a ≺ b`` (``OrderResult.LESS``)
means ``b`` is the more balanced shape: every partial sum of ``b`` is at most
the corresponding partial sum of ``a``.  The order is only defined between
shapes with the same ``n`` and the same number of parts ``k``.
"""

from __future__ import annotations

import enum
import math
from collections import Counter
from dataclasses import dataclass
from itertools import accumulate
from typing import Iterator, NamedTuple, Sequence

MAX_SET_PARTITION_N = 13


class OrderResult(enum.Enum):
    LESS = "less"
    GREATER = "greater"
    EQUAL = "equal"
    INCOMPARABLE = "incomparable"

    def flipped(self) -> "OrderResult":
        if self is OrderResult.LESS:
            return OrderResult.GREATER
        if self is OrderResult.GREATER:
            return OrderResult.LESS
        return self


class CoverTag(enum.Enum):
    STAR = "*"  # the two moved parts are adjacent, v = u + 1
    STARSTAR = "**"  # the two moved parts become equal
    BOTH = "both"


class Cover(NamedTuple):
    covers: bool
    tag: CoverTag | None = None
    s: int | None = None  # common value of the moved parts for (**) covers

    def __bool__(self) -> bool:
        return self.covers


@dataclass(frozen=True, order=False)
class IntegerPartition:
    parts: tuple[int, ...]

    def __post_init__(self):
        parts = tuple(int(p) for p in self.parts)
        object.__setattr__(self, "parts", parts)
        if not parts:
            raise ValueError("an integer partition needs at least one part")
        if parts[-1] < 1:
            raise ValueError(f"parts must be positive: {parts}")
        if any(parts[i] < parts[i + 1] for i in range(len(parts) - 1)):
            raise ValueError(f"parts must be nonincreasing: {parts}")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int]) -> "IntegerPartition":
        return cls(tuple(sorted((int(s) for s in sizes), reverse=True)))

    @property
    def n(self) -> int:
        return sum(self.parts)

    @property
    def k(self) -> int:
        return len(self.parts)

    def multiplicities(self) -> dict[int, int]:
        """m_i = number of parts equal to i."""
        return dict(Counter(self.parts))

    def label(self) -> str:
        return "-".join(str(p) for p in self.parts)

    def __iter__(self):
        return iter(self.parts)

    def __len__(self) -> int:
        return len(self.parts)

    def __repr__(self) -> str:
        return f"IntegerPartition{self.parts}"


@dataclass(frozen=True)
class SetPartition:
    """Partition of {0, ..., n-1} stored as canonical first-appearance labels."""

    labels: tuple[int, ...]

    def __post_init__(self):
        labels = tuple(int(x) for x in self.labels)
        object.__setattr__(self, "labels", labels)
        top = -1
        for x in labels:
            if x < 0 or x > top + 1:
                raise ValueError(f"labels are not in canonical first-appearance form: {labels}")
            top = max(top, x)

    @classmethod
    def from_labels(cls, labels: Sequence[int]) -> "SetPartition":
        """Canonicalize arbitrary cluster ids."""
        remap: dict[int, int] = {}
        out = []
        for x in labels:
            if x not in remap:
                remap[x] = len(remap)
            out.append(remap[x])
        return cls(tuple(out))

    @classmethod
    def from_blocks(cls, blocks: Sequence[Sequence[int]], n: int | None = None) -> "SetPartition":
        if n is None:
            n = sum(len(b) for b in blocks)
        labels = [-1] * n
        for j, block in enumerate(blocks):
            if not block:
                raise ValueError("blocks must be nonempty")
            for i in block:
                if labels[i] != -1:
                    raise ValueError(f"index {i} appears in more than one block")
                labels[i] = j
        if -1 in labels:
            raise ValueError("blocks do not cover every index")
        return cls.from_labels(labels)

    @property
    def n(self) -> int:
        return len(self.labels)

    @property
    def k(self) -> int:
        return max(self.labels) + 1 if self.labels else 0

    @property
    def blocks(self) -> list[tuple[int, ...]]:
        out: list[list[int]] = [[] for _ in range(self.k)]
        for i, x in enumerate(self.labels):
            out[x].append(i)
        return [tuple(b) for b in out]

    def shape(self) -> IntegerPartition:
        return IntegerPartition.from_sizes(Counter(self.labels).values())


def _check_same_space(a: IntegerPartition, b: IntegerPartition) -> None:
    if a.n != b.n or a.k != b.k:
        raise ValueError(
            f"shapes must share n and k to be ordered: {a.parts} vs {b.parts}"
        )


def _partitions_exact_k(n: int, k: int, largest: int) -> Iterator[tuple[int, ...]]:
    if k == 1:
        if n <= largest:
            yield (n,)
        return
    top = min(largest, n - (k - 1))
    bottom = -(-n // k)
    for first in range(top, bottom - 1, -1):
        for rest in _partitions_exact_k(n - first, k - 1, first):
            yield (first,) + rest


def enumerate_integer_partitions(n: int, k: int | None = None) -> list[IntegerPartition]:
    """All partitions of n (into exactly k parts if given), lexicographically descending."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if k is not None and not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    if k is not None:
        return [IntegerPartition(p) for p in _partitions_exact_k(n, k, n)]
    shapes = [p for kk in range(1, n + 1) for p in _partitions_exact_k(n, kk, n)]
    shapes.sort(reverse=True)
    return [IntegerPartition(p) for p in shapes]


def shannon_index(p: IntegerPartition) -> float:
    n = p.n
    return -math.fsum((x / n) * math.log(x / n) for x in p.parts)


def gini_simpson_index(p: IntegerPartition) -> float:
    n = p.n
    return 1.0 - math.fsum((x / n) ** 2 for x in p.parts)


def dominance_compare(a: IntegerPartition, b: IntegerPartition) -> OrderResult:
    _check_same_space(a, b)
    if a.parts == b.parts:
        return OrderResult.EQUAL
    a_ge = b_ge = True
    for sa, sb in zip(accumulate(a.parts), accumulate(b.parts)):
        if sa < sb:
            a_ge = False
        elif sa > sb:
            b_ge = False
    if a_ge:
        return OrderResult.LESS
    if b_ge:
        return OrderResult.GREATER
    return OrderResult.INCOMPARABLE


def one_step_downshifts(a: IntegerPartition) -> list[IntegerPartition]:
    parts = a.parts
    seen = set()
    for u in range(len(parts)):
        for v in range(u + 1, len(parts)):
            if parts[u] - 1 >= parts[v] + 1:
                moved = list(parts)
                moved[u] -= 1
                moved[v] += 1
                seen.add(tuple(sorted(moved, reverse=True)))
    return [IntegerPartition(p) for p in sorted(seen, reverse=True)]


def covers(a: IntegerPartition, b: IntegerPartition) -> Cover:
    """Whether b covers a in (ℐ_n^k, ≺), and which covering case applies."""
    _check_same_space(a, b)
    ca, cb = Counter(a.parts), Counter(b.parts)
    lost = sorted((ca - cb).elements(), reverse=True)
    gained = sorted((cb - ca).elements(), reverse=True)
    if len(lost) != 2 or len(gained) != 2:
        return Cover(False)
    x, y = lost
    if x - 1 < y + 1 or sorted([x - 1, y + 1], reverse=True) != gained:
        return Cover(False)
    u = max(i for i, p in enumerate(a.parts) if p == x)
    v = min(i for i, p in enumerate(a.parts) if p == y)
    star = v == u + 1
    starstar = x - 1 == y + 1
    if star and starstar:
        return Cover(True, CoverTag.BOTH, x - 1)
    if starstar:
        return Cover(True, CoverTag.STARSTAR, x - 1)
    if star:
        return Cover(True, CoverTag.STAR, None)
    return Cover(False)


def shape_multiplicity(a: IntegerPartition) -> int:
    """Number of set partitions of [n] whose block sizes are ``a``."""
    denom = 1
    for size, m in a.multiplicities().items():
        denom *= math.factorial(size) ** m * math.factorial(m)
    return math.factorial(a.n) // denom


def restricted_growth_strings(n: int) -> Iterator[tuple[int, ...]]:
    """Canonical label vectors of every set partition of [n], lexicographic order."""
    if n < 1:
        raise ValueError("n must be a positive integer")
    if n > MAX_SET_PARTITION_N:
        raise ValueError(
            f"n={n} exceeds the exhaustive-enumeration guard of {MAX_SET_PARTITION_N}"
        )
    a = [0] * n
    pmax = [0] * n  # pmax[i] = max(a[: i + 1])
    while True:
        yield tuple(a)
        i = n - 1
        while i > 0 and a[i] == pmax[i - 1] + 1:
            i -= 1
        if i == 0:
            return
        a[i] += 1
        pmax[i] = max(pmax[i - 1], a[i])
        for j in range(i + 1, n):
            a[j] = 0
            pmax[j] = pmax[i]


def enumerate_set_partitions(n: int) -> Iterator[SetPartition]:
    for labels in restricted_growth_strings(n):
        yield SetPartition(labels)


def set_partition_shape_counts(n: int) -> Counter:
    """Shape -> number of set partitions, by walking every set partition of [n]."""
    counts: Counter = Counter()
    for labels in restricted_growth_strings(n):
        sizes = Counter(labels).values()
        counts[tuple(sorted(sizes, reverse=True))] += 1
    return Counter({IntegerPartition(k): v for k, v in counts.items()})
