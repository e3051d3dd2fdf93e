"""Index-range partitions for block-diagonal LD structure.

Ranges are 1-based inclusive (start, end) pairs covering 1..p without gaps.
Mapping genomic coordinates to variant indices is the caller's job; this
module only does partition algebra.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import DataError


@dataclass(frozen=True)
class BlockPartition:
    """Ordered disjoint 1-based inclusive ranges whose union is 1..p."""

    ranges: tuple[tuple[int, int], ...]
    label: str = ""

    def __post_init__(self):
        rs = tuple((int(a), int(b)) for a, b in self.ranges)
        object.__setattr__(self, "ranges", rs)
        if not rs:
            raise DataError("partition needs at least one range")
        expected_start = 1
        for start, end in rs:
            if start != expected_start:
                raise DataError(
                    f"ranges must be sorted, disjoint and contiguous; "
                    f"expected start {expected_start}, got {start}"
                )
            if end < start:
                raise DataError(f"empty range ({start}, {end})")
            expected_start = end + 1

    @property
    def p(self) -> int:
        return self.ranges[-1][1]

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(end - start + 1 for start, end in self.ranges)

    def __len__(self) -> int:
        return len(self.ranges)

    def slices(self) -> list[slice]:
        """0-based numpy column slices, one per range."""
        return [slice(start - 1, end) for start, end in self.ranges]

    @classmethod
    def from_sizes(cls, sizes, label: str = "") -> "BlockPartition":
        ranges = []
        start = 1
        for s in sizes:
            ranges.append((start, start + int(s) - 1))
            start += int(s)
        return cls(tuple(ranges), label=label)

    @classmethod
    def single(cls, p: int, label: str = "") -> "BlockPartition":
        return cls(((1, int(p)),), label=label)


def merge_ld_blocks(a: BlockPartition, b: BlockPartition) -> BlockPartition:
    """Coarsest partition refined by both inputs.

    A boundary survives only if both partitions cut there, which is exactly
    the connected-components-of-overlapping-intervals construction: variants
    in two different merged blocks are separated in both inputs.
    """
    if a.p != b.p:
        raise DataError(f"partitions cover different index ranges: 1..{a.p} vs 1..{b.p}")
    cuts_a = {end for _, end in a.ranges[:-1]}
    cuts_b = {end for _, end in b.ranges[:-1]}
    cuts = sorted(cuts_a & cuts_b)
    ranges = []
    start = 1
    for c in cuts:
        ranges.append((start, c))
        start = c + 1
    ranges.append((start, a.p))
    return BlockPartition(tuple(ranges), label=f"merge({a.label},{b.label})")


def read_block_file(path) -> BlockPartition:
    """Parse a block-spec text file: one `start<TAB>end` line per block.

    Lines starting with `#` and blank lines are ignored.
    """
    ranges = []
    with open(path, "rt", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected `start<TAB>end`, got {line!r}")
            try:
                ranges.append((int(parts[0]), int(parts[1])))
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: non-integer bounds in {line!r}") from exc
    try:
        return BlockPartition(tuple(ranges), label=str(path))
    except DataError as exc:
        raise DataError(f"{path}: {exc}") from exc


def write_block_file(partition: BlockPartition, path) -> None:
    with open(path, "wt", encoding="utf-8") as fh:
        fh.write(f"# {len(partition)} blocks covering 1..{partition.p}\n")
        for start, end in partition.ranges:
            fh.write(f"{start}\t{end}\n")
