"""Reference query tables for the two worked examples and a structural diff.

Cells use a canonical notation: ``s`` is the fresh pad of a layer-2
subquery, ``uJ`` a layer-1 pad, ``eT`` the unit vector of stripe T of the
requested file, ``-`` an unresponsive node.  Layer-1 columns are compared in
order; layer-2 columns as a multiset, since only their membership matters.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .base_pir import Composition, Subquery
from .config import SystemConfig
from .robust_pir import session_plan

# (4,2) code over GF(3): layer 1 then the layer-2 column for each single failure.
EXAMPLE1_LAYER1 = [{1: "u1", 2: "u1", 3: "u1+e1", 4: "u1+e1"}]
EXAMPLE1_LAYER2 = {
    (1,): [{1: "-", 2: "s", 3: "s+u1", 4: "s"}],
    (2,): [{1: "s", 2: "-", 3: "s+u1", 4: "s"}],
    (3,): [{1: "s+e1", 2: "s", 3: "-", 4: "s"}],
    (4,): [{1: "s+e1", 2: "s", 3: "s", 4: "-"}],
}

# (5,2) code over GF(5), file 1.
EXAMPLE2_LAYER1 = [
    {1: "u1+e1", 2: "u1", 3: "u1+e2", 4: "u1+e2", 5: "u1"},
    {1: "u2", 2: "u2+e1", 3: "u2+e3", 4: "u2+e3", 5: "u2"},
]
EXAMPLE2_LAYER2 = {
    (1,): [{1: "-", 2: "s+u2", 3: "s+e1", 4: "s", 5: "s"}],
    (2,): [{1: "s+u1", 2: "-", 3: "s+e1", 4: "s", 5: "s"}],
    (3,): [{1: "s+e2", 2: "s+e3", 3: "-", 4: "s", 5: "s"}],
    (4,): [{1: "s+e2", 2: "s+e3", 3: "s", 4: "-", 5: "s"}],
    (5,): [{1: "s+u1", 2: "s+u2", 3: "s", 4: "s", 5: "-"}],
    (1, 3): [
        {1: "-", 2: "s", 3: "-", 4: "s+e1", 5: "s"},
        {1: "-", 2: "s", 3: "-", 4: "s+u2", 5: "s"},
        {1: "-", 2: "s+e2", 3: "-", 4: "s", 5: "s"},
        {1: "-", 2: "s+e3", 3: "-", 4: "s", 5: "s"},
    ],
}

EXAMPLES = {
    1: (SystemConfig(4, 2, 3, 2, 1), 1, EXAMPLE1_LAYER1, EXAMPLE1_LAYER2),
    2: (SystemConfig(5, 2, 5, 2, 2), 1, EXAMPLE2_LAYER1, EXAMPLE2_LAYER2),
}

CLASSES = ("pure-pad", "pad+e", "pad+pad", "none")


def cell_class(cell: str) -> str:
    if cell == "-":
        return "none"
    if "+e" in cell:
        return "pad+e"
    if "+" in cell:
        return "pad+pad"
    return "pure-pad"


def cell_label(c: Composition, sq: Subquery, unit_offset: int) -> str:
    parts = ["s" if (sq.layer == 2 and p == sq.pad) else f"u{p}"
             for p in sorted(c.pads, key=lambda p: (p != sq.pad or sq.layer == 1, -p))]
    parts += [f"e{t - unit_offset}" for t in c.units]
    return "+".join(parts)


def render_column(sq: Subquery, n: int, unit_offset: int) -> dict[int, str]:
    return {i: cell_label(sq.queries[i], sq, unit_offset) if i in sq.queries else "-"
            for i in range(1, n + 1)}


@dataclass
class TableDiff:
    name: str
    cells: Counter  # class -> cells compared
    mismatches: Counter  # class -> cells differing
    produced: list[dict[int, str]]
    expected: list[dict[int, str]]

    @property
    def passed(self) -> bool:
        return not sum(self.mismatches.values())

    def lines(self) -> list[str]:
        out = []
        for cls in CLASSES:
            if self.cells[cls]:
                ok = self.cells[cls] - self.mismatches[cls]
                verdict = "PASS" if not self.mismatches[cls] else "FAIL"
                out.append(f"{self.name:<24} {cls:<9} {ok}/{self.cells[cls]} {verdict}")
        return out


def _compare(name: str, produced, expected, ordered: bool) -> TableDiff:
    def key(col):
        return tuple(sorted(col.items()))

    if not ordered:
        produced = sorted(produced, key=key)
        expected = sorted(expected, key=key)
    cells: Counter = Counter()
    bad: Counter = Counter()
    for i in range(max(len(produced), len(expected))):
        exp = expected[i] if i < len(expected) else {}
        got = produced[i] if i < len(produced) else {}
        for node in sorted(set(exp) | set(got)):
            want = exp.get(node, "?")
            cls = cell_class(want) if want != "?" else cell_class(got[node])
            cells[cls] += 1
            if got.get(node) != want:
                bad[cls] += 1
    return TableDiff(name, cells, bad, produced, expected)


def repro(example: int, failures=None) -> list[TableDiff]:
    """Diff the planner's output against the reference tables of ``example``."""
    config, f, layer1, layer2 = EXAMPLES[example]
    offset = (f - 1) * config.alpha
    base = session_plan(config, f, ())
    diffs = [_compare(f"example{example} layer1",
                      [render_column(sq, config.n, offset) for sq in base.layer1], layer1, True)]
    for U, expected in layer2.items():
        if failures is not None and tuple(sorted(failures)) != U:
            continue
        plan = session_plan(config, f, U)
        cols = []
        for sq in plan.layer2:
            col = render_column(sq, config.n, offset)
            col.update({x: "-" for x in U})
            cols.append(col)
        label = ",".join(map(str, U))
        diffs.append(_compare(f"example{example} U={{{label}}}", cols, expected, False))
    return diffs
