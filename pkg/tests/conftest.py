import os

import numpy as np
import pytest

from fairsfs.dataset import ColumnMeta, DataTable
from fairsfs.oracle import BayesNet, load_network

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
DATA = os.path.join(ROOT, "data")


def table_from_columns(columns, sensitive=None, target=None):
    """DataTable from ``{name: int codes}``; cardinality is max code + 1 (at least 2)."""
    names = list(columns)
    codes = np.vstack([np.asarray(columns[n], dtype=np.int64) for n in names])
    metas = [ColumnMeta(n, tuple(str(i) for i in range(max(2, int(codes[j].max()) + 1))))
             for j, n in enumerate(names)]
    s = names.index(sensitive) if sensitive else None
    t = names.index(target) if target else None
    return DataTable(codes, metas, s, t)


def net(nodes, sensitive=None, target=None):
    """BayesNet from ``[(name, parents, cpt rows), ...]`` with binary nodes."""
    names = [n for n, _, _ in nodes]
    parents = [[names.index(p) for p in ps] for _, ps, _ in nodes]
    cpts = [np.asarray(c, dtype=float) for _, _, c in nodes]
    return BayesNet(names, parents, [c.shape[1] for c in cpts], cpts, sensitive, target)


def noisy_or(k, base=0.1, step=0.3):
    """CPT rows for a binary child of ``k`` binary parents."""
    rows = []
    for i in range(2 ** k):
        p = min(0.95, base + step * bin(i).count("1"))
        rows.append([1 - p, p])
    return rows


@pytest.fixture(scope="session")
def kfair_net():
    return load_network(os.path.join(FIXTURES, "kfair8.net.json"))


@pytest.fixture(scope="session")
def collider_net():
    # A -> C <- S, A -> T
    return net([
        ("S", [], [[0.5, 0.5]]),
        ("A", [], [[0.5, 0.5]]),
        ("C", ["A", "S"], [[0.9, 0.1], [0.4, 0.6], [0.4, 0.6], [0.1, 0.9]]),
        ("T", ["A"], [[0.8, 0.2], [0.25, 0.75]]),
    ], "S", "T")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(str(v) for v in r) + "\n")
    return path


# acceptance verdicts, printed once at the end of the session
VERDICTS = {}


def record_verdict(key, ok, detail):
    VERDICTS.setdefault(key, []).append((bool(ok), detail))
    print(f"{key} {'PASS' if ok else 'FAIL'}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(VERDICTS):
        parts = VERDICTS[key]
        ok = all(p[0] for p in parts)
        detail = "; ".join(d for _, d in parts)
        terminalreporter.write_line(f"{key} {'PASS' if ok else 'FAIL'} - {detail}")
