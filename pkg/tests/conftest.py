"""Shared fixtures: the published 12-cluster / 5-class verification layout.

TABLE3_COUNTS holds, per cluster, the mapped class and the verification
count for each class in CLASS_ORDER; the printed per-cluster purity and
entropy values they must reproduce live in TABLE3_PRINTED.
"""

import numpy as np
import pytest

from changeclass.clustering import Clustering

CLASS_ORDER = ("B", "F", "N", "D", "R")

# (mapped class, counts for B, F, N, D, R)
TABLE3_COUNTS = (
    ("B", (9, 0, 0, 1, 1)),
    ("F", (1, 4, 0, 0, 0)),
    ("F", (0, 1, 0, 0, 0)),
    ("F", (0, 0, 0, 0, 0)),
    ("F", (1, 7, 0, 0, 0)),
    ("N", (0, 0, 8, 0, 0)),
    ("N", (0, 0, 4, 0, 0)),
    ("N", (1, 1, 1, 0, 0)),
    ("D", (1, 0, 0, 13, 1)),
    ("R", (2, 1, 0, 0, 3)),
    ("R", (0, 0, 0, 0, 1)),
    ("R", (2, 2, 0, 0, 2)),
)

# Printed (purity, entropy) per cluster row, then the totals row.
TABLE3_PRINTED = (
    (0.82, 0.37),
    (0.80, 0.31),
    (1.0, 0.0),
    (1.0, 0.0),
    (0.88, 0.23),
    (1.0, 0.0),
    (1.0, 0.0),
    (0.33, 0.68),
    (0.87, 0.30),
    (0.50, 0.63),
    (1.0, 0.0),
    (0.33, 0.68),
)
TABLE3_TOTALS = (0.78, 0.32)
TABLE3_CLASS_TOTALS = {"B": 17, "F": 16, "N": 13, "D": 14, "R": 8}
TABLE3_CORRECT = 53
TABLE3_SIZE = 68


def table3_verification_layout():
    """Synthetic changes realizing the table: ids, cluster assignment, and
    (change_id, expert class) verification pairs."""
    assignment = {}
    verif_pairs = []
    serial = 0
    for cluster, (_, counts) in enumerate(TABLE3_COUNTS):
        for class_name, count in zip(CLASS_ORDER, counts):
            for _ in range(count):
                cid = f"ch{serial:03d}"
                serial += 1
                assignment[cid] = cluster
                verif_pairs.append((cid, class_name))
    return assignment, verif_pairs


def table3_clustering(assignment):
    k = len(TABLE3_COUNTS)
    return Clustering(
        k=k,
        ids=tuple(assignment),
        assignment=dict(assignment),
        centroids=np.zeros((k, 2)),
        iterations=1,
        density=0.0,
    )


@pytest.fixture
def table3():
    assignment, verif_pairs = table3_verification_layout()
    return {
        "assignment": assignment,
        "verif": verif_pairs,
        "clustering": table3_clustering(assignment),
        "mapping": {j: row[0] for j, row in enumerate(TABLE3_COUNTS)},
    }
