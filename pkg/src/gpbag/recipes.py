"""Converters from native UCI/KEEL files to the headed CSV layout `load_csv` reads.

Each recipe writes one feature column per attribute plus a ``class``
column holding the original class name, so multi-class sources keep their
labels and are binarised at load time with ``positive_label``.

========== =========================== ================= ===============
dataset    source file                 recipe            positive_label
========== =========================== ================= ===============
Ion        UCI ``ionosphere.data``     ``uci_ionosphere`` ``b``
Yst_1      UCI ``yeast.data``          ``uci_yeast``      ``MIT``
Yst_2      UCI ``yeast.data``          ``uci_yeast``      ``ME3``
Vow        UCI ``vowel-context.data``  ``uci_vowel``      ``hid``
(any)      KEEL ``*.dat``              ``keel``           see file
========== =========================== ================= ===============
"""

from __future__ import annotations

import csv
import os

YEAST_COLUMNS = ["mcg", "gvh", "alm", "mit", "erl", "pox", "vac", "nuc"]
VOWEL_COLUMNS = ["train_test", "speaker", "sex"] + [f"f{i}" for i in range(10)]
VOWEL_CLASSES = ["hid", "hId", "hEd", "hAd", "hYd", "had", "hOd", "hod", "hUd", "hud", "hed"]


def _write(dst, header, rows) -> int:
    with open(dst, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return len(rows)


def _lines(src):
    with open(src, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("%"):
                yield line


def uci_yeast(src: str | os.PathLike, dst: str | os.PathLike) -> int:
    """``yeast.data``: sequence name, 8 numeric attributes, class; whitespace separated."""
    rows = []
    for line in _lines(src):
        cells = line.split()
        if len(cells) != 10:
            raise ValueError(f"{src}: expected 10 fields, got {len(cells)}: {line!r}")
        rows.append(cells[1:])
    return _write(dst, YEAST_COLUMNS + ["class"], rows)


def uci_ionosphere(src: str | os.PathLike, dst: str | os.PathLike) -> int:
    """``ionosphere.data``: 34 numeric attributes then ``g``/``b``; comma separated."""
    rows = []
    for line in _lines(src):
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != 35:
            raise ValueError(f"{src}: expected 35 fields, got {len(cells)}")
        rows.append(cells)
    return _write(dst, [f"a{i + 1}" for i in range(34)] + ["class"], rows)


def uci_vowel(src: str | os.PathLike, dst: str | os.PathLike) -> int:
    """``vowel-context.data``: 13 attributes and a class index 0-10."""
    rows = []
    for line in _lines(src):
        cells = line.split()
        if len(cells) != 14:
            raise ValueError(f"{src}: expected 14 fields, got {len(cells)}")
        rows.append(cells[:13] + [VOWEL_CLASSES[int(cells[13])]])
    return _write(dst, VOWEL_COLUMNS + ["class"], rows)


def keel(src: str | os.PathLike, dst: str | os.PathLike, rename: dict | None = None,
         feature_names=None) -> int:
    """KEEL ``.dat`` with or without its ``@attribute`` header.

    The last field is the class.  ``rename`` maps class names (e.g. KEEL's
    ``positive``/``negative``) to the names written out.
    """
    rename = rename or {}
    names: list[str] = []
    rows = []
    for line in _lines(src):
        if line.startswith("@"):
            parts = line.split()
            if parts[0].lower() == "@attribute":
                names.append(parts[1])
            continue
        cells = [c.strip() for c in line.split(",")]
        cells[-1] = rename.get(cells[-1], cells[-1])
        rows.append(cells)
    if not rows:
        raise ValueError(f"{src}: no data rows")
    width = len(rows[0])
    if feature_names is not None:
        header = list(feature_names) + ["class"]
    elif len(names) == width:
        header = names[:-1] + ["class"]
    else:
        header = [f"a{i + 1}" for i in range(width - 1)] + ["class"]
    if len(header) != width:
        raise ValueError(f"{src}: {len(header)} column names for {width} fields")
    return _write(dst, header, rows)
