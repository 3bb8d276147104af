from __future__ import annotations

import csv
import json
import logging
import tempfile
from pathlib import Path
from typing import Any, Iterable, List

logger = logging.getLogger(__name__)


def atomic_write_bytes(target: Path, data: bytes) -> None:
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile("wb", delete=False, dir=str(target.parent)) as tf:
        tf.write(data)
        tmp_name = tf.name
    Path(tmp_name).replace(target)
    logger.info("Wrote: %s", target)


def atomic_write_text(target: Path, text: str) -> None:
    atomic_write_bytes(target, text.encode("utf-8"))


def write_json(target: Path, payload: Any) -> None:
    atomic_write_text(target, json.dumps(payload, ensure_ascii=False, indent=2) + "\n")


def write_csv(path: Path, header: List[str], rows: Iterable[List[str]]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    logger.info("Wrote: %s", path)


def render_table(headers: List[str], rows: List[List[str]]) -> str:
    colw = [len(h) for h in headers]
    for r in rows:
        for i, v in enumerate(r):
            colw[i] = max(colw[i], len(v))

    def fmt_row(r: List[str]) -> str:
        return " | ".join(r[i].ljust(colw[i]) for i in range(len(headers))).rstrip()

    lines = [fmt_row(headers), "-+-".join("-" * w for w in colw)]
    lines.extend(fmt_row(r) for r in rows)
    return "\n".join(lines) + "\n"


def write_txt(path: Path, headers: List[str], rows: List[List[str]]) -> None:
    atomic_write_text(Path(path), render_table(headers, rows))
