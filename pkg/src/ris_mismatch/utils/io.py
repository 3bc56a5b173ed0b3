import logging
from pathlib import Path
from typing import Sequence

import pandas as pd

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.9g"


def write_table(
    rows: Sequence[dict], columns: Sequence[str], directory: Path, stem: str, formats: Sequence[str]
) -> list[Path]:
    """
    Пишет строки развёртки в CSV и/или gnuplot-таблицу (.dat, пробелы, заголовок с '#').
    Числа: 9 значащих цифр; порядок строк задаёт вызывающий код.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame(list(rows), columns=list(columns))
    written: list[Path] = []
    for fmt in formats:
        path = directory / f"{stem}.{fmt}"
        if fmt == "csv":
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
        elif fmt == "dat":
            with path.open("w", encoding="utf-8", newline="") as fh:
                fh.write("# " + " ".join(columns) + "\n")
                frame.to_csv(
                    fh, sep=" ", index=False, header=False, float_format=FLOAT_FORMAT, lineterminator="\n"
                )
        else:
            raise ValueError(f"unknown output format {fmt!r}")
        logger.info(f"Wrote {len(frame)} rows to {path}")
        written.append(path)
    return written
