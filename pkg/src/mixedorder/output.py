"""Artifact writers: CSV, JSON, plot-ready .dat files, a gnuplot script and the run manifest.

Every file is written to a temporary sibling and renamed into place.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .rng import RNG_ALGORITHM


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.16e}"
    if v is None:
        return ""
    return str(v)


def _json_default(v):
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    if isinstance(v, np.bool_):
        return bool(v)
    raise TypeError(f"cannot serialize {type(v).__name__}")


def _clean(v):
    # JSON has no NaN/inf; emit null
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (float, np.floating)) and not math.isfinite(float(v)):
        return None
    return v


def dumps_json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True, default=_json_default) + "\n"


def atomic_write(path: Path, text: str, newline: str | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline=newline) as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def columns_of(rows: list[dict]) -> list[str]:
    """Union of keys in first-seen order, with module and operation first."""
    cols: dict[str, None] = {"module": None, "operation": None}
    for r in rows:
        for k in r:
            cols.setdefault(k, None)
    return list(cols)


def csv_text(rows: list[dict]) -> str:
    buf = io.StringIO()
    cols = columns_of(rows)
    w = csv.writer(buf, lineterminator="\r\n", quoting=csv.QUOTE_MINIMAL)
    w.writerow(cols)
    for r in rows:
        w.writerow([format_value(r.get(c)) for c in cols])
    return buf.getvalue()


def dat_text(name: str, points) -> str:
    lines = [f"# {name}", "# x y yerr"]
    lines += [f"{format_value(float(x))} {format_value(float(y))} {format_value(float(e))}" for x, y, e in points]
    return "\n".join(lines) + "\n"


def gnuplot_script(series: dict[str, list], title: str) -> str:
    if not series:
        return f"# {title}: no series\n"
    plots = ", \\\n     ".join(f"'{name}.dat' using 1:2:3 with yerrorlines title '{name}'" for name in sorted(series))
    return (f"set title '{title}'\nset key outside\nset xlabel 'x'\nset ylabel 'y'\n"
            f"set terminal pngcairo size 900,600\nset output '{title}.png'\nplot {plots}\n")


def versions() -> dict:
    import numba
    import pydantic
    import scipy

    return {"mixedorder": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "numba": numba.__version__, "pydantic": pydantic.__version__}


def write_run(out_dir: Path, resolved_config: dict, result, workers: int) -> dict[str, Path]:
    out = Path(out_dir)
    paths = {"csv": out / "results.csv", "json": out / "results.json", "manifest": out / "manifest.json",
             "plot": out / "plot.gp"}
    atomic_write(paths["csv"], csv_text(result.rows), newline="")
    atomic_write(paths["json"], dumps_json({"rows": result.rows, "summary": result.summary}))
    for name, pts in sorted(result.series.items()):
        p = out / f"{name}.dat"
        atomic_write(p, dat_text(name, pts))
        paths[f"dat:{name}"] = p
    atomic_write(paths["plot"], gnuplot_script(result.series, resolved_config["experiment"]))
    manifest = {
        "config": resolved_config,
        "seed": resolved_config["seed"],
        "rng_algorithm": RNG_ALGORITHM,
        "versions": versions(),
        "workers": workers,
        "files": sorted(p.name for p in paths.values()),
        "summary": result.summary,
    }
    atomic_write(paths["manifest"], dumps_json(manifest))
    return paths
