"""Serialization: versioned JSON, CSV profiles and polyline SVG plots.

Floats are written with 17 significant digits so every file reloads to the
same binary values, and identical inputs give byte-identical files.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .fourier import TorusFunction, grid_points, oversampled_size
from .spaces import DensityField, PotentialClass, make_density, make_potential

SCHEMA = "torus-vrep/1"


class FormatError(ValueError):
    pass


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = format(x, ".17g")
    if "e" not in s and "." not in s and "inf" not in s and "nan" not in s:
        s += ".0"
    return s


def dumps(obj, indent: int = 2) -> str:
    """JSON text with fixed float formatting and stable key order."""
    pad = " " * indent

    def enc(o, level):
        if isinstance(o, (bool, np.bool_)):
            return "true" if o else "false"
        if o is None:
            return "null"
        if isinstance(o, (int, np.integer)):
            return str(int(o))
        if isinstance(o, (float, np.floating)):
            return _fmt_float(float(o))
        if isinstance(o, str):
            return json.dumps(o, ensure_ascii=False)
        if isinstance(o, np.ndarray):
            return enc(o.tolist(), level)
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            if all(not isinstance(x, (dict, list, tuple, np.ndarray)) for x in o):
                return "[" + ", ".join(enc(x, level) for x in o) + "]"
            inner = (",\n").join(pad * (level + 1) + enc(x, level + 1) for x in o)
            return "[\n" + inner + "\n" + pad * level + "]"
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = (",\n").join(f"{pad * (level + 1)}{json.dumps(str(k))}: {enc(v, level + 1)}"
                                 for k, v in o.items())
            return "{\n" + items + "\n" + pad * level + "}"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return enc(obj, 0) + "\n"


def write_text(path, text: str) -> None:
    Path(path).write_text(text, encoding="utf-8", newline="\n")


def write_json(path, obj) -> None:
    write_text(path, dumps(obj))


# --------------------------------------------------------------------------- fields

def field_to_dict(obj) -> dict:
    if isinstance(obj, DensityField):
        kind, n, f = "density", obj.n_particles, obj.function
    elif isinstance(obj, PotentialClass):
        kind, n, f = "potential", None, obj.function
    else:
        raise TypeError("expected a density or a potential")
    M = oversampled_size(max(f.cutoff, 1))
    return {
        "schema": SCHEMA,
        "kind": kind,
        "n_particles": n,
        "cutoff": f.cutoff,
        "coeff_re": f.coeffs.real,
        "coeff_im": f.coeffs.imag,
        "grid": M,
        "samples": f.samples(M).real,
    }


def field_from_dict(d: dict, n_particles: int | None = None):
    """Rebuild a density or potential; coefficients win over samples."""
    try:
        kind = d["kind"]
    except (KeyError, TypeError):
        raise FormatError("missing field 'kind'") from None
    if kind not in ("density", "potential"):
        raise FormatError(f"field 'kind' must be 'density' or 'potential', got {kind!r}")
    schema = d.get("schema", SCHEMA)
    if schema != SCHEMA:
        raise FormatError(f"field 'schema': unsupported version {schema!r}")
    coeffs = None
    if "coeff_re" in d:
        re = np.asarray(d["coeff_re"], dtype=float)
        im = np.asarray(d.get("coeff_im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape or re.ndim != 1 or re.size % 2 != 1:
            raise FormatError("fields 'coeff_re'/'coeff_im' must be equal-length odd arrays")
        coeffs = re + 1j * im
        if "cutoff" in d and int(d["cutoff"]) != (re.size - 1) // 2:
            raise FormatError("field 'cutoff' disagrees with the coefficient count")
    elif "samples" not in d:
        raise FormatError("need 'coeff_re'/'coeff_im' or 'samples'")
    cutoff = d.get("cutoff")
    if kind == "density":
        n = d.get("n_particles", n_particles)
        if n is None:
            raise FormatError("missing field 'n_particles'")
        if not isinstance(n, int) or n < 1:
            raise FormatError("field 'n_particles' must be a positive integer")
        if coeffs is not None:
            return make_density(n, coefficients=coeffs)
        return make_density(n, samples=d["samples"], cutoff=cutoff)
    if coeffs is not None:
        return make_potential(coefficients=coeffs)
    return make_potential(samples=d["samples"], cutoff=cutoff)


def save_field(path, obj) -> None:
    write_json(path, field_to_dict(obj))


def load_field(source, n_particles: int | None = None):
    """Load from a path, or from an open text stream."""
    try:
        if hasattr(source, "read"):
            d = json.load(source)
        else:
            with open(source, encoding="utf-8") as fh:
                d = json.load(fh)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    except OSError as exc:
        raise FormatError(f"cannot read {source}: {exc.strerror}") from None
    return field_from_dict(d, n_particles)


# --------------------------------------------------------------------------- tables and plots

def write_csv(path, columns: dict) -> None:
    names = list(columns)
    cols = [np.asarray(columns[n]) for n in names]
    n = len(cols[0])
    lines = [",".join(names)]

    def cell(x):
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, str):
            return x
        return _fmt_float(float(x))

    for i in range(n):
        lines.append(",".join(cell(c[i].item() if isinstance(c[i], np.generic) else c[i]) for c in cols))
    write_text(path, "\n".join(lines) + "\n")


def profile_columns(functions: dict, grid: int) -> dict:
    x = grid_points(grid)
    cols = {"x": x}
    for name, f in functions.items():
        fn = f if isinstance(f, TorusFunction) else f.function
        cols[name] = fn.samples(grid).real
    return cols


def write_svg(path, x, series: dict, title: str = "", width: int = 640, height: int = 400) -> None:
    """Minimal line plot: one polyline per series with shared axes."""
    x = np.asarray(x, dtype=float)
    ys = {k: np.asarray(v, dtype=float) for k, v in series.items()}
    lo = min(float(np.min(v)) for v in ys.values())
    hi = max(float(np.max(v)) for v in ys.values())
    if hi == lo:
        hi, lo = hi + 1.0, lo - 1.0
    m = 40
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

    def px(t):
        return m + (t - x.min()) / max(x.max() - x.min(), 1e-300) * (width - 2 * m)

    def py(t):
        return height - m - (t - lo) / (hi - lo) * (height - 2 * m)

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}">',
             f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
             f'<rect x="{m}" y="{m}" width="{width - 2 * m}" height="{height - 2 * m}" '
             'fill="none" stroke="#888"/>',
             f'<text x="{width / 2:.1f}" y="{m / 2:.1f}" text-anchor="middle" '
             f'font-family="sans-serif" font-size="14">{title}</text>',
             f'<text x="4" y="{m + 10}" font-family="sans-serif" font-size="10">{hi:.4g}</text>',
             f'<text x="4" y="{height - m}" font-family="sans-serif" font-size="10">{lo:.4g}</text>']
    for i, (name, y) in enumerate(ys.items()):
        c = colors[i % len(colors)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        parts.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        parts.append(f'<text x="{width - m + 4}" y="{m + 14 * (i + 1)}" fill="{c}" '
                     f'font-family="sans-serif" font-size="11">{name}</text>')
    parts.append("</svg>")
    write_text(path, "\n".join(parts) + "\n")
