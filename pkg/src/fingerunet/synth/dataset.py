"""On-disk synthetic datasets.

Layout::

    <out_dir>/manifest.json
    <out_dir>/sample_00000/degraded.pgm   P5, 8-bit
                           clean.pgm
                           minutiae.pgm   dots at 255 on 0
                           mask.pgm       foreground at 255 on 0
                           orient.bin     see fingerunet.imageio
                           meta.json

Sample i is generated from seed ``seed + i`` alone.
"""
import json
from pathlib import Path
from typing import List, Tuple

import numpy as np

from ..imageio import read_orient, read_pgm, read_pgm_u8, write_orient, write_pgm
from ..tensor import rng
from .degrade import DegradeConfig, degrade
from .field import OrientationField, gen_orientation_field
from .minutiae import extract_minutiae
from .render import render_ridge_pattern
from .sample import SamplePair

SAMPLE_FILES = ("degraded.pgm", "clean.pgm", "minutiae.pgm", "orient.bin", "meta.json")
PERIOD_RANGE = (7.0, 10.0)


def generate_sample(seed: int, h: int, w: int, severity_range=(0.2, 0.8)) -> SamplePair:
    lo, hi = severity_range
    if not 0 <= lo <= hi <= 1:
        raise ValueError(f"severity range must satisfy 0 <= lo <= hi <= 1, got {severity_range}")
    g = rng(seed)
    severity = float(g.uniform(lo, hi))
    period = float(g.uniform(*PERIOD_RANGE))
    field_seed, render_seed, degrade_seed = (int(v) for v in g.integers(0, 2 ** 31, size=3))
    field = gen_orientation_field(field_seed, h, w)
    clean = render_ridge_pattern(field, period, render_seed)
    points, mmap = extract_minutiae(clean, field.mask)
    cfg = DegradeConfig.from_severity(severity, degrade_seed)
    meta = {
        "seed": int(seed),
        "severity": severity,
        "dims": [h, w],
        "ridge_period": period,
        "degradations": cfg.applied(),
        "minutiae": [[p.row, p.col, p.kind] for p in points],
    }
    return SamplePair(degrade(clean, cfg), clean, mmap, OrientationField(field.theta, field.mask), meta)


def write_sample(d: Path, s: SamplePair) -> None:
    d.mkdir(parents=True, exist_ok=True)
    write_pgm(d / "degraded.pgm", s.degraded)
    write_pgm(d / "clean.pgm", s.clean)
    write_pgm(d / "minutiae.pgm", (s.minutia_map > 0).astype(np.uint8) * 255)
    write_pgm(d / "mask.pgm", (s.orientation.mask > 0).astype(np.uint8) * 255)
    write_orient(d / "orient.bin", s.orientation.theta)
    (d / "meta.json").write_text(json.dumps(s.meta, sort_keys=True, indent=1) + "\n")


def make_dataset(n: int, seed: int, out_dir, dims: Tuple[int, int] = (64, 64),
                 severity_range=(0.2, 0.8)) -> dict:
    out = Path(out_dir)
    h, w = dims
    entries = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i in range(n):
            name = f"sample_{i:05d}"
            s = generate_sample(seed + i, h, w, severity_range)
            write_sample(out / name, s)
            entries.append({"dir": name, "seed": s.meta["seed"], "severity": s.meta["severity"],
                            "degradations": s.meta["degradations"]})
        manifest = {"count": n, "seed": seed, "dims": [h, w], "severity_range": list(severity_range),
                    "samples": entries}
        (out / "manifest.json").write_text(json.dumps(manifest, sort_keys=True, indent=1) + "\n")
    except OSError as e:
        raise OSError(f"failed writing dataset at {e.filename or out}: {e.strerror or e}") from e
    return manifest


class DatasetError(RuntimeError):
    pass


def load_sample(d, require_clean: bool = True) -> SamplePair:
    d = Path(d)
    for name in SAMPLE_FILES:
        if not (d / name).exists() and (require_clean or name != "clean.pgm"):
            raise DatasetError(f"{d.name}: missing {name}")
    degraded = read_pgm(d / "degraded.pgm")
    clean = read_pgm(d / "clean.pgm") if (d / "clean.pgm").exists() else np.full_like(degraded, np.nan)
    mmap = (read_pgm_u8(d / "minutiae.pgm") > 127).astype(np.uint8)
    theta = read_orient(d / "orient.bin")
    if (d / "mask.pgm").exists():
        mask = (read_pgm_u8(d / "mask.pgm") > 127).astype(np.uint8)
    else:
        mask = np.ones(theta.shape, dtype=np.uint8)
    meta = json.loads((d / "meta.json").read_text())
    return SamplePair(degraded, clean, mmap, OrientationField(theta, mask), meta)


def sample_dirs(root) -> List[Path]:
    root = Path(root)
    manifest = root / "manifest.json"
    if not manifest.exists():
        raise DatasetError(f"{root}: no manifest.json")
    m = json.loads(manifest.read_text())
    return [root / e["dir"] for e in m["samples"]]


def load_dataset(root) -> List[SamplePair]:
    return [load_sample(d) for d in sample_dirs(root)]
