"""
Phantom Generator
=================

Procedural stand-in for paired echo studies: a pulsating elliptical left
ventricle rendered in a four-chamber-like and a two-chamber-like layout.
Both views share one area trace, so ED/ES frames coincide and the EF is
known in closed form from pseudo-volumes V = A^{3/2}.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from ..config import Provenance, Split, View, ViewGeometry
from ..common.exceptions import InvalidSpec
from ..domain.models import CaseEntry, CaseRecord, DatasetManifest, PhantomSpec
from ..data.clip_store import save_clip
from ..data.manifest import make_manifest, save_manifest
from ..data.preprocessing import preprocess_clip

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

BACKGROUND_LEVEL = 0.25
MYOCARDIUM_LEVEL = 0.85
BLOOD_LEVEL = 0.05
WALL_THICKNESS = 3.0
ROI_MARGIN = 2.0
SUPERSAMPLE = 4
FRAME_RATE = 50.0
MAX_AREA_ED = 750.0
AREA_ED_RANGE = (450.0, 700.0)


@dataclass(frozen=True)
class Ellipse:
    cx: float
    cy: float
    rx: float
    ry: float


@dataclass(frozen=True)
class PhantomLayout:
    """Where the chambers of one view sit on a size x size grid."""
    lv_center: Tuple[float, float]
    lv_aspect: float  # vertical / horizontal semi-axis
    others: Tuple[Ellipse, ...]
    atrium_index: Optional[int]


def layout_for(geometry: ViewGeometry, size: int, jitter: Tuple[float, float] = (0.0, 0.0)) -> PhantomLayout:
    """Chamber layout of a view, scaled to the grid size."""
    s = size / 64.0
    jx, jy = jitter
    if geometry == ViewGeometry.FOUR_CHAMBER_LIKE:
        lv = (24.0 * s + jx, 26.0 * s + jy)
        others = (
            Ellipse(47.0 * s + jx, 28.0 * s + jy, 6.0 * s, 13.0 * s),   # RV
            Ellipse(24.0 * s + jx, 56.0 * s + jy, 8.0 * s, 5.0 * s),    # LA
            Ellipse(47.0 * s + jx, 56.0 * s + jy, 6.0 * s, 4.5 * s),    # RA
        )
        return PhantomLayout(lv, 1.6, others, atrium_index=1)
    lv = (32.0 * s + jx, 25.0 * s + jy)
    others = (Ellipse(32.0 * s + jx, 57.0 * s + jy, 9.0 * s, 5.0 * s),)  # LA
    return PhantomLayout(lv, 1.9, others, atrium_index=0)


def lv_ellipse(area: float, layout: PhantomLayout) -> Ellipse:
    """Ellipse of the given area with the layout's aspect ratio."""
    rx = float(np.sqrt(area / (np.pi * layout.lv_aspect)))
    return Ellipse(layout.lv_center[0], layout.lv_center[1], rx, rx * layout.lv_aspect)


def area_trace(spec: PhantomSpec) -> np.ndarray:
    """Chamber area per frame; ED (maximum) at phase 0, ES half a cycle later."""
    t = np.arange(spec.n_frames, dtype=np.float64)
    phase = 2.0 * np.pi * t / spec.cycle_frames + spec.phase_offset
    return spec.area_es + (spec.area_ed - spec.area_es) * (0.5 + 0.5 * np.cos(phase))


def coverage(ellipse: Ellipse, size: int, supersample: int = SUPERSAMPLE) -> np.ndarray:
    """Fraction of each pixel covered by the ellipse, by supersampling."""
    offsets = (np.arange(supersample) + 0.5) / supersample
    coords = (np.arange(size)[:, None] + offsets[None, :]).reshape(-1)
    ys, xs = np.meshgrid(coords, coords, indexing="ij")
    inside = ((xs - ellipse.cx) / ellipse.rx) ** 2 + ((ys - ellipse.cy) / ellipse.ry) ** 2 <= 1.0
    return inside.reshape(size, supersample, size, supersample).mean(axis=(1, 3))


def _paint(canvas: np.ndarray, cover: np.ndarray, level: float) -> np.ndarray:
    return canvas * (1.0 - cover) + level * cover


def _grow(ellipse: Ellipse, margin: float) -> Ellipse:
    return Ellipse(ellipse.cx, ellipse.cy, ellipse.rx + margin, ellipse.ry + margin)


def validate_spec(spec: PhantomSpec) -> None:
    """
    Raises:
        InvalidSpec: If 0 < area_es < area_ed does not hold or the chamber does not fit
    """
    if not (0.0 < spec.area_es < spec.area_ed):
        raise InvalidSpec(
            "Phantom areas must satisfy 0 < area_es < area_ed",
            {"area_ed": spec.area_ed, "area_es": spec.area_es},
        )
    limit = MAX_AREA_ED * (spec.size / 64.0) ** 2
    if spec.area_ed > limit:
        raise InvalidSpec(
            f"area_ed {spec.area_ed} exceeds the {limit:.0f} px^2 the layout can hold",
            {"area_ed": spec.area_ed},
        )


def _jitter(spec: PhantomSpec) -> Tuple[float, float]:
    rng = np.random.default_rng([spec.rng_seed, 0])
    return tuple(float(v) for v in rng.uniform(-2.0, 2.0, size=2))  # type: ignore[return-value]


def render_phantom_video(spec: PhantomSpec, noisy: bool = True) -> np.ndarray:
    """
    Render one view as a float video [n_frames, 1, size, size] in [0, 1].

    The epicardial border is fixed at the ED size so the wall thickens in
    systole; speckle is multiplicative Rayleigh noise with unit mean.
    """
    validate_spec(spec)
    layout = layout_for(spec.view_geometry, spec.size, _jitter(spec))
    areas = area_trace(spec)
    ed = lv_ellipse(spec.area_ed, layout)
    epicardium = coverage(_grow(ed, WALL_THICKNESS), spec.size)
    static_walls = [coverage(_grow(e, WALL_THICKNESS / 2), spec.size) for e in layout.others]

    unit = spec.cycle_frames
    frames = np.empty((spec.n_frames, 1, spec.size, spec.size), dtype=np.float64)
    for index, area in enumerate(areas):
        canvas = np.full((spec.size, spec.size), BACKGROUND_LEVEL)
        for wall in static_walls:
            canvas = _paint(canvas, wall, MYOCARDIUM_LEVEL)
        canvas = _paint(canvas, epicardium, MYOCARDIUM_LEVEL)
        # atria fill while the ventricle empties
        filling = (spec.area_ed - area) / (spec.area_ed - spec.area_es)
        for k, chamber in enumerate(layout.others):
            if k == layout.atrium_index:
                scale = 1.0 + 0.15 * filling
                chamber = Ellipse(chamber.cx, chamber.cy, chamber.rx * scale, chamber.ry * scale)
            canvas = _paint(canvas, coverage(chamber, spec.size), BLOOD_LEVEL)
        canvas = _paint(canvas, coverage(lv_ellipse(area, layout), spec.size), BLOOD_LEVEL)
        frames[index, 0] = canvas
    logger.debug(f"Rendered {spec.view_geometry.value} phantom ({unit}-frame cycle)")

    if noisy and spec.noise_sigma > 0:
        rng = np.random.default_rng([spec.rng_seed, 1])
        speckle = rng.rayleigh(scale=1.0, size=frames.shape) / np.sqrt(np.pi / 2.0)
        frames = frames * (1.0 + spec.noise_sigma * (speckle - 1.0))
    return np.clip(frames, 0.0, 1.0)


def measure_lv_area(frame: np.ndarray, spec: PhantomSpec) -> float:
    """
    Chamber area of a noiseless frame, in pixels^2.

    Inside a region just larger than the ED cavity, every pixel mixes
    myocardium and blood only, so blood coverage follows from intensity.
    """
    layout = layout_for(spec.view_geometry, spec.size, _jitter(spec))
    roi = coverage(_grow(lv_ellipse(spec.area_ed, layout), ROI_MARGIN), spec.size) > 0
    image = np.asarray(frame, dtype=np.float64).reshape(spec.size, spec.size)
    blood = np.clip((MYOCARDIUM_LEVEL - image) / (MYOCARDIUM_LEVEL - BLOOD_LEVEL), 0.0, 1.0)
    return float(blood[roi].sum())


def measure_ef(frames: np.ndarray, spec: PhantomSpec) -> float:
    """EF recovered from measured areas of noiseless frames [N, 1, H, W] in [0, 1]."""
    areas = np.array([measure_lv_area(frame, spec) for frame in frames])
    v_ed = areas.max() ** 1.5
    v_es = areas.min() ** 1.5
    return float(100.0 * (v_ed - v_es) / v_ed)


def generate_phantom_case(
    spec: PhantomSpec,
    case_id: Optional[str] = None,
    split: Split = Split.TRAIN,
) -> CaseRecord:
    """
    Render a paired phantom study.

    The A4C clip uses the four-chamber-like layout and the A2C clip the
    two-chamber-like layout; both share the same area trace and window.

    Raises:
        InvalidSpec: If the spec violates its invariants
    """
    validate_spec(spec)
    case_id = case_id or f"phantom_{spec.rng_seed}"
    records = {}
    for view, geometry, offset in (
        (View.A4C, ViewGeometry.FOUR_CHAMBER_LIKE, 0),
        (View.A2C, ViewGeometry.TWO_CHAMBER_LIKE, 1),
    ):
        view_spec = spec.model_copy(update={
            "view_geometry": geometry,
            "rng_seed": spec.rng_seed * 2 + offset,
        })
        video = render_phantom_video(view_spec)
        records[view] = preprocess_clip(
            video, 0, view=view, case_id=case_id, frame_rate=FRAME_RATE, source_range=(0.0, 1.0)
        )
    return CaseRecord(
        a4c=records[View.A4C],
        a2c=records[View.A2C],
        ef_true=spec.ef_true,
        split=split,
        provenance=Provenance.PHANTOM,
    )


def phantom_spec_for_ef(ef: float, area_ed: float, seed: int, noise_sigma: float = 0.15) -> PhantomSpec:
    """Spec whose closed-form EF equals ef: area_es = area_ed (1 - ef/100)^{2/3}."""
    return PhantomSpec(
        area_ed=area_ed,
        area_es=area_ed * (1.0 - ef / 100.0) ** (2.0 / 3.0),
        noise_sigma=noise_sigma,
        rng_seed=seed,
    )


def _render_entry(args: Tuple[PhantomSpec, str, Split, str]) -> CaseEntry:
    spec, case_id, split, out_dir = args
    case = generate_phantom_case(spec, case_id, split)
    root = Path(out_dir)
    a4c = save_clip(case.a4c, root / "clips" / f"{case_id}_a4c", Provenance.PHANTOM,
                    {"rng_seed": spec.rng_seed})
    a2c = save_clip(case.a2c, root / "clips" / f"{case_id}_a2c", Provenance.PHANTOM,
                    {"rng_seed": spec.rng_seed})
    return CaseEntry(
        case_id=case_id,
        a4c_path=str(a4c.relative_to(root)),
        a2c_path=str(a2c.relative_to(root)),
        ef_true=case.ef_true,
        split=split,
        provenance=Provenance.PHANTOM,
    )


def draw_phantom_specs(
    n_train: int,
    n_val: int,
    n_test: int,
    ef_range: Sequence[float],
    seed: int,
    noise_sigma: float = 0.15,
) -> List[Tuple[PhantomSpec, str, Split]]:
    """Deterministic (spec, case_id, split) triples; EF uniform in ef_range."""
    low, high = float(ef_range[0]), float(ef_range[1])
    if not (0.0 < low <= high < 100.0):
        raise InvalidSpec("ef_range must lie inside (0, 100)", {"ef_range": [low, high]})
    rng = np.random.default_rng(seed)
    total = n_train + n_val + n_test
    efs = rng.uniform(low, high, size=total)
    areas = rng.uniform(*AREA_ED_RANGE, size=total)
    case_seeds = rng.integers(0, 2**31 - 1, size=total)
    splits = [Split.TRAIN] * n_train + [Split.VAL] * n_val + [Split.TEST] * n_test
    return [
        (
            phantom_spec_for_ef(float(efs[i]), float(areas[i]), int(case_seeds[i]), noise_sigma),
            f"ph{i:05d}",
            splits[i],
        )
        for i in range(total)
    ]


def generate_phantom_dataset(
    n_train: int,
    n_val: int,
    n_test: int,
    ef_range: Sequence[float],
    seed: int,
    out_dir: PathLike,
    noise_sigma: float = 0.15,
    workers: int = 0,
) -> DatasetManifest:
    """
    Render a phantom dataset to clip containers plus manifest.json.

    Args:
        n_train, n_val, n_test: Cases per split
        ef_range: (low, high) EF bounds in percent, inside (0, 100)
        seed: Master seed for EF, geometry and speckle draws
        out_dir: Output directory
        noise_sigma: Speckle strength
        workers: Process-pool size; 0 renders serially. Output order is fixed either way.

    Returns:
        The saved manifest
    """
    jobs = [
        (spec, case_id, split, str(out_dir))
        for spec, case_id, split in draw_phantom_specs(n_train, n_val, n_test, ef_range, seed, noise_sigma)
    ]
    if workers > 0 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_render_entry, jobs))
    else:
        entries = [_render_entry(job) for job in jobs]

    manifest = make_manifest(entries, split_seed=seed)
    save_manifest(manifest, Path(out_dir) / "manifest.json")
    logger.info(f"Generated phantom dataset in {out_dir}: {manifest.counts}")
    return manifest


__all__ = [
    'Ellipse',
    'PhantomLayout',
    'layout_for',
    'area_trace',
    'validate_spec',
    'render_phantom_video',
    'measure_lv_area',
    'measure_ef',
    'generate_phantom_case',
    'phantom_spec_for_ef',
    'draw_phantom_specs',
    'generate_phantom_dataset',
]
