"""Packaged comparison studies with named, quantitative verdicts.

Two harnesses:

* run_measurement_increase: reconstruct each sensor independently at a low
  and a high measurement rate, then jointly at the low rate, and check
  that joint reconstruction buys roughly what doubling the measurement
  count buys.
* run_superres: reconstruct a double-horizontal-resolution image from two
  sensors with a fractional-pixel offset and check that it beats linear
  upsampling of a single-sensor reconstruction.

Every verdict is named and carries its measured margin, and reports are
deterministic given the scene seed, measurement seed and solver config.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .geometry import build_region_masks, build_shift
from .pgm import clamp01, write_pgm
from .scene import CameraGeometry, SceneModel, make_test_scene, parallax_shift, render_view
from .sensing import MeasurementSet, SensingSpec, add_noise, measure, order_for_pixels, select_rows
from .solver import SolverConfig, epsilon_for_noise, reconstruct_joint, reconstruct_single, reconstruct_superres

CSV_HEADER = ["experiment", "case", "mode", "sensors", "rate",
              "psnr_db", "ssim", "iterations", "wall_time_s"]

# Above this PSNR the reconstructions agree with the truth to solver
# precision, so dB differences between cases are numerical noise; the
# comparison verdicts treat such cases as ties that satisfy the claim.
SATURATION_DB = 40.0


# ---------------------------------------------------------------------------
# image quality metrics
# ---------------------------------------------------------------------------

def psnr(reference: np.ndarray, candidate: np.ndarray,
         mask: np.ndarray | None = None) -> float:
    """Peak signal-to-noise ratio in dB for [0, 1] images.

    Identical inputs return inf.  With a boolean mask, only the selected
    pixels enter the mean squared error.
    """
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(candidate, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    if mask is not None:
        diff = diff[mask]
        if diff.size == 0:
            raise ValueError("mask selects no pixels")
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(1.0 / mse)


def ssim(reference: np.ndarray, candidate: np.ndarray) -> float:
    """Mean structural similarity over sliding 8x8 windows.

    Plain uniform windows with the standard constants C1 = 0.01^2,
    C2 = 0.03^2 for a [0, 1] dynamic range.
    """
    a = np.asarray(reference, dtype=np.float64)
    b = np.asarray(candidate, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    if a.shape[0] < 8 or a.shape[1] < 8:
        raise ValueError("ssim needs images at least 8x8")
    c1 = 0.01 ** 2
    c2 = 0.03 ** 2
    mu_a = _box8(a)
    mu_b = _box8(b)
    var_a = _box8(a * a) - mu_a * mu_a
    var_b = _box8(b * b) - mu_b * mu_b
    cov = _box8(a * b) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def _box8(img: np.ndarray) -> np.ndarray:
    """Means over all 8x8 windows (valid positions), via summed-area table."""
    s = np.zeros((img.shape[0] + 1, img.shape[1] + 1))
    s[1:, 1:] = np.cumsum(np.cumsum(img, axis=0), axis=1)
    k = 8
    total = s[k:, k:] - s[:-k, k:] - s[k:, :-k] + s[:-k, :-k]
    return total / (k * k)


def upsample2x_horizontal(image: np.ndarray) -> np.ndarray:
    """Linear 2x horizontal upsampling aligned with pair-average sampling.

    High-res column u interpolates the low-res samples at position
    (u - 0.5) / 2, with replicated ends, so pair-averaging the result of a
    pair-averaged image is consistent with the forward model.
    """
    img = np.asarray(image, dtype=np.float64)
    h, w = img.shape
    pos = (np.arange(2 * w) - 0.5) / 2.0
    i0 = np.clip(np.floor(pos).astype(np.int64), 0, w - 1)
    i1 = np.clip(i0 + 1, 0, w - 1)
    frac = np.clip(pos - np.floor(pos), 0.0, 1.0)
    frac[pos < 0] = 0.0
    frac[pos > w - 1] = 0.0
    return (1.0 - frac) * img[:, i0] + frac * img[:, i1]


# ---------------------------------------------------------------------------
# report plumbing
# ---------------------------------------------------------------------------

@dataclass
class CaseResult:
    case: str
    mode: str
    sensors: str
    rate: float
    psnr_db: float
    ssim: float
    iterations: int
    wall_time_s: float


@dataclass
class Verdict:
    claim: str
    passed: bool
    margin_db: float
    detail: str = ""


@dataclass
class ExperimentReport:
    experiment: str
    params: dict
    cases: list = field(default_factory=list)
    verdicts: list = field(default_factory=list)
    images: dict = field(default_factory=dict)

    def csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for c in self.cases:
            writer.writerow([self.experiment, c.case, c.mode, c.sensors,
                             f"{c.rate:g}", f"{c.psnr_db:.4f}",
                             f"{c.ssim:.6f}", c.iterations,
                             f"{c.wall_time_s:.3f}"])
        return buf.getvalue()

    def summary_text(self) -> str:
        lines = [f"experiment: {self.experiment}"]
        for key in sorted(self.params):
            lines.append(f"  {key} = {self.params[key]}")
        lines.append("cases:")
        for c in self.cases:
            lines.append(f"  {c.case:24s} psnr={c.psnr_db:8.3f} dB "
                         f"ssim={c.ssim:.4f} iters={c.iterations}")
        lines.append("verdicts:")
        for v in self.verdicts:
            state = "PASS" if v.passed else "FAIL"
            lines.append(f"  [{state}] {v.claim} (margin {v.margin_db:+.3f} dB)"
                         + (f" {v.detail}" if v.detail else ""))
        return "\n".join(lines) + "\n"

    def verdict(self, claim: str) -> Verdict:
        for v in self.verdicts:
            if v.claim == claim:
                return v
        raise KeyError(f"no verdict named {claim!r}")

    @property
    def all_passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def write(self, outdir) -> None:
        out = Path(outdir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.csv_text(), encoding="utf-8")
        (out / "summary.txt").write_text(self.summary_text(), encoding="utf-8")
        for name, img in self.images.items():
            write_pgm(out / f"{name}.pgm", clamp01(img))


# ---------------------------------------------------------------------------
# shared pipeline pieces
# ---------------------------------------------------------------------------

def _far_geometry(width: int, height: int, dx: float) -> CameraGeometry:
    """Two sensors separated horizontally, scene far enough that the
    effective shift is dx up to ~1e-7 relative."""
    return CameraGeometry(
        aperture_width=width,
        aperture_height=height,
        sensor_offsets=[(0.0, 0.0), (dx, 0.0)],
        sensor_plane_distance=1.0,
        scene_distance=1.0e7,
    )


def _measure_views(views, rate, seed, noise_sigma):
    pixels = views[0].size
    order = order_for_pixels(pixels)
    spec = SensingSpec(order=order, rows=select_rows(order, rate, seed),
                       seed=seed, pixel_count=pixels)
    values = []
    for k, v in enumerate(views):
        z = measure(v, spec)
        if noise_sigma > 0.0:
            z = add_noise(z, noise_sigma, seed + k + 1)
        values.append(z)
    return spec, values


def _solver_cfg(base: SolverConfig | None, noise_sigma, z) -> SolverConfig:
    cfg = base or SolverConfig()
    if noise_sigma > 0.0 and cfg.epsilon == 0.0:
        cfg = SolverConfig(**{**cfg.__dict__, "epsilon": epsilon_for_noise(noise_sigma, z)})
    return cfg


def _metrics(truth, recon, mask=None):
    """PSNR/SSIM of a reconstruction clamped to the displayable range."""
    rec = clamp01(recon)
    return psnr(truth, rec, mask), ssim(truth, rec)


# ---------------------------------------------------------------------------
# measurement-increase comparison
# ---------------------------------------------------------------------------

def run_measurement_increase(kind: str = "blocks", width: int = 64,
                             height: int = 64, dx: float = 3.5,
                             rate_low: float = 0.125, rate_high: float = 0.25,
                             scene_seed: int = 7, meas_seed: int = 42,
                             noise_sigma: float = 0.0,
                             cfg: SolverConfig | None = None,
                             outdir=None) -> ExperimentReport:
    """Single-sensor low/high rate versus joint reconstruction at low rate.

    Renders the two views of a far test scene (sensor 2 offset by dx
    pixels), measures both at the two rates with a shared row set, and
    reconstructs: each sensor alone at each rate, then both jointly at the
    low rate.  Claims checked:

      rate-increase-helps      each sensor improves from low to high rate
      joint-beats-single-low   joint beats each sensor's low-rate result
      joint-matches-single-high joint PSNR within 1.5 dB of the mean
                               high-rate single PSNR

    Metrics are computed on reconstructions clamped to [0, 1], and any
    comparison whose operands all exceed SATURATION_DB counts as satisfied
    (at that quality the differences are solver noise; this is what makes
    the degenerate full-rate run pass trivially).  The default solver
    config fixes the disjoint-term weight at sigma = 1: the area-ratio
    auto weight is tuned for near-square regions, and at this aperture
    size it over-penalizes the thin border strips enough to sink the
    joint solve (override via cfg to experiment).
    """
    if not (rate_high == 2.0 * rate_low or rate_high == rate_low == 1.0):
        raise ValueError(
            "rate_high must be twice rate_low (or both 1.0 for the "
            f"degenerate full-rate run); got {rate_low}/{rate_high}"
        )
    if cfg is None:
        cfg = SolverConfig(sigma=1.0)
    scale = 1  # views at scene resolution; margin only for the shift
    pad = math.ceil(scale * abs(dx))
    scene = make_test_scene(kind, scale * width + 2 * pad, scale * height, scene_seed)
    geo = _far_geometry(width, height, dx)
    views = [render_view(scene, geo, 1), render_view(scene, geo, 2)]
    dx_eff, _ = parallax_shift(geo, 2)
    masks = build_region_masks(dx_eff, 0.0, width, height)
    shift = build_shift(dx_eff, 0.0, width, height)

    spec_low, z_low = _measure_views(views, rate_low, meas_seed, noise_sigma)
    spec_high, z_high = _measure_views(views, rate_high, meas_seed, noise_sigma)

    report = ExperimentReport(
        experiment="measurement-increase",
        params={"kind": kind, "width": width, "height": height, "dx": dx,
                "dx_effective": dx_eff, "rate_low": rate_low,
                "rate_high": rate_high, "scene_seed": scene_seed,
                "meas_seed": meas_seed, "noise_sigma": noise_sigma},
    )
    report.images["truth_view1"] = views[0]
    report.images["truth_view2"] = views[1]

    single = {}
    for rate, spec, zs, tag in ((rate_low, spec_low, z_low, "low"),
                                (rate_high, spec_high, z_high, "high")):
        for k in (1, 2):
            t0 = time.perf_counter()
            res = reconstruct_single(zs[k - 1], spec, width, height,
                                     _solver_cfg(cfg, noise_sigma, zs[k - 1]))
            dt = time.perf_counter() - t0
            quality, similarity = _metrics(views[k - 1], res.image)
            single[(tag, k)] = quality
            report.cases.append(CaseResult(
                case=f"single-{tag}-sensor{k}", mode="single", sensors=str(k),
                rate=rate, psnr_db=quality, ssim=similarity,
                iterations=res.iterations, wall_time_s=dt))
            report.images[f"single_{tag}_sensor{k}"] = res.image

    t0 = time.perf_counter()
    joint = reconstruct_joint(z_low[0], z_low[1], spec_low, width, height,
                              shift, masks, _solver_cfg(cfg, noise_sigma, z_low[0]))
    dt = time.perf_counter() - t0
    jq1, js1 = _metrics(views[0], joint.view1)
    jq2, js2 = _metrics(views[1], joint.view2)
    joint_psnr = 0.5 * (jq1 + jq2)
    joint_ssim = 0.5 * (js1 + js2)
    report.cases.append(CaseResult(
        case="joint-low", mode="joint", sensors="1+2", rate=rate_low,
        psnr_db=joint_psnr, ssim=joint_ssim, iterations=joint.iterations,
        wall_time_s=dt))
    report.images["joint_view1"] = joint.view1
    report.images["joint_view2"] = joint.view2
    report.images["joint_common"] = joint.common

    def saturated(*quantities):
        return min(quantities) >= SATURATION_DB

    margin_rate = min(single[("high", k)] - single[("low", k)] for k in (1, 2))
    sat = saturated(*single.values())
    report.verdicts.append(Verdict(
        claim="rate-increase-helps", passed=margin_rate > 0.0 or sat,
        margin_db=margin_rate,
        detail=(f"high-low per sensor: "
                f"{single[('high', 1)] - single[('low', 1)]:+.3f}, "
                f"{single[('high', 2)] - single[('low', 2)]:+.3f}"
                + (" (saturated)" if sat else ""))))
    margin_joint = min(joint_psnr - single[("low", k)] for k in (1, 2))
    sat = saturated(joint_psnr, single[("low", 1)], single[("low", 2)])
    report.verdicts.append(Verdict(
        claim="joint-beats-single-low", passed=margin_joint > 0.0 or sat,
        margin_db=margin_joint,
        detail=(f"joint {joint_psnr:.3f} vs singles "
                f"{single[('low', 1)]:.3f}/{single[('low', 2)]:.3f}"
                + (" (saturated)" if sat else ""))))
    mean_high = 0.5 * (single[("high", 1)] + single[("high", 2)])
    gap = abs(joint_psnr - mean_high)
    sat = saturated(joint_psnr, single[("high", 1)], single[("high", 2)])
    report.verdicts.append(Verdict(
        claim="joint-matches-single-high", passed=gap <= 1.5 or sat,
        margin_db=1.5 - gap,
        detail=(f"joint {joint_psnr:.3f} vs mean high {mean_high:.3f}"
                + (" (saturated)" if sat else ""))))

    if outdir is not None:
        report.write(outdir)
    return report


# ---------------------------------------------------------------------------
# super-resolution comparison
# ---------------------------------------------------------------------------

def run_superres(kind: str = "checker-text", width: int = 64, height: int = 64,
                 dx: float = 3.5, rate: float = 0.25, scene_seed: int = 7,
                 meas_seed: int = 42, noise_sigma: float = 0.0,
                 cfg: SolverConfig | None = None,
                 outdir=None) -> ExperimentReport:
    """Double-horizontal-resolution reconstruction versus upsampling.

    The scene is rendered at twice the aperture width, so each view is a
    horizontal pair average of the high-res truth and the fractional dx
    becomes an integer high-res shift.  Claim checked:

      superres-beats-upsampled  high-res reconstruction beats linear
                                upsampling of each single-sensor
                                reconstruction on the common region

    The default solver config fixes sigma = 1 for the same reason as in
    run_measurement_increase: the auto area-ratio weight overweights the
    thin border strips at this aperture size.
    """
    if float(dx) == int(dx):
        raise ValueError(
            "super-resolution needs a fractional horizontal offset; "
            f"dx={dx} gives the second sensor no new sample phase"
        )
    if cfg is None:
        cfg = SolverConfig(sigma=1.0)
    pad = math.ceil(2.0 * abs(dx))
    scene = make_test_scene(kind, 2 * width + 2 * pad, height, scene_seed)
    geo = _far_geometry(width, height, dx)
    views = [render_view(scene, geo, 1), render_view(scene, geo, 2)]
    dx_eff, _ = parallax_shift(geo, 2)

    # reference crop for sensor 1; sensor 2's truth sits one high-res
    # shift to the left of it
    anchor = pad
    hr_shift = int(round(2.0 * dx_eff))
    truth_hr = {
        1: scene.base[:, anchor : anchor + 2 * width],
        2: scene.base[:, anchor - hr_shift : anchor - hr_shift + 2 * width],
    }

    masks = build_region_masks(dx_eff, 0.0, width, height)
    common_hr = {k: np.repeat(masks.common_for(k), 2, axis=1) for k in (1, 2)}

    spec, zs = _measure_views(views, rate, meas_seed, noise_sigma)

    report = ExperimentReport(
        experiment="superres",
        params={"kind": kind, "width": width, "height": height, "dx": dx,
                "dx_effective": dx_eff, "rate": rate,
                "scene_seed": scene_seed, "meas_seed": meas_seed,
                "noise_sigma": noise_sigma},
    )
    report.images["truth_highres"] = truth_hr[1]
    report.images["truth_view1"] = views[0]
    report.images["truth_view2"] = views[1]

    upsampled = {}
    for k in (1, 2):
        t0 = time.perf_counter()
        res = reconstruct_single(zs[k - 1], spec, width, height,
                                 _solver_cfg(cfg, noise_sigma, zs[k - 1]))
        dt = time.perf_counter() - t0
        up = upsample2x_horizontal(res.image)
        quality, similarity = _metrics(truth_hr[k], up, common_hr[k])
        upsampled[k] = quality
        report.cases.append(CaseResult(
            case=f"upsampled-single-sensor{k}", mode="single-upsampled",
            sensors=str(k), rate=rate, psnr_db=quality,
            ssim=similarity, iterations=res.iterations,
            wall_time_s=dt))
        report.images[f"upsampled_single_sensor{k}"] = up

    t0 = time.perf_counter()
    sup = reconstruct_superres(zs[0], zs[1], spec, width, height, dx_eff,
                               _solver_cfg(cfg, noise_sigma, zs[0]))
    dt = time.perf_counter() - t0
    sup_psnr, sup_ssim = _metrics(truth_hr[1], sup.image, common_hr[1])
    report.cases.append(CaseResult(
        case="superres-joint", mode="superres", sensors="1+2", rate=rate,
        psnr_db=sup_psnr, ssim=sup_ssim,
        iterations=sup.iterations, wall_time_s=dt))
    report.images["superres"] = sup.image

    margin = min(sup_psnr - upsampled[k] for k in (1, 2))
    report.verdicts.append(Verdict(
        claim="superres-beats-upsampled", passed=margin > 0.0,
        margin_db=margin,
        detail=(f"superres {sup_psnr:.3f} vs upsampled "
                f"{upsampled[1]:.3f}/{upsampled[2]:.3f}")))

    if outdir is not None:
        report.write(outdir)
    return report
