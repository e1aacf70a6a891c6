"""Acceptance suite: one test per exit criterion, each printing PASS/FAIL.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines. Every tolerance is pinned here; nothing is deferred to calibration.
"""

import time

import numpy as np
from scipy.ndimage import gaussian_filter

from helpers import (
    BARCHART_ROW_BAND,
    BARCHART_SIZE,
    BARCHART_ZONES,
    edge_rise_distance,
    make_smooth_frame,
    make_step_edge_frame,
    make_textured_frame,
    nlam_reference,
    random_partition_layout,
    rmse,
)
from turbseq.cli import main as cli_main
from turbseq.imgseq import Frame, Sequence, write_pgm
from turbseq.nlam import (
    average_nlam,
    build_partition,
    make_barchart,
    nlam_curve,
    normalize_curve,
)
from turbseq.registration import (
    DisplacementMap,
    RegParams,
    apply_warp,
    correct_sequence,
    register,
)
from turbseq.registration import _data_energy, data_term_with_gradient
from turbseq.simulate import SimConfig, degrade
from turbseq.temporal import (
    FilterKind,
    WindowSpec,
    sliding_filter,
    temporal_mean,
    temporal_median,
)

PARTITION_TEXT = """rows = 16 80
p = 5
zone 0: 8 56 2
zone 1: 64 112 3
zone 2: 120 168 4
zone 3: 176 224 6
zone 4: 232 280 8
"""


def _report(num, name, ok, elapsed, limit):
    status = "PASS" if ok else "FAIL"
    print(f"ACCEPTANCE {num:02d} {name}: {status} ({elapsed:.2f}s, limit {limit:.0f}s)")


def test_criterion_01_two_value_law():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    configs = []
    while len(configs) < 1000:
        na, nb = int(rng.integers(1, 8)), int(rng.integers(1, 8))
        if na == nb:
            continue
        a, b = rng.uniform(0, 255, size=2)
        configs.append((a, b, na, nb))

    ok = True
    by_total = {}
    for a, b, na, nb in configs:
        by_total.setdefault(na + nb, []).append((a, b, na, nb))
    for total, group in by_total.items():
        cols = len(group)
        values = np.empty((total, cols))
        for g, (a, b, na, nb) in enumerate(group):
            col = np.array([a] * na + [b] * nb)
            rng.shuffle(col)
            values[:, g] = col
        seq = Sequence([Frame(values[i : i + 1, :]) for i in range(total)])
        med = temporal_median(seq).pixels[0]
        mean = temporal_mean(seq).pixels[0]
        for g, (a, b, na, nb) in enumerate(group):
            majority = a if na > nb else b
            expected_mean = (a * na + b * nb) / (na + nb)
            if med[g] != majority:
                ok = False
            if abs(mean[g] - expected_mean) > 1e-12 * abs(expected_mean):
                ok = False
    elapsed = time.perf_counter() - t0
    _report(1, "two-value law", ok and elapsed < 1.0, elapsed, 1.0)
    assert ok
    assert elapsed < 1.0


def test_criterion_02_no_new_values():
    t0 = time.perf_counter()
    rng = np.random.default_rng(102)
    ok = True
    for _ in range(200):
        n = int(rng.integers(1, 10))
        h = int(rng.integers(1, 33))
        w = int(rng.integers(1, 33))
        stack = rng.uniform(0, 255, size=(n, h, w))
        seq = Sequence([Frame(s) for s in stack])
        med = temporal_median(seq).pixels
        if not np.all((stack == med[None]).any(axis=0)):
            ok = False
    elapsed = time.perf_counter() - t0
    _report(2, "no-new-values", ok and elapsed < 5.0, elapsed, 5.0)
    assert ok
    assert elapsed < 5.0


def test_criterion_03_edge_sharpness():
    t0 = time.perf_counter()
    clean = make_step_edge_frame(64, 64)
    cfg = SimConfig(dancing_amplitude=2.0, dancing_scale=12.0, seed=7, frames=15)
    seq, _ = degrade(clean, cfg)
    rise_median = edge_rise_distance(temporal_median(seq).pixels.mean(axis=0))
    rise_mean = edge_rise_distance(temporal_mean(seq).pixels.mean(axis=0))
    ok = rise_median <= rise_mean
    elapsed = time.perf_counter() - t0
    _report(3, f"edge sharpness (median {rise_median:.2f} vs mean {rise_mean:.2f} px)",
            ok and elapsed < 10.0, elapsed, 10.0)
    assert ok
    assert elapsed < 10.0


def test_criterion_04_gradient_check():
    t0 = time.perf_counter()
    rng = np.random.default_rng(104)
    t_steps, h, w = 3, 16, 16
    weight = 100.0

    def smooth(arr):
        f = gaussian_filter(arr, 2.0, mode="reflect")
        f -= f.min()
        return f / f.max()

    worst = 0.0
    for _ in range(20):
        moving = smooth(rng.standard_normal((h, w)))
        reference = smooth(rng.standard_normal((h, w)))
        vx = 0.4 * rng.standard_normal((t_steps, h, w))
        vy = 0.4 * rng.standard_normal((t_steps, h, w))
        _, gx, gy = data_term_with_gradient(moving, reference, vx, vy, weight)
        for _ in range(3):
            dx = rng.standard_normal((t_steps, h, w))
            dy = rng.standard_normal((t_steps, h, w))
            norm = np.sqrt((dx ** 2).sum() + (dy ** 2).sum())
            dx /= norm
            dy /= norm
            step = 1e-5
            ep = _data_energy(moving, reference, vx + step * dx, vy + step * dy, weight)
            em = _data_energy(moving, reference, vx - step * dx, vy - step * dy, weight)
            fd = (ep - em) / (2 * step)
            an = float((gx * dx).sum() + (gy * dy).sum())
            worst = max(worst, abs(fd - an) / max(abs(fd), abs(an)))
    ok = worst <= 1e-4
    elapsed = time.perf_counter() - t0
    _report(4, f"gradient check (worst rel err {worst:.2e})",
            ok and elapsed < 30.0, elapsed, 30.0)
    assert ok
    assert elapsed < 30.0


def test_criterion_05_translation_recovery():
    t0 = time.perf_counter()
    reference = make_smooth_frame(64, 64, seed=42)
    shift = DisplacementMap(np.full((64, 64), -2.0), np.zeros((64, 64)))
    moving = apply_warp(reference, shift)
    res = register(moving, reference, RegParams())
    m = 8
    epe = np.hypot(res.map.dx[m:-m, m:-m] - 2.0, res.map.dy[m:-m, m:-m]).mean()
    monotone = bool(np.all(np.diff(res.energy_trace) <= 0))
    ok = epe <= 0.5 and monotone and res.min_jacobian > 0
    elapsed = time.perf_counter() - t0
    _report(5, f"translation recovery (mean EPE {epe:.3f} px, "
               f"min_jac {res.min_jacobian:.3f})", ok and elapsed < 60.0, elapsed, 60.0)
    assert epe <= 0.5
    assert monotone
    assert res.min_jacobian > 0
    assert elapsed < 60.0


def test_criterion_06_warp_correction_end_to_end():
    t0 = time.perf_counter()
    clean = make_textured_frame(128, 128, seed=3)
    cfg = SimConfig(dancing_amplitude=3.0, dancing_scale=24.0, blur_sigma=0.3,
                    seed=99, frames=11)
    seq, _ = degrade(clean, cfg)
    _, reference, restored, _ = correct_sequence(seq, RegParams())
    r_median = rmse(reference, clean)
    r_restored = rmse(restored, clean)
    ok = r_restored <= 0.9 * r_median
    elapsed = time.perf_counter() - t0
    _report(6, f"warp correction (restored {r_restored:.2f} vs 0.9x median "
               f"{0.9 * r_median:.2f})", ok and elapsed < 300.0, elapsed, 300.0)
    assert ok
    assert elapsed < 300.0


def test_criterion_07_nlam_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(107)
    ok = True
    for _ in range(100):
        w = int(rng.integers(12, 60))
        h = int(rng.integers(8, 40))
        zones, band, p = random_partition_layout(rng, w, h)
        part = build_partition(w, h, zones, band, p)
        frame = Frame(rng.uniform(0, 255, size=(h, w)))
        if list(nlam_curve(frame, part).delta_s) != nlam_reference(frame, part):
            ok = False
    elapsed = time.perf_counter() - t0
    _report(7, "pseudo-MTF oracle equivalence", ok and elapsed < 5.0, elapsed, 5.0)
    assert ok
    assert elapsed < 5.0


def test_criterion_08_mtf_behavior_under_blur():
    t0 = time.perf_counter()
    w, h = BARCHART_SIZE
    chart = make_barchart(w, h, BARCHART_ZONES, low=30, high=220)
    part = build_partition(w, h, BARCHART_ZONES, BARCHART_ROW_BAND, p=5)
    tol = 1e-9
    curves = {}
    for sigma in (0, 1, 2, 3):
        img = chart.pixels if sigma == 0 else gaussian_filter(
            chart.pixels, sigma, mode="nearest")
        curves[sigma] = np.array(
            normalize_curve(nlam_curve(Frame(img), part)).delta_s)
    ok_sigma = all(
        np.all(curves[b] <= curves[a] + tol) for a, b in ((0, 1), (1, 2), (2, 3))
    )
    ok_freq = all(np.all(np.diff(curves[s]) <= tol) for s in (1, 2, 3))
    ok = ok_sigma and ok_freq
    elapsed = time.perf_counter() - t0
    _report(8, "pseudo-MTF monotone in blur and frequency",
            ok and elapsed < 10.0, elapsed, 10.0)
    assert ok_sigma
    assert ok_freq
    assert elapsed < 10.0


def test_criterion_09_high_frequency_ordering():
    t0 = time.perf_counter()
    w, h = BARCHART_SIZE
    chart = make_barchart(w, h, BARCHART_ZONES, low=30, high=220)
    part = build_partition(w, h, BARCHART_ZONES, BARCHART_ROW_BAND, p=5)
    cfg = SimConfig(dancing_amplitude=1.5, dancing_scale=12.0,
                    speckle_contrast=0.10, seed=11, frames=15)
    seq, _ = degrade(chart, cfg)
    spec = WindowSpec(5)
    med_seq = sliding_filter(seq, FilterKind.MEDIAN, spec)
    mean_seq = sliding_filter(seq, FilterKind.MEAN, spec)
    med_avg = average_nlam([nlam_curve(f, part) for f in med_seq.frames[:10]])
    mean_avg = average_nlam([nlam_curve(f, part) for f in mean_seq.frames[:10]])
    ok = med_avg.delta_s[-1] >= mean_avg.delta_s[-1]
    elapsed = time.perf_counter() - t0
    _report(9, f"high-frequency ordering (median {med_avg.delta_s[-1]:.2f} vs "
               f"mean {mean_avg.delta_s[-1]:.2f})", ok and elapsed < 120.0,
            elapsed, 120.0)
    assert ok
    assert elapsed < 120.0


def test_criterion_10_pipeline_determinism(tmp_path):
    t0 = time.perf_counter()
    w, h = BARCHART_SIZE
    chart = make_barchart(w, h, BARCHART_ZONES, low=30, high=220)
    clean = tmp_path / "clean.pgm"
    write_pgm(chart, clean)
    part = tmp_path / "part.cfg"
    part.write_text(PARTITION_TEXT)
    cfg = tmp_path / "run.cfg"
    cfg.write_text(
        "[simulate]\n"
        "frames = 5\nseed = 33\ndancing_amplitude = 1.2\ndancing_scale = 10\n"
        "speckle_contrast = 0.05\nblur_sigma = 0.4\n"
        "[register]\nmax_iters = 40\n"
    )
    outputs = {}
    for label, threads in (("a", "1"), ("b", "2")):
        outdir = tmp_path / label
        rc = cli_main(["pipeline", "--clean", str(clean), "--config", str(cfg),
                       "--partition", str(part), "--out-dir", str(outdir),
                       "--threads", threads])
        assert rc == 0
        outputs[label] = {
            p.name: p.read_bytes() for p in sorted(outdir.glob("*.csv"))
        }
    ok = outputs["a"] == outputs["b"] and len(outputs["a"]) >= 6
    elapsed = time.perf_counter() - t0
    _report(10, f"pipeline determinism across threads "
                f"({len(outputs['a'])} CSVs byte-identical)",
            ok and elapsed < 300.0, elapsed, 300.0)
    assert ok
    assert elapsed < 300.0
