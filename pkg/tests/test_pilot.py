import csv

import numpy as np
import pytest

from afdm_chanest.channel import build_effective_channel, transmit
from afdm_chanest.iorel import alpha, f_kernel_sum
from afdm_chanest.params import ChannelPath, ChannelSpec, ConfigError, GuardDoesNotFitError, WaveformConfig, derive_limits
from afdm_chanest.pilot import (
    build_dual_frames,
    build_pilot_frame,
    dump_frame_csv,
    frame_kinds,
    full_column,
    mutual_coherence,
    nmse_a,
    template_a,
    template_t,
    truncate,
)
from afdm_chanest.params import reference_setup


@pytest.fixture(scope="module")
def frame(ref):
    _, cfg, limits = ref
    return build_pilot_frame(cfg, limits, 30.0, np.random.default_rng(0))


def test_layout(ref, frame):
    _, cfg, _ = ref
    kinds = frame_kinds(frame)
    assert (kinds == "data").sum() == 127
    assert (kinds == "guard").sum() == 128
    assert frame.pilot_index == 64 and kinds[64] == "pilot"
    x = frame.x.samples
    assert x[64] == pytest.approx(np.sqrt(1000.0))
    assert not x[frame.guard_index].any()
    assert np.all(np.abs(x[frame.data_index]) > 0)
    assert frame.bits.size == 254
    assert len(frame.window_rows) == 65


def test_pilot_power(ref):
    _, cfg, limits = ref
    f = build_pilot_frame(cfg, limits, 0.0, 1)
    assert abs(f.pilot_value) == pytest.approx(1.0)
    assert np.mean(np.abs(f.x.samples[f.data_index]) ** 2) == pytest.approx(1.0)


def test_zero_spread_window():
    limits, cfg = derive_limits(ChannelSpec(0, 0), WaveformConfig(8, 1e3, 1), pilot=True)
    assert limits.q_total == 2 and limits.window == 3
    f = build_pilot_frame(cfg, limits, 0.0, 0)
    assert len(f.window_rows) == 3


def test_guard_errors_and_wrap(ref):
    _, cfg, limits = ref
    small = WaveformConfig(64, 1e3, 4, c1=13 / 128)
    with pytest.raises(GuardDoesNotFitError, match="guard does not fit"):
        build_pilot_frame(small, limits, 30.0, 0)
    f = build_pilot_frame(cfg, limits, 30.0, 0, pilot_index=250)
    assert not f.x.samples[f.guard_index].any()
    assert f.x.samples[250] != 0 and f.data_index.size == 127


def test_dual_frames(ref, ref_prime):
    _, cfg, limits = ref
    _, cfg2, limits2 = ref_prime
    f1, f2 = build_dual_frames(cfg, cfg2, limits, limits2, 30.0, 3)
    assert (f1.limits.q_total, f2.limits.q_total) == (64, 74)
    assert f2.pilot_index == 74 and f2.data_index.size == 256 - 149
    assert not np.array_equal(f1.bits[:100], f2.bits[:100])
    g1, g2 = build_dual_frames(cfg, cfg2, limits, limits2, 30.0, 3, same_payload=True)
    h1, h2 = build_dual_frames(cfg, cfg2, limits, limits2, 30.0, 3, same_payload=True)
    assert np.array_equal(g1.bits, h1.bits) and np.array_equal(g2.bits, h2.bits)
    assert np.array_equal(g1.bits[:200], g2.bits[:200])
    with pytest.raises(ConfigError):
        build_dual_frames(cfg, cfg, limits, limits)


def pilot_only(frame):
    x = np.zeros(len(frame.x), dtype=complex)
    x[frame.pilot_index] = frame.pilot_value
    return x


def test_truncate(ref, frame):
    _, cfg, _ = ref
    y = transmit(cfg, pilot_only(frame), [ChannelPath(1, 2.0, 1.0)])
    yt = truncate(cfg, y, frame)
    assert len(yt) == 65
    nz = np.flatnonzero(np.abs(yt.y_t) > 1e-9)
    assert list(yt.offsets[nz]) == [-25]
    y = transmit(cfg, pilot_only(frame), [ChannelPath(1, 0.0, 0.0)])
    yt = truncate(cfg, y, frame)
    assert yt.y_t[yt.offsets == 0][0] == pytest.approx(frame.pilot_value)
    assert np.abs(yt.y_t[yt.offsets != 0]).max() < 1e-9


def test_truncated_superposition(ref, frame):
    _, cfg, _ = ref
    paths = [ChannelPath(0.6, 2.25, 1.4), ChannelPath(-0.4j, 0.7, -1.2)]
    yt = truncate(cfg, transmit(cfg, pilot_only(frame), paths), frame)
    expected = frame.pilot_value * sum(p.gain * template_a(cfg, frame, p.delay_norm, p.doppler_norm) for p in paths)
    assert np.allclose(yt.y_t, expected, atol=1e-9)


def test_template_a(ref, frame):
    _, cfg, _ = ref
    a = template_a(cfg, frame, 2.0, 1.0)
    offsets = np.arange(-58, 7)
    assert abs(a[offsets == -25][0]) == pytest.approx(1.0)
    assert np.count_nonzero(np.abs(a) > 1e-9) == 1
    # direct N-term sum oracle
    rows = frame.window_rows
    direct = alpha(cfg, rows, 64, 1.4, 2.25) * f_kernel_sum(cfg, rows, 64, 1.4, 2.25)
    a = template_a(cfg, frame, 2.25, 1.4)
    assert np.allclose(a, direct, atol=1e-13)
    # frozen: energy lost outside the 65-sample window
    assert 1 - np.linalg.norm(a) ** 2 == pytest.approx(1.2203e-3, rel=1e-3)
    col = build_effective_channel(cfg, [ChannelPath(1, 2.25, 1.4)]).h_eff[:, 64]
    assert np.allclose(a, col[rows], atol=1e-12)
    assert np.allclose(full_column(cfg, 64, 2.25, 1.4), col, atol=1e-12)


def test_template_t(ref, frame):
    _, cfg, _ = ref
    t = template_t(cfg, frame, 0.0)
    assert np.abs(t[58]) == pytest.approx(1) and np.count_nonzero(np.abs(t) > 1e-12) == 1
    t = template_t(cfg, frame, -25.0)
    assert np.abs(t[58 - 25]) == pytest.approx(1) and np.count_nonzero(np.abs(t) > 1e-12) == 1
    rng = np.random.default_rng(4)
    for l, k in [(2.25, 1.4)] + [(rng.uniform(0, 4), rng.uniform(-2, 2)) for _ in range(20)]:
        a = template_a(cfg, frame, l, k)
        t = template_t(cfg, frame, -13 * l + k)
        assert np.allclose(np.abs(a), np.abs(t), atol=1e-10)
        assert abs(np.vdot(t, a)) == pytest.approx(np.linalg.norm(a) ** 2, abs=1e-10)


def test_mutual_coherence(ref):
    _, cfg, _ = ref
    assert mutual_coherence(cfg, 2.25, 1.4, 2.25, 1.4).exact == pytest.approx(1.0)
    c = mutual_coherence(cfg, 1.0, 0.0, 2.0, 0.0)
    assert c.exact < 1e-12 and c.sinc_approx < 1e-12
    rng = np.random.default_rng(5)
    for _ in range(50):
        l1, l2 = rng.uniform(0, 4, 2)
        k1, k2 = rng.uniform(-2, 2, 2)
        c = mutual_coherence(cfg, l1, k1, l2, k2)
        assert abs(c.exact - c.sinc_approx) < 0.02
    c = mutual_coherence(cfg, 1.3, 0.2, 2.7, -1.1)
    assert (c.exact, c.sinc_approx) == pytest.approx((0.016480, 0.016324), abs=1e-6)


def test_nmse_a(ref, frame):
    _, cfg, limits = ref
    assert nmse_a(cfg, frame, [ChannelPath(1, 2.0, 1.0)]) < 1e-24
    two = [ChannelPath(1, 1.2, 0.3), ChannelPath(1, 3.1, -0.8)]
    assert nmse_a(cfg, frame, two) == pytest.approx(nmse_a(cfg, limits, two))
    assert 0 < nmse_a(cfg, frame, two) < 0.05


def test_frame_csv(tmp_path, frame):
    path = tmp_path / "frame.csv"
    dump_frame_csv(frame, path)
    rows = list(csv.DictReader(path.open()))
    assert len(rows) == 256 and rows[64]["kind"] == "pilot"
    assert float(rows[64]["re"]) == pytest.approx(np.sqrt(1000))
    assert {r["kind"] for r in rows} == {"pilot", "guard", "data"}
