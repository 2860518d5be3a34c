import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from afdm_chanest.daft import (
    DaftFrame,
    Domain,
    add_cpp,
    cpp_phase,
    daft_matrix,
    demodulate,
    demodulate_dense,
    kernel,
    modulate,
    modulate_dense,
    remove_cpp,
)
from afdm_chanest.params import ConfigError

from _util import small_cfg


def rand_c(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


@pytest.mark.parametrize("n", [64, 256, 1024])
def test_unitary(n):
    _, cfg = small_cfg(n, 4)
    a = daft_matrix(replace(cfg, c2=0.0123))
    assert np.linalg.norm(a.conj().T @ a - np.eye(n)) < 1e-10


def test_kernel_values(ref):
    _, cfg, _ = ref
    assert kernel(cfg, 1, 1) == pytest.approx(np.exp(2j * np.pi * (13 / 512 + 1 / 256)) / 16, abs=1e-15)
    assert kernel(replace(cfg, c2=0.3), 0, 0) == pytest.approx(1 / 16)
    _, zero = small_cfg(8, 1, c1=0.0)
    nb, n = np.meshgrid(np.arange(8), np.arange(8), indexing="ij")
    assert np.allclose(kernel(zero, nb, n), np.exp(2j * np.pi * nb * n / 8) / np.sqrt(8), atol=1e-15)


def test_modulate_matches_dense(ref):
    _, cfg, _ = ref
    x = np.ones(cfg.n, dtype=complex)
    s = modulate(cfg, x)
    assert s.domain is Domain.TIME
    assert np.allclose(s.samples, daft_matrix(cfg).conj().T @ x, atol=1e-9)
    rng = np.random.default_rng(1)
    c = replace(cfg, c2=0.01)
    x = rand_c(rng, cfg.n)
    assert np.allclose(modulate(c, x).samples, modulate_dense(c, x).samples, atol=1e-9)
    r = rand_c(rng, cfg.n)
    assert np.allclose(demodulate(c, r).samples, demodulate_dense(c, r).samples, atol=1e-9)


def test_impulse_is_flat_without_chirps():
    _, cfg = small_cfg(16, 2, c1=0.0)
    x = np.zeros(16)
    x[0] = 1
    assert np.allclose(modulate(cfg, x).samples, 1 / 4)
    # impulse at n on the DAFT side is the n-th column of A^H
    x = np.zeros(16)
    x[3] = 1
    _, c = small_cfg(16, 2)
    assert np.allclose(modulate(c, x).samples, daft_matrix(c).conj().T[:, 3])


def test_zero_chirp_is_inverse_dft():
    _, cfg = small_cfg(32, 2, c1=0.0)
    x = rand_c(np.random.default_rng(2), 32)
    assert np.allclose(modulate(cfg, x).samples, np.fft.ifft(x, norm="ortho"), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31), n=st.sampled_from([8, 30, 64, 256]), c2=st.floats(-0.5, 0.5))
def test_roundtrip_and_parseval(seed, n, c2):
    _, cfg = small_cfg(n, 1, c2=c2)
    x = rand_c(np.random.default_rng(seed), n)
    s = modulate(cfg, x)
    assert abs(np.linalg.norm(s.samples) - np.linalg.norm(x)) < 1e-10 * max(1.0, np.linalg.norm(x))
    assert np.allclose(demodulate(cfg, s).samples, x, atol=1e-10)


def test_domain_and_length_checks(ref):
    _, cfg, _ = ref
    with pytest.raises(ConfigError):
        modulate(cfg, np.zeros(10))
    with pytest.raises(ConfigError):
        modulate(cfg, DaftFrame(np.zeros(cfg.n), Domain.TIME))
    with pytest.raises(ConfigError):
        demodulate(cfg, DaftFrame(np.zeros(cfg.n), Domain.DAFT))


def test_cpp_roundtrip_and_phase(ref):
    _, cfg, _ = ref
    s = modulate(cfg, rand_c(np.random.default_rng(3), cfg.n))
    ext = add_cpp(cfg, s)
    assert ext.shape == (cfg.n + cfg.cpp_len,)
    assert np.array_equal(remove_cpp(cfg, ext).samples, s.samples)
    # 2Nc1 odd and N even: N^2 c1 and 2N c1 are integers, the prefix is cyclic
    assert np.allclose(ext[: cfg.cpp_len], s.samples[-cfg.cpp_len :], atol=1e-9)
    odd = replace(cfg, c1=0.0137)
    ext = add_cpp(odd, s)
    nbar = np.arange(-4, 0)
    expected = s.samples[256 + nbar] * np.exp(-2j * np.pi * 0.0137 * (256**2 + 2 * 256 * nbar))
    assert np.allclose(ext[:4], expected)
    assert np.allclose(cpp_phase(odd, nbar), np.exp(-2j * np.pi * 0.0137 * (256**2 + 2 * 256 * nbar)))


def test_cpp_errors(ref):
    _, cfg, _ = ref
    s = modulate(cfg, np.ones(cfg.n))
    with pytest.raises(ConfigError):
        add_cpp(cfg, s, cpp_len=cfg.n + 1)
    with pytest.raises(ConfigError):
        remove_cpp(cfg, np.zeros(cfg.n))
