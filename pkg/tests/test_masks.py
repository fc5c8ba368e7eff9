import numpy as np
import pytest
from conftest import random_complex
from hypothesis import given, settings
from hypothesis import strategies as st

from hvabss.masks import (
    HvaConfig,
    HvaMask,
    cepstrum_forward,
    cepstrum_inverse,
    cosine_shrink_mask,
    hva_mask,
    mask_l1,
    mask_l21,
    mask_model_iva,
    mask_p_shrinkage,
    mask_social,
    wiener_like_mask,
)


def test_mask_l1_values():
    lam = 0.4
    np.testing.assert_array_equal(mask_l1(np.array([0.8, 0.4, 0.1, 0.0]), lam), [0.5, 0.0, 0.0, 0.0])
    np.testing.assert_array_equal(mask_l1(np.array([1j, 0.0]), 0.0), [1.0, 0.0])


def test_mask_l21_values(rng):
    z = np.array([[[0.6, 0.8]]])  # group norm 1
    np.testing.assert_array_equal(mask_l21(z, 0.5), [[[0.5, 0.5]]])
    z = random_complex(rng, (2, 3, 1))
    np.testing.assert_allclose(mask_l21(z, 0.7), mask_l1(z, 0.7), atol=1e-15)
    assert np.all(mask_l21(random_complex(rng, (2, 3, 4)), 0.0) == 1.0)


def test_mask_model_iva_values():
    np.testing.assert_array_equal(mask_model_iva(np.array([0.25, 0.0, 0.75]), 0.25), [0.5, 0.0, 0.75])
    with pytest.raises(ValueError, match="non-negative"):
        mask_model_iva(np.array([-1.0]), 1.0)


def test_cepstrum_constant_spectrum():
    x = np.full((1, 2, 6), 1.7)
    cep = cepstrum_forward(x)
    np.testing.assert_allclose(cep[..., 0], 1.7, atol=1e-15)
    np.testing.assert_allclose(cep[..., 1:], 0.0, atol=1e-15)


def test_cepstrum_matches_naive_dft(rng):
    x = rng.standard_normal((2, 3, 5))
    for C in (5, 8):
        cep = cepstrum_forward(x, C)
        naive = np.zeros((2, 3, C), complex)
        for c in range(C):
            for f in range(5):
                naive[..., c] += x[..., f] * np.exp(-2j * np.pi * c * f / C)
        np.testing.assert_allclose(cep, naive / 5, atol=1e-12)
        back = np.zeros((2, 3, 5), complex)
        for f in range(5):
            for c in range(C):
                back[..., f] += cep[..., c] * np.exp(2j * np.pi * c * f / C)
        np.testing.assert_allclose(cepstrum_inverse(cep, 5, real=False), back * 5 / C, atol=1e-12)


@pytest.mark.parametrize("factor", [1, 2])
def test_cepstrum_round_trip(rng, factor):
    x = rng.standard_normal((2, 4, 9))
    cep = cepstrum_forward(x, factor * 9)
    assert cep.shape == (2, 4, factor * 9)
    np.testing.assert_allclose(cepstrum_inverse(cep, 9), x, atol=1e-12)


def test_cepstrum_inverse_trivial_cases():
    assert not np.any(cepstrum_inverse(np.zeros((1, 1, 4), complex), 4))
    delta = np.zeros((1, 1, 4), complex)
    delta[..., 0] = 2.5
    np.testing.assert_allclose(cepstrum_inverse(delta, 4), 2.5, atol=1e-15)


def test_cepstrum_rejects_short_quefrency():
    with pytest.raises(ValueError, match="quefrency"):
        cepstrum_forward(np.zeros((1, 1, 8)), 4)


@pytest.mark.parametrize("kappa", [1, 2, 3, 5])
def test_cosine_fixed_points(kappa):
    lam = 0.3
    out = cosine_shrink_mask(np.array([0.0, lam, 2 * lam, 10 * lam, -lam * 1j]), lam, kappa)
    assert out.tolist() == [0.0, 0.5, 1.0, 1.0, 0.5]


def test_cosine_lam_zero_is_identity_mask(rng):
    assert np.all(cosine_shrink_mask(random_complex(rng, (2, 3, 4)), 0.0, 2) == 1.0)


def test_cosine_monotone_and_steepening():
    lam = 1.0
    nu = np.linspace(0, 3, 601)
    prev_lo, prev_hi = None, None
    for kappa in range(1, 6):
        m = cosine_shrink_mask(nu, lam, kappa)
        assert np.all(np.diff(m) >= 0)
        lo, hi = cosine_shrink_mask(np.array([lam / 2, 3 * lam / 2]), lam, kappa)
        if prev_lo is not None:
            assert lo < prev_lo and hi > prev_hi
        prev_lo, prev_hi = lo, hi


def test_cosine_approaches_hard_threshold():
    lam = 1.0
    nu = np.linspace(0, 3, 3001)
    nu = nu[np.abs(nu - lam) > 0.05]  # away from the jump
    step = (nu > lam).astype(float)
    dist = [np.max(np.abs(cosine_shrink_mask(nu, lam, k) - step)) for k in range(1, 7)]
    assert all(b < a for a, b in zip(dist, dist[1:]))


def test_wiener_like_values():
    np.testing.assert_allclose(wiener_like_mask(np.array([[[1.0]], [[1.0]]]), 1.0).ravel(), [0.5, 0.5])
    np.testing.assert_array_equal(wiener_like_mask(np.array([[[2.0]], [[0.0]]]), 1.0).ravel(), [1.0, 0.0])
    np.testing.assert_allclose(wiener_like_mask(np.array([[[3.0]], [[3.0]]]), 0.5).ravel(), np.sqrt(0.5))
    # all-zero bin falls back to uniform
    np.testing.assert_allclose(wiener_like_mask(np.zeros((3, 1, 1)), 0.5).ravel(), np.sqrt(1 / 3))
    with pytest.raises(ValueError):
        wiener_like_mask(-np.ones((2, 1, 1)))


@pytest.mark.parametrize("N", [2, 3])
def test_hva_identical_sources(rng, N):
    z = np.repeat(random_complex(rng, (1, 6, 16)), N, axis=0)
    np.testing.assert_allclose(hva_mask(z), (1 / N) ** (1 / N), atol=1e-12)


def test_hva_single_source_is_ones(rng):
    np.testing.assert_allclose(hva_mask(random_complex(rng, (1, 4, 8))), 1.0, atol=1e-15)


def test_hva_reduces_to_wiener(rng):
    z = random_complex(rng, (3, 8, 16))
    for gamma in (None, 1.0):
        out = hva_mask(z, lam=0.0, eps=0.0, gamma=gamma)
        ref = wiener_like_mask(np.abs(z) ** 2, 1 / 3 if gamma is None else gamma)
        np.testing.assert_allclose(out, ref, atol=1e-9)


def test_hva_frame_scale_invariance(rng):
    z = random_complex(rng, (2, 5, 32))
    scaled = z.copy()
    scaled[:, 2] *= 10.0
    a = hva_mask(z, eps=0.0, lam=0.2, kappa=2)
    b = hva_mask(scaled, eps=0.0, lam=0.2, kappa=2)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_hva_is_non_separable(rng):
    z = random_complex(rng, (2, 4, 16))
    other = z.copy()
    other[1] *= 1 + rng.random(other[1].shape)
    assert np.max(np.abs(hva_mask(z)[0] - hva_mask(other)[0])) > 1e-3
    # the classic masks are separable
    np.testing.assert_array_equal(mask_l21(z, 0.5)[0], mask_l21(other, 0.5)[0])
    np.testing.assert_array_equal(mask_l1(z, 0.5)[0], mask_l1(other, 0.5)[0])


@pytest.mark.parametrize("cfg", [HvaConfig(), HvaConfig(gamma=0.7), HvaConfig(quefrency_length=64, kappa=1)])
def test_partition_of_unity(rng, cfg):
    z = random_complex(rng, (3, 5, 32))
    gamma = 1 / 3 if cfg.gamma is None else cfg.gamma
    np.testing.assert_allclose((hva_mask(z, cfg) ** (1 / gamma)).sum(axis=0), 1.0, atol=1e-12)
    np.testing.assert_allclose((wiener_like_mask(np.abs(z) ** 2, gamma) ** (1 / gamma)).sum(axis=0), 1.0,
                               atol=1e-12)


def test_hva_zero_frame_is_uniform(rng):
    z = random_complex(rng, (2, 3, 16))
    z[:, 1] = 0
    np.testing.assert_allclose(hva_mask(z)[:, 1], 0.5**0.5, atol=1e-12)


def test_hva_rejects_non_finite(rng):
    z = random_complex(rng, (2, 3, 8))
    z[0, 0, 0] = np.nan
    with pytest.raises(ValueError, match="non-finite"):
        hva_mask(z)


@pytest.mark.parametrize("kwargs", [dict(lam=-1), dict(kappa=0), dict(gamma=0), dict(eps=-1)])
def test_hva_config_validation(kwargs):
    with pytest.raises(ValueError):
        HvaConfig(**kwargs)


def test_hva_mask_callable_is_picklable(rng):
    import pickle

    m = pickle.loads(pickle.dumps(HvaMask(HvaConfig(lam=0.1))))
    z = random_complex(rng, (2, 3, 8))
    np.testing.assert_array_equal(m(z), hva_mask(z, lam=0.1))


def _random_tensor(rng):
    shape = (int(rng.integers(1, 4)), int(rng.integers(1, 5)), int(rng.integers(1, 17)))
    z = random_complex(rng, shape) * 10.0 ** rng.uniform(-12, 12, shape)
    z[rng.random(shape) < 0.2] = 0
    return z


def test_all_masks_in_unit_interval():
    rng = np.random.default_rng(7)
    for _ in range(1000):
        z = _random_tensor(rng)
        lam = float(10.0 ** rng.uniform(-3, 3))
        masks = [
            mask_l1(z, lam),
            mask_l21(z, lam),
            mask_p_shrinkage(z, lam, 0.5),
            mask_social(z, lam, np.ones((3, 3))),
            mask_model_iva(np.abs(z) ** 2, lam),
            wiener_like_mask(np.abs(z) ** 2, 0.5),
            hva_mask(z, lam=float(rng.uniform(0, 1)), kappa=int(rng.integers(1, 4))),
        ]
        for m in masks:
            assert m.shape == z.shape
            assert np.all(np.isfinite(m)) and np.all((m >= 0) & (m <= 1))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), lam=st.floats(0.0, 2.0), kappa=st.integers(1, 4))
def test_hva_default_eps_unit_interval(seed, lam, kappa):
    z = random_complex(np.random.default_rng(seed), (2, 3, 12))
    m = hva_mask(z, lam=lam, kappa=kappa)
    assert np.all((m >= 0) & (m <= 1))
