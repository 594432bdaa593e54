from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pdmd import (FlexChainConfig, FlexChainPlant, eval_at,
                  flexchain_instability_theta, linearize_plant, make_random_polylpv)
from pdmd.errors import DataError
from pdmd.plants import linear_family, load_plant, rk4_linear_chain, save_plant


@pytest.fixture
def chain():
    cfg = FlexChainConfig.from_modal(N=10, f1=0.5, zeta=0.02, k_cub=100.0, a1=1.5, a2=5.0, dt=0.005)
    return FlexChainPlant(cfg)


def _first_mode_state(plant, amp=0.05):
    w, V = np.linalg.eigh(plant.K)
    q = amp * V[:, 0] / np.abs(V[:, 0]).max()
    return np.concatenate([plant.config.q_scale * q, 0.3 * amp * V[:, 0]])


def test_origin_is_equilibrium(chain):
    for th in (-1.0, 0.0, 0.7):
        assert np.all(chain.step(np.zeros(20), [0.0], th) == 0)


def test_poly_plant_step_is_definitional(random_plant):
    rng = np.random.default_rng(0)
    x, u = rng.standard_normal(6), rng.standard_normal(2)
    A, B = eval_at(random_plant.model, -0.3)
    np.testing.assert_allclose(random_plant.step(x, u, -0.3), A @ x + B @ u, rtol=0, atol=1e-14)


def test_modal_construction_places_first_mode():
    cfg = FlexChainConfig.from_modal(N=10, f1=0.5, zeta=0.02)
    w2 = np.linalg.eigvalsh(FlexChainPlant(cfg).K / cfg.m)
    assert np.isclose(np.sqrt(w2[0]), np.pi, rtol=1e-12)
    assert np.isclose(cfg.c, 2 * 0.02 * np.pi)


def test_rk4_step_matches_fine_euler(chain):
    # the Euler reference itself is only accurate to ~(h w1)^2 / 200, so use the 1 ms rate
    chain = FlexChainPlant(replace(chain.config, dt=0.001))
    x = _first_mode_state(chain)
    u, th = np.array([0.2]), 0.1
    h = chain.dt
    y = x.copy()
    for _ in range(100):
        y = y + (h / 100) * chain.rhs(y, u, th)
    rk = chain.step(x, u, th)
    assert np.linalg.norm(rk - y) <= 1e-6 * np.linalg.norm(y)


def test_rk4_observed_order(chain):
    x = _first_mode_state(chain, 0.3)
    u, th = np.array([1.0]), -0.2
    errs, hs = [], [0.02, 0.01, 0.005]
    for h in hs:
        coarse = FlexChainPlant(replace(chain.config, dt=h))
        fine = FlexChainPlant(replace(chain.config, dt=h / 200))
        ref = x.copy()
        for _ in range(200):
            ref = fine.step(ref, u, th)
        errs.append(np.linalg.norm(coarse.step(x, u, th) - ref))
    slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    assert slope >= 4.0


def test_unforced_chain_dissipates_energy():
    cfg = FlexChainConfig.from_modal(N=8, f1=1.0, zeta=0.05, k_cub=50.0, dt=0.002)
    plant = FlexChainPlant(cfg)
    rng = np.random.default_rng(1)
    x = 0.2 * rng.standard_normal(16)
    E = plant.energy(x)
    for _ in range(500):
        x = plant.step(x, [0.0], 0.0)
        E_next = plant.energy(x)
        assert E_next <= E + 1e-6
        E = E_next


def test_integrator_check_rejects_coarse_dt():
    with pytest.raises(DataError, match="RK4"):
        FlexChainPlant(FlexChainConfig(N=10, k_lin=1764.0, dt=0.2))


@pytest.mark.parametrize("kw", [dict(N=1), dict(m=0.0), dict(k_lin=-1.0), dict(c=-0.1), dict(dt=0.0),
                                dict(b=(1.0, 2.0)), dict(q_scale=0.0)])
def test_config_validation(kw):
    with pytest.raises(DataError):
        FlexChainConfig(**kw)


def test_fd_linearization_matches_closed_form(chain):
    for th in (-0.5, 0.0, 0.8):
        A, B = linearize_plant(chain, np.zeros(20), [0.0], th)
        Ad, Bd = rk4_linear_chain(chain, th)
        assert np.abs(A - Ad).max() <= 1e-6
        assert np.abs(B - Bd).max() <= 1e-6


def test_fd_linearization_exact_on_poly_plant(random_plant):
    A, B = linearize_plant(random_plant, np.zeros(6), np.zeros(2), 0.4)
    A0, B0 = eval_at(random_plant.model, 0.4)
    assert np.linalg.norm(A - A0) <= 1e-8 * np.linalg.norm(A0)
    assert np.linalg.norm(B - B0) <= 1e-8 * np.linalg.norm(B0)


def test_linearization_argument_checks(chain):
    with pytest.raises(ValueError):
        linearize_plant(chain, np.zeros(20), [0.0], 0.0, h=0.0)
    with pytest.raises(ValueError, match="fixed point"):
        linearize_plant(chain, np.zeros(20), [1.0], 0.0)


def test_instability_onset_tracks_damping_balance():
    base = FlexChainConfig.from_modal(N=10, f1=0.5, zeta=0.02, dt=0.01)
    grid = np.arange(-1, 1.0001, 0.05)
    assert flexchain_instability_theta(replace(base, a0=0.5 * base.c), grid) is None
    for a0, a1 in ((0.0, base.c / 0.5), (0.05, 0.4), (-0.02, 0.25)):
        cfg = replace(base, a0=a0, a1=a1)
        theta_star = (cfg.c - a0) / a1
        found = flexchain_instability_theta(cfg, grid)
        assert found is not None and abs(found - theta_star) <= 0.05 + 1e-12
    cfg = replace(base, a1=base.c / 0.5)
    assert flexchain_instability_theta(cfg, [0.2]) is None
    with pytest.raises(ValueError):
        flexchain_instability_theta(cfg, [0.5, 0.1])


def test_random_plant_deterministic_and_bounded():
    a = make_random_polylpv(5, 2, 3, 0.8, seed=7)
    b = make_random_polylpv(5, 2, 3, 0.8, seed=7)
    assert np.array_equal(a.model.A, b.model.A) and np.array_equal(a.model.B, b.model.B)
    for th in (-1, 0, 1):
        assert np.abs(np.linalg.eigvals(eval_at(a.model, th)[0])).max() <= 0.8 + 1e-9
    lti = make_random_polylpv(3, 1, 0, seed=2)
    assert lti.model.n_p == 0


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 1000))
def test_random_plant_simulation_stays_bounded(seed):
    plant = make_random_polylpv(4, 2, 2, 0.9, seed=seed)
    rng = np.random.default_rng(seed)
    x = np.zeros(4)
    for k in range(1000):
        x = plant.step(x, rng.uniform(-1, 1, 2), rng.uniform(-1, 1))
    assert np.all(np.isfinite(x)) and np.abs(x).max() < 1e6


def test_velocity_rule(chain):
    assert chain.velocity_index(-1) == 19 and chain.velocity_index(1) == 10
    rule = chain.theta_rule(v0=2.0)
    x = np.zeros(20)
    x[19] = 1.0
    assert np.isclose(rule(x), -np.arcsin(0.5))
    with pytest.raises(ValueError):
        chain.velocity_index(11)


def test_plant_config_round_trip(tmp_path, chain, random_plant):
    for plant in (chain, random_plant):
        p = tmp_path / f"{plant.kind}.json"
        save_plant(plant, p)
        back = load_plant(p)
        x, u = np.random.default_rng(0).standard_normal((2, plant.n_x))[:, :], np.ones(plant.n_u)
        np.testing.assert_array_equal(back.step(x[0] * 0.01, u, 0.3), plant.step(x[0] * 0.01, u, 0.3))


def test_plant_config_errors(tmp_path):
    p = tmp_path / "p.json"
    p.write_text('{"kind": "teapot"}')
    with pytest.raises(DataError):
        load_plant(p)
    p.write_text('{"kind": "flex-chain", "stiffness": 3}')
    with pytest.raises(DataError):
        load_plant(p)
    with pytest.raises(FileNotFoundError):
        load_plant(tmp_path / "missing.json")
    p.write_text('{"kind": "exact-poly-lpv", "random": {"n_x": 3, "n_u": 1, "n_p": 1}}')
    assert load_plant(p, seed=4).n_x == 3


def test_linear_family(chain, random_plant):
    fam = linear_family(chain)
    Ad, _ = rk4_linear_chain(chain, 0.2)
    assert np.abs(fam(0.2).A[0] - Ad).max() <= 1e-6
    np.testing.assert_array_equal(linear_family(random_plant)(0.5).A[0], eval_at(random_plant.model, 0.5)[0])
