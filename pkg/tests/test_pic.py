import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from picbalance import _kernels_py, kernels
from picbalance.grid import Domain, FieldGrid
from picbalance.pic import (ParticleSet, PicState, TwoStreamConfig, cic_weights, deposit_charge, deposit_raw,
                            field_energy, gather_field, init_two_stream, pic_step, push_particles, solve_fields)

DOM = Domain(1.0, 1.0)
FG8 = FieldGrid(8, 8, DOM)


def discrete_laplacian(phi, fg):
    return ((np.roll(phi, -1, 0) + np.roll(phi, 1, 0) - 2 * phi) / fg.hx ** 2
            + (np.roll(phi, -1, 1) + np.roll(phi, 1, 1) - 2 * phi) / fg.hy ** 2)


def fft_poisson(rho, fg):
    """Independent oracle: exact periodic 5-point solve in Fourier space."""
    kx = 2 * np.pi * np.fft.fftfreq(fg.nx) 
    ky = 2 * np.pi * np.fft.fftfreq(fg.ny)
    lam = ((2 - 2 * np.cos(kx))[:, None] / fg.hx ** 2 + (2 - 2 * np.cos(ky))[None, :] / fg.hy ** 2)
    lam[0, 0] = 1.0
    phi_hat = np.fft.fft2(rho) / lam
    phi_hat[0, 0] = 0.0
    return np.fft.ifft2(phi_hat).real


# -- initialization -----------------------------------------------------------

def test_two_stream_beams_and_pairing():
    ps = init_two_stream(TwoStreamConfig(n_particles=1000, eps=0.0, seed=3), DOM)
    assert len(ps) == 1000
    assert (ps.vx > 0).sum() == 500 and (ps.vx < 0).sum() == 500
    assert ps.vx.sum() == 0.0
    assert math.fsum(ps.vx) == 0.0
    assert np.all(ps.vy == 0)


def test_two_stream_deterministic_and_wrapped():
    cfg = TwoStreamConfig(n_particles=2000, eps=0.05, seed=11)
    a, b = init_two_stream(cfg, DOM), init_two_stream(cfg, DOM)
    for name in ("x", "y", "vx", "vy", "q", "m", "ids"):
        assert np.array_equal(getattr(a, name), getattr(b, name))
    assert a.x.min() >= 0 and a.x.max() < 1 and a.y.min() >= 0 and a.y.max() < 1


def test_two_stream_rejects_odd_count():
    with pytest.raises(ValueError):
        TwoStreamConfig(n_particles=7)


# -- deposit ------------------------------------------------------------------

def test_deposit_on_node():
    ps = ParticleSet.from_arrays([2 / 8], [3 / 8], q=2.5)
    raw = deposit_raw(ps, FG8)
    expected = np.zeros((8, 8))
    expected[2, 3] = 2.5
    assert np.array_equal(raw, expected)


def test_deposit_cell_center():
    ps = ParticleSet.from_arrays([2.5 / 8], [3.5 / 8], q=1.0)
    raw = deposit_raw(ps, FG8)
    for idx in [(2, 3), (3, 3), (2, 4), (3, 4)]:
        assert raw[idx] == 0.25
    assert raw.sum() == 1.0


def test_deposit_bilinear_weights_by_hand():
    # fractional offsets (0.25, 0.75) inside cell (1, 5)
    ps = ParticleSet.from_arrays([1.25 / 8], [5.75 / 8], q=1.0)
    raw = deposit_raw(ps, FG8)
    got = [raw[1, 5], raw[2, 5], raw[1, 6], raw[2, 6]]
    assert got == pytest.approx([0.1875, 0.0625, 0.5625, 0.1875], abs=1e-15)


def test_deposit_wraps_periodically():
    ps = ParticleSet.from_arrays([7.5 / 8], [7.5 / 8], q=1.0)
    raw = deposit_raw(ps, FG8)
    for idx in [(7, 7), (0, 7), (7, 0), (0, 0)]:
        assert raw[idx] == pytest.approx(0.25)


def test_charge_conservation_random():
    rng = np.random.default_rng(5)
    fg = FieldGrid(32, 16, Domain(2.0, 1.0))
    ps = ParticleSet.from_arrays(rng.random(20000) * 2.0, rng.random(20000), q=rng.normal(size=20000))
    raw = deposit_raw(ps, fg)
    total = math.fsum(ps.q)
    assert abs(raw.sum() - total) <= 1e-12 * np.abs(ps.q).sum()


def test_density_is_neutralized():
    rng = np.random.default_rng(1)
    ps = ParticleSet.from_arrays(rng.random(500), rng.random(500), q=-1.0)
    rho = deposit_charge(ps, FG8)
    assert abs(rho.mean()) < 1e-12


@given(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True))
@settings(max_examples=300)
def test_cic_weights_partition_of_unity(x, y):
    _, _, w = cic_weights(np.array([x]), np.array([y]), FG8)
    assert (w >= 0).all()
    assert w.sum() == pytest.approx(1.0, abs=1e-14)


# -- field solve -----------------------------------------------------------------

def test_zero_charge_gives_zero_field():
    sol = solve_fields(np.zeros((8, 8)), FG8)
    assert sol.converged and sol.iterations == 0
    assert not sol.phi.any() and not sol.ex.any() and not sol.ey.any()


@pytest.mark.parametrize("n", [16, 24])
def test_single_mode_matches_discrete_eigenvalue(n):
    fg = FieldGrid(n, n, DOM)
    x = np.arange(n) * fg.hx
    rho = np.repeat(np.cos(2 * np.pi * x)[:, None], n, axis=1)
    sol = solve_fields(rho, fg, tol=1e-6, max_iter=50_000)
    lam = (2 - 2 * np.cos(2 * np.pi * fg.hx)) / fg.hx ** 2
    expected = rho / lam
    assert sol.converged and sol.residual <= 1e-6
    assert np.max(np.abs(sol.phi - expected)) <= 1e-4 * np.max(np.abs(expected))
    assert np.max(np.abs(discrete_laplacian(sol.phi, fg) + rho)) <= 1e-6


def test_random_charge_matches_fft_oracle():
    rng = np.random.default_rng(9)
    fg = FieldGrid(16, 12, Domain(1.0, 0.75))
    rho = rng.normal(size=(16, 12))
    rho -= rho.mean()
    sol = solve_fields(rho, fg, tol=1e-9, max_iter=100_000)
    assert sol.converged
    assert np.allclose(sol.phi, fft_poisson(rho, fg), atol=1e-9 / np.min([16, 12]) * 10)
    assert abs(sol.phi.mean()) < 1e-14


def test_unconverged_solve_is_flagged_not_raised():
    rng = np.random.default_rng(2)
    rho = rng.normal(size=(32, 32))
    rho -= rho.mean()
    sol = solve_fields(rho, FieldGrid(32, 32, DOM), tol=1e-12, max_iter=5)
    assert not sol.converged and sol.iterations == 5
    assert sol.residual == pytest.approx(np.abs(discrete_laplacian(sol.phi, FieldGrid(32, 32, DOM)) + rho).max())


def test_field_is_minus_central_gradient():
    fg = FieldGrid(16, 16, DOM)
    x = np.arange(16) * fg.hx
    phi = np.repeat(np.sin(2 * np.pi * x)[:, None], 16, axis=1)
    from picbalance.pic import electric_field
    ex, ey = electric_field(phi, fg)
    expected = -(np.sin(2 * np.pi * (x + fg.hx)) - np.sin(2 * np.pi * (x - fg.hx))) / (2 * fg.hx)
    assert np.allclose(ex[:, 0], expected, atol=1e-13)
    assert not ey.any()


# -- gather / push ------------------------------------------------------------------

def test_gather_uniform_field():
    rng = np.random.default_rng(4)
    ps = ParticleSet.from_arrays(rng.random(100), rng.random(100))
    ex, ey = np.ones((8, 8)), np.zeros((8, 8))
    gx, gy = gather_field(ps, ex, ey, FG8)
    assert np.allclose(gx, 1.0, atol=1e-15) and np.all(gy == 0)


def test_gather_on_node_is_exact():
    rng = np.random.default_rng(4)
    ex, ey = rng.normal(size=(8, 8)), rng.normal(size=(8, 8))
    ps = ParticleSet.from_arrays([3 / 8], [6 / 8])
    gx, gy = gather_field(ps, ex, ey, FG8)
    assert gx[0] == ex[3, 6] and gy[0] == ey[3, 6]


def test_gather_scatter_adjointness():
    rng = np.random.default_rng(8)
    fg = FieldGrid(16, 8, Domain(1.0, 0.5))
    g = rng.normal(size=(16, 8))
    for _ in range(50):
        q = rng.normal()
        ps = ParticleSet.from_arrays([rng.random()], [rng.random() * 0.5], q=q)
        lhs = np.sum(deposit_raw(ps, fg) * g)
        gathered, _ = gather_field(ps, g, g, fg)
        assert abs(lhs - q * gathered[0]) <= 1e-12 * max(1.0, abs(lhs))


def test_free_streaming_wraps():
    ps = ParticleSet.from_arrays([0.0], [0.0], vx=[1.0])
    zero = np.zeros(1)
    push_particles(ps, zero, zero, 0.1, DOM)
    assert ps.x[0] == pytest.approx(0.1) and ps.y[0] == 0.0
    for _ in range(9):
        push_particles(ps, zero, zero, 0.1, DOM)
    assert min(ps.x[0], 1.0 - ps.x[0]) < 1e-12


def test_constant_field_kick_is_arithmetic_series():
    ps = ParticleSet.from_arrays([0.5], [0.5], q=1.0, m=1.0)
    for n in range(1, 21):
        push_particles(ps, np.array([0.5]), np.array([0.0]), 0.25, DOM)
        assert ps.vx[0] == n * 1.0 * 0.5 * 0.25


def test_push_preserves_count_and_ids():
    ps = init_two_stream(TwoStreamConfig(n_particles=200, seed=1), DOM)
    ids = ps.ids.copy()
    state = PicState(ps, FieldGrid(16, 16, DOM), dt=0.01, max_iter=200)
    state.half_kick_back()
    for _ in range(20):
        pic_step(state)
    assert len(ps) == 200 and np.array_equal(ps.ids, ids)
    assert ps.x.min() >= 0 and ps.x.max() < 1


def test_pic_step_zero_particles():
    state = PicState(ParticleSet.empty(), FG8, dt=0.1)
    assert pic_step(state) == 0.0


def test_pic_step_is_deterministic():
    def series():
        ps = init_two_stream(TwoStreamConfig(n_particles=2000, seed=7, q=-0.01, m=0.01), DOM)
        st = PicState(ps, FieldGrid(16, 16, DOM), dt=0.02, max_iter=320)
        st.half_kick_back()
        return [pic_step(st) for _ in range(15)]
    assert series() == series()


def test_field_energy_formula():
    fg = FieldGrid(4, 4, Domain(2.0, 1.0))
    assert field_energy(np.ones((4, 4)), np.full((4, 4), 2.0), fg) == pytest.approx(16 * 5 * 0.5 * 0.25 / 2)


# -- backends -----------------------------------------------------------------------

@pytest.mark.skipif(kernels.BACKEND != "compiled", reason="compiled extension not built")
def test_compiled_and_python_kernels_agree():
    rng = np.random.default_rng(12)
    n, nx, ny, hx, hy = 5000, 16, 8, 1 / 16, 0.5 / 8
    x, y, q = rng.random(n), rng.random(n) * 0.5, rng.normal(size=n)
    a = kernels.deposit_cic(x, y, q, nx, ny, hx, hy)
    b = kernels.deposit_cic(x, y, q, nx, ny, hx, hy, impl=_kernels_py)
    assert np.allclose(a, b, rtol=0, atol=1e-12)
    ex, ey = rng.normal(size=(nx, ny)), rng.normal(size=(nx, ny))
    for u, v in zip(kernels.gather_cic(x, y, ex, ey, hx, hy),
                    kernels.gather_cic(x, y, ex, ey, hx, hy, impl=_kernels_py)):
        assert np.allclose(u, v, rtol=0, atol=1e-13)
    rho = rng.normal(size=(nx, ny))
    rho -= rho.mean()
    p1, p2 = np.zeros((nx, ny)), np.zeros((nx, ny))
    r1 = kernels.jacobi_solve(rho, p1, hx, hy, 1e-8, 3000, 0.8)
    r2 = kernels.jacobi_solve(rho, p2, hx, hy, 1e-8, 3000, 0.8, impl=_kernels_py)
    assert r1[0] == r2[0]
    assert np.allclose(p1, p2, rtol=0, atol=1e-12)


# -- physics oracles -------------------------------------------------------------------

def _quiet_run(x, vx, steps, dt, wp=4.1, k=2):
    """Cold lattice start on a 64^2 grid; returns |phi_hat(k, 0)| per step."""
    fg = FieldGrid(64, 64, Domain(1.0, 1.0))
    n = len(x)
    y = (np.arange(n) % 64 + 0.5) / 64  # one particle row per field row keeps rho uniform in y
    q = -wp ** 2 / n
    ps = ParticleSet(x=x, y=y, vx=vx, vy=np.zeros(n), q=np.full(n, q), m=np.full(n, -q),
                     ids=np.arange(n, dtype=np.int64))
    st = PicState(ps, fg, dt, 1e-8, 20000)
    st.half_kick_back()
    amp = []
    for _ in range(steps):
        pic_step(st)
        amp.append(abs(np.fft.fft2(st.phi)[k, 0]))
    return np.array(amp)


def _lattice_x(nx):
    return np.repeat((np.arange(nx) + 0.5) / nx, 64)


@pytest.mark.slow
def test_langmuir_oscillation_frequency():
    x = _lattice_x(256)
    dt = 0.01
    amp = _quiet_run(np.mod(x + 1e-3 * np.sin(4 * np.pi * x), 1.0), np.zeros(len(x)), 360, dt)
    minima = [i for i in range(1, len(amp) - 1) if amp[i] < amp[i - 1] and amp[i] < amp[i + 1]]
    omega = np.pi / (np.mean(np.diff(minima)) * dt)  # |phi_k| ~ |cos(omega t)|
    assert omega == pytest.approx(4.1, rel=0.02)


@pytest.mark.slow
def test_two_stream_growth_rate_matches_cold_beam_theory():
    # symmetric cold beams, each with omega_b^2 = omega_p^2 / 2:
    # omega^2 = a^2 + omega_b^2 - omega_b * sqrt(omega_b^2 + 4 a^2), a = k v0
    wp, v0 = 4.1, 0.2
    a, wb2 = 4 * np.pi * v0, wp ** 2 / 2
    gamma = np.sqrt(-(a ** 2 + wb2 - np.sqrt(wb2 * (wb2 + 4 * a ** 2))))
    x = _lattice_x(512)
    vx = np.where(np.arange(len(x)) % 2 == 0, v0, -v0)
    dt = 0.1 / 64 / v0
    amp = _quiet_run(np.mod(x + 1e-5 * np.sin(4 * np.pi * x), 1.0), vx, 300, dt)
    t = np.arange(1, 301) * dt
    fitted = np.polyfit(t[150:300], np.log(amp[150:300]), 1)[0]
    assert gamma == pytest.approx(1.449, abs=1e-3)
    assert fitted == pytest.approx(gamma, rel=0.1)


@pytest.mark.slow
def test_desk_energy_grows_then_saturates():
    from picbalance.config import RunConfig
    from picbalance.harness import Simulation
    e = np.array([m.field_energy for m in Simulation(RunConfig(strategy="static_uniform", n_steps=400)).steps()])
    window = e[209:300]  # steps 210..300, after the stable-mode beat has died out
    assert (window / np.maximum.accumulate(window)).min() >= 0.95
    assert window[-1] / window[0] > 10
    assert e[300:].max() <= 1.2 * e[299]
