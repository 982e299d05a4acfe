import math

import numpy as np
import pytest

from radnerf.errors import ConfigError, DivergedError
from radnerf.forward import RadialKSpace, simulate_analytic
from radnerf.geometry import make_direction
from radnerf.network import MlpParams, PeConfig, init_params
from radnerf.phantom import load_phantom
from radnerf.projection import Sinogram, kspace_to_sinogram
from radnerf.reconstructor import (Adam, RayQuadrature, RenderProblem, TrainConfig, inference_time, loss_and_grad,
                                   loss_only, reconstruct, render_ray, to_unit, train)
from radnerf.sampling import AngleSchedule, make_omega_grid, make_schedule

TOY = dict(width=1, before_skip=1, after_skip=0)
SMALL = dict(width=16, before_skip=2, after_skip=1)


def constant_params(c, cfg=PeConfig(0)):
    """Network whose output is the constant ``c`` everywhere."""
    p = init_params(cfg, **TOY)
    (W1, b1), (W2, _) = p.layers
    return MlpParams([(np.zeros_like(W1), b1), (np.zeros_like(W2), np.array([c.real, c.imag]))])


def small_problem(n=16, R=4, mode="grid", seed=0):
    spec = load_phantom("simple", float(n))
    k = simulate_analytic(spec, make_schedule("golden", n, R, seed), make_omega_grid(n))
    return RenderProblem(kspace_to_sinogram(k), RayQuadrature.for_grid(n, float(n)), mode)


def test_quadrature_points():
    V = 10.0
    q = RayQuadrature.for_grid(20, V)
    assert q.step == 0.25
    for phi in np.linspace(0, math.pi, 9, endpoint=False):
        d = make_direction(phi)
        for r in (-6.0, -3.3, 0.0, 1.7, 4.9):
            pts, step = q.points(r, d)
            if len(pts) == 0:
                continue
            assert np.all(np.abs(pts) <= V / 2 + 1e-12)
            if len(pts) > 1:
                np.testing.assert_allclose(np.linalg.norm(np.diff(pts, axis=0), axis=1), step, rtol=1e-12)
            np.testing.assert_allclose(pts @ d.theta, r, atol=1e-12)
    assert len(q.points(V, make_direction(0.3))[0]) == 0


def test_constant_field_chord():
    V, c = 8.0, 1.5 - 0.5j
    q = RayQuadrature.for_grid(16, V)
    val = render_ray(constant_params(c), PeConfig(0), q, 0.0, make_direction(0.0))
    assert abs(val - c * V) <= abs(c) * q.step
    zero = constant_params(0j)
    assert render_ray(zero, PeConfig(0), q, 0.7, make_direction(1.0)) == 0
    assert render_ray(constant_params(c), PeConfig(0), q, V, make_direction(0.0)) == 0


@pytest.mark.parametrize("mode", ["grid", "direct"])
def test_render_linear(mode):
    prob = small_problem(mode=mode)
    rng = np.random.default_rng(0)
    m = len(prob.coords)
    x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    a, b = 0.7, -2.1
    lhs = prob.render(a * x + b * y)
    rhs = a * prob.render(x) + b * prob.render(y)
    assert np.abs(lhs - rhs).max() <= 1e-12 * np.abs(lhs).max()


@pytest.mark.parametrize("mode", ["grid", "direct"])
def test_pullback_is_adjoint(mode):
    prob = small_problem(mode=mode)
    rng = np.random.default_rng(1)
    x = rng.standard_normal(len(prob.coords)) + 1j * rng.standard_normal(len(prob.coords))
    g = rng.standard_normal(prob.n_rays) + 1j * rng.standard_normal(prob.n_rays)
    assert np.vdot(g, prob.render(x)) == pytest.approx(np.vdot(prob.pullback(g), x), rel=1e-12)


@pytest.mark.parametrize("mode", ["grid", "direct"])
def test_rotation_consistency(mode):
    # a radially symmetric field renders the same through the center at every angle
    n, V = 32, 32.0
    sched = AngleSchedule(np.linspace(0, math.pi, 12, endpoint=False))
    g = make_omega_grid(n)
    sino = kspace_to_sinogram(RadialKSpace(sched, g, np.zeros((12, g.n_omega))))
    q = RayQuadrature.for_grid(n, V)
    prob = RenderProblem(sino, q, mode)
    x = prob.coords * V - V / 2
    field = np.exp(-np.sum(x**2, axis=1) / 40.0)
    rays = prob.render(field.astype(complex)).reshape(12, -1)
    center = int(np.argmin(np.abs(sino.r_grid)))
    vals = rays[:, center].real
    assert vals.max() - vals.min() <= q.step * field.max()
    assert vals.mean() == pytest.approx(math.sqrt(40 * math.pi), rel=0.02)


def test_grid_and_direct_agree_on_smooth_field():
    pe = PeConfig(2)
    p = init_params(pe, seed=3, **SMALL)
    ld, _ = loss_and_grad(p, pe, small_problem(mode="direct"))
    lg, _ = loss_and_grad(p, pe, small_problem(mode="grid"))
    assert lg == pytest.approx(ld, rel=0.05)


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("mode", ["grid", "direct"])
def test_loss_gradient_fd(seed, mode):
    pe = PeConfig(0)
    prob = small_problem(n=8, R=2, mode=mode, seed=seed)
    rng = np.random.default_rng(seed)
    p = init_params(pe, seed=seed, **TOY)
    theta = p.flat() + rng.normal(scale=0.5, size=p.flat().size)
    p = p.with_flat(theta)
    _, grad = loss_and_grad(p, pe, prob)
    g = grad.flat()
    h = 1e-5
    for idx in rng.choice(theta.size, min(10, theta.size), replace=False):
        tp, tm = theta.copy(), theta.copy()
        tp[idx] += h
        tm[idx] -= h
        fd = (loss_and_grad(p.with_flat(tp), pe, prob)[0] - loss_and_grad(p.with_flat(tm), pe, prob)[0]) / (2 * h)
        assert abs(fd - g[idx]) <= 1e-4 * max(abs(fd), abs(g[idx]), 1e-6)


def test_loss_gradient_fd_with_batch_rows():
    pe = PeConfig(2)
    prob = small_problem(n=8, R=2)
    rng = np.random.default_rng(5)
    p = init_params(pe, seed=5, **SMALL)
    rows = np.sort(rng.choice(prob.n_rays, 40, replace=False))
    theta = p.flat()
    g = loss_and_grad(p, pe, prob, rows)[1].flat()
    h = 1e-5
    for idx in rng.choice(theta.size, 10, replace=False):
        tp, tm = theta.copy(), theta.copy()
        tp[idx] += h
        tm[idx] -= h
        fd = (loss_and_grad(p.with_flat(tp), pe, prob, rows)[0]
              - loss_and_grad(p.with_flat(tm), pe, prob, rows)[0]) / (2 * h)
        assert abs(fd - g[idx]) <= 1e-4 * max(abs(fd), abs(g[idx]), 1e-6)


def test_zero_residual_and_scaling():
    pe = PeConfig(0)
    prob = small_problem()
    c = 0.8 + 0.3j
    p = constant_params(c)
    chi = np.full(len(prob.coords), c)
    exact = Sinogram(prob.sinogram.schedule, prob.sinogram.r_grid, prob.render(chi).reshape(prob.sinogram.samples.shape))
    fit = RenderProblem(exact, prob.quad, "grid")
    loss, grad = loss_and_grad(p, pe, fit)
    assert loss < 1e-20
    assert np.linalg.norm(grad.flat()) < 1e-8

    zero = constant_params(0j)
    l1, _ = loss_and_grad(zero, pe, prob)
    doubled = Sinogram(prob.sinogram.schedule, prob.sinogram.r_grid, 2 * prob.sinogram.samples)
    l2, _ = loss_and_grad(zero, pe, RenderProblem(doubled, prob.quad, "grid"))
    assert l2 == pytest.approx(4 * l1, rel=1e-12)


def test_problem_checks_offset_span():
    prob = small_problem()
    with pytest.raises(ConfigError):
        RenderProblem(prob.sinogram, RayQuadrature.for_grid(16, 20.0))
    with pytest.raises(ConfigError):
        RenderProblem(prob.sinogram, prob.quad, "voxel")


def test_adam_single_step():
    x = np.array([1.0])
    opt = Adam([x], lr=0.001)
    opt.step([x], [np.array([0.5])])
    assert x[0] == pytest.approx(0.999, abs=1e-9)


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(steps=0)
    with pytest.raises(ConfigError):
        TrainConfig(lr=0)
    with pytest.raises(ConfigError):
        TrainConfig(adam_beta1=1.0)
    with pytest.raises(ConfigError):
        TrainConfig(batch=0)


def _zero_kspace(n=16, R=1):
    s, g = make_schedule("golden", n, R), make_omega_grid(n)
    return RadialKSpace(s, g, np.zeros((s.n_phi, g.n_omega)))


def test_zero_kspace_trains_to_zero():
    cfg = TrainConfig(steps=300, lr=1e-3, **SMALL)
    img, rep = reconstruct(_zero_kspace(), cfg, PeConfig(4))
    assert len(rep.loss_history) == 300
    assert img.magnitude().max() < 1e-3
    assert rep.loss_history[-1] < 1e-2 * rep.loss_history[0]


@pytest.mark.parametrize("keep_best", [True, False])
def test_keep_best_returns_lowest_loss_iterate(keep_best):
    # a large step makes the loss non-monotone, so the last iterate is not the best
    problem, pe = small_problem(), PeConfig(3)
    cfg = TrainConfig(steps=60, lr=3e-2, keep_best=keep_best, **SMALL)
    params = init_params(pe, 0, **SMALL)
    history, final = train(params, pe, problem, cfg)
    assert any(b > a for a, b in zip(history, history[1:]))
    assert final == pytest.approx(loss_only(params, pe, problem), rel=1e-12)
    assert final == pytest.approx(loss_and_grad(params, pe, problem)[0], rel=1e-12)
    if keep_best:
        assert final <= min(history)
    else:
        assert final != min(history)


def test_reconstruct_deterministic_and_batched():
    n = 16
    spec = load_phantom("simple", float(n))
    k = simulate_analytic(spec, make_schedule("golden", n, 4), make_omega_grid(n))
    cfg = TrainConfig(steps=20, batch=200, **SMALL)
    a, ra = reconstruct(k, cfg, PeConfig(3))
    b, rb = reconstruct(k, cfg, PeConfig(3))
    assert a.values.tobytes() == b.values.tobytes()
    assert ra.loss_history == rb.loss_history
    assert set(ra.wall_time) == {"sinogram", "setup", "train", "inference"}
    assert a.n == n and np.all(a.values.imag == 0)


def test_divergence_reports_step():
    k = _zero_kspace()
    bad = np.array(k.samples)
    bad[0, 0] = np.nan
    k = RadialKSpace(k.schedule, k.omega_grid, bad)
    with pytest.raises(DivergedError) as info:
        reconstruct(k, TrainConfig(steps=3, **SMALL), PeConfig(2))
    assert info.value.step == 0


def test_inference_time_scales_with_pixels():
    pe = PeConfig(20)
    p = init_params(pe)
    t1 = inference_time(p, pe, 64, repeats=3)
    t2 = inference_time(p, pe, 128, repeats=3)
    assert t2 >= 1.5 * t1


def test_to_unit():
    np.testing.assert_allclose(to_unit([[-2.0, 2.0], [0.0, 1.0]], 4.0), [[0.0, 1.0], [0.5, 0.75]])
