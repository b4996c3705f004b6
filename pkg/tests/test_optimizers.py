import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpropkit.data_io import gen_conjugate_quadratic, gen_logreg_synthetic
from vpropkit.errors import CapabilityError, NonPositivePrecisionError, NotPositiveDefiniteError, SingularMatrixError
from vpropkit.models import Dataset, LogisticRegression, Mlp, MlpArchitecture, QuadraticObjective
from vpropkit.numkit import RngStream
from vpropkit.optimizers import (
    StepConfig,
    bbvi_gradients,
    bbvi_rmsprop_step,
    bbvi_step,
    cvi_meanfield_step,
    cvi_natural_step,
    meanfield_elbo_gradients,
    newton_step,
    rmsprop_step,
    von_step,
    vong_step,
    vprop0_step,
    vprop_step,
)
from vpropkit.states import AdaptiveBbviState, BbviState, FullCovState, MeanFieldState, NaturalParams, RmsState


def quad1(h, a=0.0):
    """``f = h/2 (theta - a)^2`` up to a constant."""
    return QuadraticObjective(np.array([[h]]), np.array([-h * a]))


def zero_objective(d):
    return QuadraticObjective(np.zeros((d, d)), np.zeros(d))


def test_step_config_validation():
    with pytest.raises(ValueError):
        StepConfig(alpha=1.5)
    with pytest.raises(ValueError):
        StepConfig(lam=0.0)
    with pytest.raises(ValueError):
        StepConfig(k_samples=-1)
    cfg = StepConfig(alpha=0.4, beta=0.2, rho=0.1, decay_rate=1.0)
    later = cfg.at(3)
    assert (later.alpha, later.beta, later.rho) == (0.1, 0.05, 0.025)
    assert StepConfig().at(100) == StepConfig()


def test_rmsprop_examples():
    st0 = RmsState(np.array([0.0]), np.array([0.0]))
    out = rmsprop_step(st0, QuadraticObjective(np.zeros((1, 1)), np.array([2.0])), StepConfig(alpha=0.1, beta=1.0, delta=0.0))
    assert out.s.tolist() == [4.0] and out.mu.tolist() == [-0.1]
    st1 = RmsState(np.array([1.0]), np.array([4.0]))
    out = rmsprop_step(st1, QuadraticObjective(np.zeros((1, 1)), np.array([1.0])), StepConfig(alpha=0.5, beta=0.0, delta=0.0))
    assert out.s.tolist() == [4.0] and out.mu.tolist() == [0.75]
    out = rmsprop_step(st1, zero_objective(1), StepConfig(beta=0.25))
    assert out.mu.tolist() == [1.0] and out.s.tolist() == [3.0]


def test_vprop_hand_example():
    st0 = MeanFieldState(np.array([1.0]), np.array([3.0]), 1.0)
    cfg = StepConfig(alpha=0.5, beta=0.5, k_samples=1, lam=1.0)
    out = vprop_step(st0, quad1(1.0), cfg, eps=np.zeros((1, 1)))
    assert out.s.tolist() == [2.0]
    assert math.isclose(out.mu[0], 2.0 / 3.0, rel_tol=1e-15)
    out0 = vprop0_step(st0, quad1(1.0), cfg)
    assert math.isclose(out0.mu[0], 2.0 / 3.0, rel_tol=1e-15)


def test_vprop_constant_objective():
    st0 = MeanFieldState(np.array([0.3, -2.0]), np.array([1.0, 5.0]), 1e-12)
    out = vprop_step(st0, zero_objective(2), StepConfig(alpha=0.5, beta=0.2, k_samples=3, lam=1e-12), rng=RngStream(0))
    assert np.allclose(out.mu, st0.mu, atol=1e-9)
    assert np.allclose(out.s, 0.8 * st0.s)


def test_vprop0_map_fixed_point():
    data = gen_logreg_synthetic(20, 2, 0)
    obj = LogisticRegression(data)
    lam = 0.5
    theta = np.zeros(2)
    for _ in range(50):
        theta = newton_step(theta, QuadraticPlusPrior(obj, lam), 1.0)
    st0 = MeanFieldState(theta, np.ones(2), lam)
    out = vprop0_step(st0, obj, StepConfig(alpha=0.7, beta=0.3, lam=lam))
    assert np.allclose(out.mu, theta, atol=1e-12)


class QuadraticPlusPrior:
    """Adds ``lam/2 |theta|^2`` to an objective (for MAP reference points)."""

    has_hessian_full = True

    def __init__(self, obj, lam):
        self.obj, self.lam = obj, lam

    def grad(self, theta, batch=None):
        return self.obj.grad(theta) + self.lam * theta

    def hessian_full(self, theta, batch=None):
        return self.obj.hessian_full(theta) + self.lam * np.eye(theta.shape[0])


def test_vprop0_scale_geometric_series():
    h, mu, beta, s0 = 2.0, 0.7, 0.3, 5.0
    obj = quad1(h)
    st_ = MeanFieldState(np.array([mu]), np.array([s0]), 1.0)
    cfg = StepConfig(alpha=0.0, beta=beta, lam=1.0)
    for t in range(1, 30):
        st_ = vprop0_step(st_, obj, cfg)
        ref = h * h * mu * mu + (1 - beta) ** t * (s0 - h * h * mu * mu)
        assert math.isclose(st_.s[0], ref, rel_tol=1e-12)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10_000), d=st.integers(1, 6))
def test_vprop_keeps_scale_nonnegative(seed, d):
    rng = RngStream(seed)
    obj = LogisticRegression(gen_logreg_synthetic(7, d, seed))
    st_ = MeanFieldState(rng.standard_normal(d), np.abs(rng.standard_normal(d)), 0.3)
    cfg = StepConfig(alpha=float(rng.uniform(1)[0]), beta=float(rng.uniform(1)[0]), k_samples=2, lam=0.3)
    for _ in range(5):
        st_ = vprop_step(st_, obj, cfg, rng=rng)
        assert np.all(st_.s >= 0.0)
        st2 = rmsprop_step(RmsState(st_.mu, st_.s), obj, cfg)
        assert np.all(st2.s >= 0.0)


def test_vprop_k0_matches_vprop0_bitwise():
    rng = RngStream(1)
    obj = LogisticRegression(gen_logreg_synthetic(11, 3, 1))
    st_ = MeanFieldState(rng.standard_normal(3), np.abs(rng.standard_normal(3)), 0.2)
    cfg = StepConfig(alpha=0.3, beta=0.6, k_samples=0, lam=0.2)
    a, b = vprop_step(st_, obj, cfg), vprop0_step(st_, obj, cfg)
    assert np.array_equal(a.mu, b.mu) and np.array_equal(a.s, b.s)


def test_cvi_hand_step():
    st0 = MeanFieldState(np.array([1.0]), np.array([0.0]), 1.0)
    out = cvi_meanfield_step(st0, quad1(2.0), StepConfig(beta=0.5, k_samples=0, lam=1.0))
    assert math.isclose(out.precision[0], 2.0)
    assert math.isclose(out.mu[0], 0.25)


def test_cvi_conjugate_fixed_point():
    h, a, lam = 3.0, 1.3, 0.5
    st_ = MeanFieldState.init(1, lam)
    cfg = StepConfig(beta=0.4, k_samples=0, lam=lam)
    for _ in range(300):
        st_ = cvi_meanfield_step(st_, quad1(h, a), cfg)
    assert math.isclose(st_.precision[0], h + lam, rel_tol=1e-12)
    assert math.isclose(st_.mu[0], h * a / (h + lam), rel_tol=1e-12)


def test_cvi_prior_recovery():
    lam = 2.0
    st_ = MeanFieldState(np.array([1.0, -3.0]), np.array([4.0, 0.5]), lam)
    cfg = StepConfig(beta=0.3, k_samples=2, lam=lam)
    mu0 = st_.mu.copy()
    st1 = cvi_meanfield_step(st_, zero_objective(2), cfg, rng=RngStream(0))
    assert np.allclose(st1.mu, mu0 - 0.3 * lam * mu0 / st1.precision, rtol=1e-14)
    for _ in range(200):
        st_ = cvi_meanfield_step(st_, zero_objective(2), cfg, rng=RngStream(0))
    assert np.allclose(st_.precision, lam) and np.allclose(st_.mu, 0.0, atol=1e-12)


def test_cvi_errors():
    st_ = MeanFieldState(np.zeros(1), np.zeros(1), 1.0)
    with pytest.raises(NonPositivePrecisionError):
        cvi_meanfield_step(st_, quad1(-10.0), StepConfig(beta=0.5, k_samples=0, lam=1.0))

    class GradOnly(QuadraticObjective):
        has_hessian_diag = False

    with pytest.raises(CapabilityError):
        cvi_meanfield_step(st_, GradOnly(np.eye(1), np.zeros(1)), StepConfig(k_samples=0))


def _dual_form_reference(mu, var, gm, gv, beta):
    v_new = 1.0 / (1.0 / var - 2.0 * beta * gv)
    return mu + beta * v_new * gm, v_new


@settings(max_examples=200, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    d=st.integers(1, 8),
    beta=st.floats(0.0, 1.0),
)
def test_natural_step_matches_moment_form(seed, d, beta):
    rng = RngStream(seed)
    mu = 3.0 * rng.standard_normal(d)
    var = np.exp(rng.standard_normal(d))
    gm = rng.standard_normal(d)
    gv = -np.abs(rng.standard_normal(d))
    out = cvi_natural_step(NaturalParams.from_moments(mu, var), gm, gv, beta)
    m2, v2 = out.to_moments()
    m_ref, v_ref = _dual_form_reference(mu, var, gm, gv, beta)
    assert np.all(np.abs(m2 - m_ref) <= 1e-12 * np.maximum(1.0, np.abs(m_ref)))
    assert np.all(np.abs(v2 - v_ref) <= 1e-12 * np.maximum(1.0, np.abs(v_ref)))


def test_natural_step_trivial_cases():
    nat = NaturalParams.from_moments([0.5, -1.0], [2.0, 0.3])
    for out in (cvi_natural_step(nat, np.zeros(2), np.zeros(2), 0.7), cvi_natural_step(nat, np.ones(2), -np.ones(2), 0.0)):
        assert np.array_equal(out.lam1, nat.lam1) and np.array_equal(out.lam2, nat.lam2)
    with pytest.raises(NonPositivePrecisionError):
        cvi_natural_step(nat, np.zeros(2), np.array([10.0, 0.0]), 1.0)


def test_natural_roundtrip():
    mu, var = np.array([0.3, -7.0, 2.0]), np.array([0.1, 4.0, 1.5])
    nat = NaturalParams.from_moments(mu, var)
    m, v = nat.to_moments()
    assert np.allclose(m, mu, rtol=1e-12) and np.allclose(v, var, rtol=1e-12)
    assert np.allclose(nat.m2, var + mu * mu, rtol=1e-12)
    with pytest.raises(NonPositivePrecisionError):
        NaturalParams(np.zeros(1), np.zeros(1))


def test_natural_step_equals_cvi_meanfield_closed_form():
    rng = RngStream(5)
    obj = LogisticRegression(gen_logreg_synthetic(12, 3, 5))
    lam, beta = 0.7, 0.35
    st_ = MeanFieldState(rng.standard_normal(3), np.abs(rng.standard_normal(3)), lam)
    eps = rng.standard_normal((4, 3))
    th = st_.mu + eps / np.sqrt(st_.precision)
    g = obj.grads(th).mean(0)
    h = obj.hessian_diags(th).mean(0)
    gm, gv = meanfield_elbo_gradients(st_, g, h)
    nat = cvi_natural_step(NaturalParams.from_moments(st_.mu, st_.variance), gm, gv, beta)
    m, v = nat.to_moments()
    ref = cvi_meanfield_step(st_, obj, StepConfig(beta=beta, k_samples=4, lam=lam), eps=eps)
    assert np.allclose(m, ref.mu, rtol=1e-12, atol=1e-12)
    assert np.allclose(1.0 / v, ref.precision, rtol=1e-12)


def test_bbvi_zero_step_and_clamp():
    obj = LogisticRegression(gen_logreg_synthetic(6, 2, 0))
    st_ = BbviState(np.array([0.1, 0.2]), np.array([1.0, 2.0]))
    out = bbvi_step(st_, obj, StepConfig(rho=0.0, lam=1.0), rng=RngStream(0))
    assert np.array_equal(out.mu, st_.mu) and np.array_equal(out.sigma, st_.sigma)
    out = bbvi_step(st_, QuadraticObjective(1e6 * np.eye(2), np.zeros(2)),
                    StepConfig(rho=1.0, lam=1.0), eps=np.ones((1, 2)))
    assert np.all(out.sigma == 1e-8)


def test_bbvi_conjugate_convergence():
    h, a, lam = 2.0, 0.8, 1.0
    obj = quad1(h, a)
    st_ = BbviState(np.zeros(1), np.ones(1))
    cfg = StepConfig(rho=0.02, k_samples=2000, lam=lam)
    rng = RngStream(2)
    for _ in range(600):
        st_ = bbvi_step(st_, obj, cfg, rng=rng)
    assert abs(st_.mu[0] - h * a / (h + lam)) < 1e-3
    assert abs(st_.sigma[0] - (h + lam) ** -0.5) < 1e-3


def test_bbvi_rmsprop_layout():
    obj = LogisticRegression(gen_logreg_synthetic(6, 3, 0))
    st_ = AdaptiveBbviState.init(3, 1.0)
    out = bbvi_rmsprop_step(st_, obj, StepConfig(alpha=0.1, beta=0.5, lam=1.0), rng=RngStream(0))
    assert np.all(out.s_mu > 0) and np.all(out.s_sigma > 0) and np.all(out.sigma > 0)


def test_von_constant_hessian_recursion():
    prob = gen_conjugate_quadratic(3, 4, 1.0)
    S0 = np.diag([5.0, 0.5, 2.0])
    st_ = FullCovState(np.ones(3), S0, 1.0)
    beta = 0.3
    cfg = StepConfig(beta=beta, k_samples=1, lam=1.0)
    rng = RngStream(1)
    for t in range(1, 15):
        st_ = von_step(st_, prob.objective, cfg, rng=rng)
        ref = prob.H + (1 - beta) ** t * (S0 - prob.H)
        assert np.allclose(st_.S, ref, rtol=1e-12, atol=1e-12)


def test_von_conjugate_exactness():
    prob = gen_conjugate_quadratic(4, 2, 0.5)
    st_ = FullCovState.init(4, 0.5)
    cfg = StepConfig(beta=0.5, k_samples=0, lam=0.5)
    for _ in range(200):
        st_ = von_step(st_, prob.objective, cfg)
    assert np.max(np.abs(st_.mu - prob.post_mean)) < 1e-8
    assert np.max(np.abs(st_.precision - prob.post_prec)) < 1e-8


def test_von_zero_step_and_indefinite():
    prob = gen_conjugate_quadratic(2, 0, 1.0)
    st_ = FullCovState(np.array([0.2, 0.4]), np.eye(2), 1.0)
    out = von_step(st_, prob.objective, StepConfig(beta=0.0, k_samples=0, lam=1.0))
    assert np.array_equal(out.mu, st_.mu) and np.array_equal(out.S, st_.S)
    bad = QuadraticObjective(-10.0 * np.eye(2), np.zeros(2))
    with pytest.raises(NotPositiveDefiniteError):
        von_step(st_, bad, StepConfig(beta=1.0, k_samples=0, lam=1.0))


def test_vong_outer_product_and_psd():
    obj = QuadraticObjective(np.zeros((2, 2)), np.array([1.0, 2.0]))
    st_ = FullCovState(np.zeros(2), np.zeros((2, 2)), 1.0)
    out = vong_step(st_, obj, StepConfig(beta=1.0, k_samples=1, lam=1.0), eps=np.zeros((1, 2)))
    assert np.array_equal(out.S, [[1.0, 2.0], [2.0, 4.0]])
    logreg = LogisticRegression(gen_logreg_synthetic(9, 3, 0))
    st_ = FullCovState.init(3, 1.0)
    rng = RngStream(0)
    for _ in range(20):
        st_ = vong_step(st_, logreg, StepConfig(beta=0.4, k_samples=1, lam=1.0), rng=rng)
        assert np.linalg.eigvalsh(st_.S).min() >= -1e-10


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_vong_equals_vprop1_in_one_dimension(seed):
    rng = RngStream(seed)
    obj = LogisticRegression(gen_logreg_synthetic(5, 1, seed % 1000))
    lam = float(0.1 + rng.uniform(1)[0])
    beta = float(rng.uniform(1)[0])
    mu, s = rng.standard_normal(1), np.abs(rng.standard_normal(1))
    eps = rng.standard_normal((1, 1))
    cfg = StepConfig(alpha=beta, beta=beta, k_samples=1, lam=lam)
    a = vong_step(FullCovState(mu, s.reshape(1, 1), lam), obj, cfg, eps=eps)
    b = vprop_step(MeanFieldState(mu, s, lam), obj, cfg, eps=eps)
    assert abs(a.mu[0] - b.mu[0]) <= 1e-12 * max(1.0, abs(b.mu[0]))
    assert abs(a.S[0, 0] - b.s[0]) <= 1e-12 * max(1.0, abs(b.s[0]))


def test_newton_examples():
    prob = gen_conjugate_quadratic(3, 1, 1.0)
    theta = newton_step(np.ones(3), prob.objective, 1.0)
    assert np.allclose(prob.H @ theta + prob.c, 0.0, atol=1e-12)
    flat = QuadraticObjective(np.zeros((2, 2)), np.array([1.0, 0.0]))
    with pytest.raises(SingularMatrixError):
        newton_step(np.zeros(2), flat, 1.0)


def test_newton_stationary_point_is_fixed():
    obj = QuadraticObjective(np.eye(2), np.zeros(2))
    theta = np.zeros(2)
    assert np.array_equal(newton_step(theta, obj, 0.5), theta)


def test_newton_matches_grid_search_map():
    X = np.array([[1.0, 0.5], [-0.3, 1.0], [0.8, -1.2], [-1.0, -0.4]])
    y = np.array([1.0, 1.0, -1.0, -1.0])
    data = Dataset(X, y)
    # separable data: a small ridge keeps the optimum finite
    lam = 0.5
    obj = QuadraticPlusPrior(LogisticRegression(data), lam)
    theta = np.zeros(2)
    for _ in range(60):
        theta = newton_step(theta, obj, 1.0)
    f = lambda t: LogisticRegression(data).value(t) + 0.5 * lam * float(t @ t)  # noqa: E731
    # coarse grid, then two refinements around the best point
    center, width = np.zeros(2), 4.0
    for _ in range(4):
        g = np.linspace(-width, width, 201)
        vals = np.array([[f(center + np.array([a, b])) for b in g] for a in g])
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        center = center + np.array([g[i], g[j]])
        width /= 25.0
    assert np.max(np.abs(theta - center)) < 1e-4


def test_bbvi_gradients_match_quadrature_elbo():
    from vpropkit.evaluation import elbo_quadrature
    from vpropkit.numkit import fd_grad

    obj = LogisticRegression(gen_logreg_synthetic(15, 2, 3))
    lam = 1.0
    st_ = BbviState(np.array([0.3, -0.5]), np.array([0.6, 0.9]))
    k = 100_000
    eps = RngStream(9).standard_normal((k, 2))
    gm, gs = bbvi_gradients(st_, obj, lam, k, eps=eps)

    def elbo(mu, sigma):
        return elbo_quadrature(obj, MeanFieldState.from_moments(mu, sigma**2, lam), lam=lam).value

    ref_m = fd_grad(lambda m: elbo(m, st_.sigma), st_.mu)
    ref_s = fd_grad(lambda s: elbo(st_.mu, s), st_.sigma)
    th = st_.mu + st_.sigma * eps
    G = obj.grads(th)
    se_m = G.std(0, ddof=1) / math.sqrt(k)
    se_s = (G * eps).std(0, ddof=1) / math.sqrt(k)
    assert np.all(np.abs(gm - ref_m) < 3 * se_m)
    assert np.all(np.abs(gs - ref_s) < 3 * se_s)


def test_mlp_objective_exposes_fd_hessian():
    arch = MlpArchitecture(2, (3,))
    net = Mlp(arch, gen_logreg_synthetic(6, 2, 0))
    st_ = MeanFieldState(arch.init_params(RngStream(0)), np.ones(arch.dim), 1.0)
    out = cvi_meanfield_step(st_, net, StepConfig(beta=0.1, k_samples=1, lam=1.0), rng=RngStream(1))
    assert out.mu.shape == (arch.dim,)
