import numpy as np
import pytest

from conftest import random_models
from regret_control.analysis import (close_loop, eval_frequency, noncausal_gram,
                                     noncausal_gram_grid, oracle_regret, policy_toeplitz, sweep,
                                     toeplitz_truncate)
from regret_control.errors import OracleTooLarge, ResolventSingular, UnstableLoop
from regret_control.linalg import solve_dlyap
from regret_control.lti import static_gain
from regret_control.plant import PlantModel
from regret_control.synthesis import h2_controller, hinf_synthesize, regret_synthesize


def gramian_h2_norm_sq(cl):
    X = solve_dlyap(cl.A.T, cl.C.T @ cl.C)
    return float(np.trace(cl.B.T @ X @ cl.B) + np.trace(cl.D.T @ cl.D))


class TestScalarExample:
    def test_noncausal_gram_at_dc(self, s1):
        # G* (1 + |F|^2)^{-1} G at z = 1 with F = G = 1 / (1 - 1/2) = 2
        assert noncausal_gram(s1, 0.0)[0, 0] == pytest.approx(4 / 5, rel=1e-14)

    def test_h2_loop_at_nyquist(self, s1):
        syn = regret_synthesize(s1)
        K, A_K = syn.riccati.K_lqr[0, 0], syn.riccati.A_K[0, 0]
        T = eval_frequency(close_loop(s1, h2_controller(syn.riccati)), np.pi)
        assert np.allclose(T[:, 0], np.array([1.0, -K]) / (-1 - A_K), atol=1e-14)
        assert float(np.sum(np.abs(T) ** 2)) == pytest.approx(0.70252, abs=5e-6)

    def test_sweep_table(self, s1):
        syn = regret_synthesize(s1)
        res = sweep(s1, {"h2": h2_controller(syn.riccati), "regret": syn.controller,
                         "noncausal": "noncausal"}, 1024)
        assert res["h2"].frobenius_sq == pytest.approx(syn.riccati.P[0, 0], rel=1e-12)
        assert res["regret"].regret_peak == pytest.approx(0.67367, abs=5e-6)
        assert res["noncausal"].frobenius_sq == pytest.approx(syn.Z[0, 0], rel=1e-10)
        assert res["noncausal"].opnorm_sq == pytest.approx(0.8, rel=1e-10)

    def test_oracle(self, s1):
        syn = regret_synthesize(s1)
        assert oracle_regret(toeplitz_truncate(s1, syn.riccati, 64)) == pytest.approx(syn.gamma_sq, rel=1e-12)


def test_resolvent_guard():
    model = PlantModel(np.diag([1.0, 0.5]), np.eye(2), np.ones((2, 1)))
    with pytest.raises(ResolventSingular):
        noncausal_gram(model, 0.0)
    assert np.isnan(noncausal_gram_grid(model, [0.0, 1.0])[0]).all()


def test_destabilizing_controller_rejected():
    model = PlantModel(1.2, 1.0, 1.0)
    with pytest.raises(UnstableLoop):
        close_loop(model, static_gain(np.zeros((1, 1))))


def test_oracle_memory_guard(s1):
    with pytest.raises(OracleTooLarge):
        toeplitz_truncate(s1, regret_synthesize(s1).riccati, 5000)


@pytest.mark.parametrize("model", random_models(21, 8, n_max=6, m_max=3, p_max=3))
class TestRandomModels:
    def test_gram_hermitian_and_conjugate_symmetric(self, model):
        w = np.linspace(0.1, 3.0, 11)
        g = noncausal_gram_grid(model, w)
        assert np.allclose(g, np.conj(np.swapaxes(g, 1, 2)), atol=1e-12)
        assert np.allclose(noncausal_gram_grid(model, -w), np.conj(g), atol=1e-10)
        cl = close_loop(model, regret_synthesize(model).controller)
        T = cl.frequency_response(w)
        assert np.allclose(cl.frequency_response(-w), np.conj(T), atol=1e-10)

    def test_frobenius_matches_gramian(self, model):
        syn = regret_synthesize(model)
        ctrls = {"h2": h2_controller(syn.riccati), "regret": syn.controller}
        res = sweep(model, ctrls, 2048, refine=False)
        for name, c in ctrls.items():
            ref = gramian_h2_norm_sq(close_loop(model, c))
            assert res[name].frobenius_sq == pytest.approx(ref, rel=1e-8)

    def test_quadrature_converges(self, model):
        ctrl = {"r": regret_synthesize(model).controller}
        a = sweep(model, ctrl, 1024, refine=False)["r"].frobenius_sq
        b = sweep(model, ctrl, 2048, refine=False)["r"].frobenius_sq
        assert a == pytest.approx(b, rel=1e-8)

    def test_regret_spectrum_is_flat(self, model):
        syn = regret_synthesize(model)
        res = sweep(model, {"r": syn.controller}, 512, refine=False)["r"]
        assert np.allclose(res.regret_integrand, syn.gamma_sq, rtol=1e-7)

    def test_noncausal_floor(self, model):
        syn = regret_synthesize(model)
        res = sweep(model, {"h2": h2_controller(syn.riccati), "r": syn.controller,
                            "hinf": hinf_synthesize(model).controller}, 1024, refine=False)
        for r in res.values():
            assert np.nanmin(r.regret_floor) >= -1e-8 * max(1.0, np.nanmax(r.opnorm_integrand))

    def test_oracle_monotone_and_convergent(self, model):
        syn = regret_synthesize(model)
        vals = [oracle_regret(toeplitz_truncate(model, syn.riccati, N)) for N in (2, 4, 8, 16, 32)]
        assert all(b >= a * (1 - 1e-12) for a, b in zip(vals, vals[1:]))
        assert vals[-1] <= syn.gamma_sq * (1 + 1e-10)
        full = oracle_regret(toeplitz_truncate(model, syn.riccati))
        assert full == pytest.approx(syn.gamma_sq, rel=1e-6)

    def test_finite_horizon_noncausal_dominates(self, model):
        syn = regret_synthesize(model)
        N = 20
        orc = toeplitz_truncate(model, syn.riccati, N)
        w = np.random.default_rng(0).standard_normal(N * model.p)
        best = orc.cost(orc.K0_N, w)
        for c in (h2_controller(syn.riccati), syn.controller):
            V = policy_toeplitz(close_loop(model, c), N)
            assert orc.cost(V, w) >= best - 1e-9 * max(1.0, best)
