import numpy as np
import pytest
from scipy.integrate import quad

from fbq.baselines import TruncatedLoadFunctions, fcfs_L, las_L, priority_two_class_L
from fbq.models import CoxianService, SingleServerModel, SpeedProfile, UnstableModelError
from fbq.single import solve_k1_closed_form

SERVICE = CoxianService(5.0, 1.0, 0.1)


def fb_L(lam, service):
    return solve_k1_closed_form(SingleServerModel(lam, service, SpeedProfile((1.0, 1.0)))).L


class TestFcfs:
    def test_reference_point(self):
        # exact arithmetic: rho = 0.63, M2 = 0.32
        assert fcfs_L(2.1, SERVICE) == pytest.approx(2.537027027027027, rel=1e-13)

    def test_mm1_when_q_zero(self):
        svc = CoxianService(2.0, 1.0, 0.0)
        for lam in (0.2, 1.0, 1.8):
            rho = lam / 2.0
            assert fcfs_L(lam, svc) == pytest.approx(rho / (1 - rho), rel=1e-13)

    def test_light_traffic(self):
        assert fcfs_L(1e-9, SERVICE) == pytest.approx(0.0, abs=1e-8)

    def test_overload_rejected(self):
        with pytest.raises(UnstableModelError):
            fcfs_L(3.4, SERVICE)


class TestLas:
    def test_equals_fcfs_for_exponential_service(self):
        svc = CoxianService(5.0, 5.0, 0.0)
        for lam in (1.0, 3.0, 4.5):
            assert las_L(lam, svc) == pytest.approx(fcfs_L(lam, svc), abs=1e-8)

    def test_reference_point(self):
        # the comparison figure reads ~1.48 at its first grid point
        assert las_L(2.1, SERVICE) == pytest.approx(1.48732, abs=5e-2)
        assert las_L(2.1, SERVICE) == pytest.approx(1.4873204108, rel=1e-8)

    def test_density_normalises_on_the_same_support(self):
        total, _ = quad(SERVICE.density, 0.0, 14 * np.log(10) / 1.0 + 10, epsabs=1e-12, limit=200)
        assert total == pytest.approx(1.0, abs=1e-8)

    def test_overload_rejected(self):
        with pytest.raises(UnstableModelError):
            las_L(3.4, SERVICE)


class TestTruncatedLoad:
    @pytest.mark.parametrize("seed", range(4))
    def test_closed_forms_match_quadrature(self, seed):
        rng = np.random.default_rng(seed)
        svc = CoxianService(rng.uniform(0.5, 6.0), rng.uniform(0.2, 3.0), rng.uniform(0.0, 1.0))
        lam = 0.8 / svc.mean() * rng.uniform(0.2, 1.0)
        tl = TruncatedLoadFunctions(lam, svc)
        for x in rng.uniform(0.01, 6.0, 5):
            load_num = lam * quad(svc.survival, 0.0, x, epsabs=1e-13, limit=200)[0]
            m2_num = 2 * quad(lambda t: t * svc.survival(t), 0.0, x, epsabs=1e-13, limit=200)[0]
            assert tl.load(x) == pytest.approx(load_num, abs=1e-9)
            assert tl.second_moment(x) == pytest.approx(m2_num, abs=1e-9)

    def test_limits(self):
        tl = TruncatedLoadFunctions(2.1, SERVICE)
        assert tl.load(0.0) == 0.0
        assert tl.load(200.0) == pytest.approx(2.1 * SERVICE.mean(), rel=1e-12)
        assert tl.second_moment(200.0) == pytest.approx(SERVICE.second_moment(), rel=1e-12)

    def test_monotone(self):
        tl = TruncatedLoadFunctions(2.1, SERVICE)
        xs = np.linspace(0, 10, 40)
        loads = [tl.load(x) for x in xs]
        assert all(b >= a for a, b in zip(loads, loads[1:]))

    def test_equal_rate_branch(self):
        svc = CoxianService(2.0, 2.0, 0.5)
        tl = TruncatedLoadFunctions(0.8, svc)
        load_num = 0.8 * quad(svc.survival, 0.0, 2.0, epsabs=1e-13)[0]
        m2_num = 2 * quad(lambda t: t * svc.survival(t), 0.0, 2.0, epsabs=1e-13)[0]
        assert tl.load(2.0) == pytest.approx(load_num, abs=1e-10)
        assert tl.second_moment(2.0) == pytest.approx(m2_num, abs=1e-10)


class TestPriorityLimit:
    def test_mm1_when_q_zero(self):
        svc = CoxianService(2.0, 1.0, 0.0)
        assert priority_two_class_L(1.0, svc) == pytest.approx(1.0, rel=1e-12)

    def test_close_to_two_queue_chain_when_coupling_weak(self):
        svc = CoxianService(5.0, 0.5, 0.05)
        pr = priority_two_class_L(2.1, svc)
        fb = fb_L(2.1, svc)
        assert abs(pr - fb) / fb < 0.05

    def test_light_traffic(self):
        assert priority_two_class_L(1e-9, SERVICE) == pytest.approx(0.0, abs=1e-8)


class TestOrdering:
    GRID = [2.1 + 0.1 * k for k in range(12)]

    def test_base_grid(self):
        for lam in self.GRID:
            f, l, b = fcfs_L(lam, SERVICE), las_L(lam, SERVICE), fb_L(lam, SERVICE)
            assert f > l > b

    def test_weak_and_strong_coupling_grids(self):
        weak = CoxianService(5.0, 0.5, 0.05)
        strong = CoxianService(5.0, 2.0, 0.2)
        for lam in self.GRID:
            gap_base = las_L(lam, SERVICE) - fb_L(lam, SERVICE)
            f, l, b = fcfs_L(lam, weak), las_L(lam, weak), fb_L(lam, weak)
            assert f > l > b
            assert l - b < gap_base  # weaker coupling narrows the gap
            f, l, b = fcfs_L(lam, strong), las_L(lam, strong), fb_L(lam, strong)
            assert f > l > b
            assert l - b > gap_base  # stronger coupling widens it
