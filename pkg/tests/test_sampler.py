import time

import numpy as np
import pytest
from scipy import stats

from hawkesgame.lattice import Lattice
from hawkesgame.point_process import KernelParams, StationarityError, intensity_at, params_for_case
from hawkesgame.sampler import (
    LatticeSampler,
    _heapify,
    _reschedule,
    default_burn_in,
    sample_lattice,
    sample_single,
)

from oracles import naive_lattice_thinning


def rng(seed=0):
    return np.random.default_rng(seed)


class TestSingle:
    def test_poisson_interarrivals_are_exponential(self):
        tl = sample_single(KernelParams(rho=1.0), 1.2e5, rng(1))
        gaps = np.diff(tl.times)[:100_000]
        assert len(gaps) == 100_000
        assert stats.kstest(gaps, "expon").pvalue > 0.01

    def test_half_baseline_rate(self):
        tl = sample_single(KernelParams(rho=0.5, alpha_n=0.5), 1.0e6, rng(2))
        assert len(tl) / 1.0e6 == pytest.approx(1.0, rel=0.02)

    @pytest.mark.slow
    def test_near_critical_rate(self):
        tl = sample_single(KernelParams(rho=1.0, alpha_n=0.9), 2.0e5, rng(3))
        assert len(tl) / 2.0e5 == pytest.approx(10.0, rel=0.03)

    def test_window_and_order(self):
        tl = sample_single(KernelParams(rho=2.0, alpha_n=0.7, nu=3.0), 50.0, rng(4))
        assert np.all(tl.times >= 0) and np.all(tl.times < 50.0)
        assert np.all(np.diff(tl.times) > 0)

    def test_empty_is_valid(self):
        tl = sample_single(KernelParams(rho=0.0), 10.0, rng(5))
        assert len(tl) == 0

    def test_deterministic(self):
        p = KernelParams(rho=0.5, alpha_n=0.5)
        a = sample_single(p, 100.0, rng(9))
        b = sample_single(p, 100.0, rng(9))
        assert a.times.tobytes() == b.times.tobytes()


class TestLattice:
    def test_poisson_counts(self):
        lat = Lattice(100)
        tl = sample_lattice(params_for_case("poisson", 0, 1, 4), lat, 1.0, rng(10))
        c = tl.per_agent_counts
        assert c.mean() == pytest.approx(1.0, abs=0.02)
        assert c.var(ddof=1) == pytest.approx(1.0, abs=0.05)

    def test_exo_mean_count_after_burn_in(self):
        lat = Lattice(100)
        p = params_for_case("exo", 0.5, 1, 4)
        tl = sample_lattice(p, lat, 1.0, rng(11), burn_in=default_burn_in(p, 4))
        assert tl.per_agent_counts.mean() == pytest.approx(1.0, abs=0.02)

    def test_counts_consistent(self):
        lat = Lattice(10)
        tl = sample_lattice(params_for_case("endo", 0.5, 2, 4), lat, 3.0, rng(12))
        c = tl.per_agent_counts
        assert c.sum() == len(tl)
        for i in range(lat.N):
            assert c[i] == np.count_nonzero(tl.agents == i)

    def test_uncoupled_agent_matches_single(self):
        lat = Lattice(10)
        p = KernelParams(rho=1.0)
        tl = sample_lattice(p, lat, 200.0, rng(13))
        embedded = np.concatenate([np.diff(tl.agent_times(i)) for i in range(lat.N)])
        alone = np.diff(sample_single(p, 2.0e4, rng(14)).times)
        assert stats.ks_2samp(embedded, alone).pvalue > 0.01

    def test_refuses_nonstationary(self):
        p = KernelParams(rho=0.1, alpha_x=0.5, beta=1.0)
        with pytest.raises(StationarityError):
            LatticeSampler(p, Lattice(5), rng())

    def test_windows_disjoint_and_relative(self):
        lat = Lattice(6)
        s = LatticeSampler(params_for_case("exo", 0.7, 2, 4), lat, rng(15))
        for _ in range(20):
            tl = s.next_window(0.5)
            assert np.all(tl.times >= 0) and np.all(tl.times < 0.5)
            assert np.all(np.diff(tl.times) >= 0)

    @pytest.mark.parametrize("carry", [True, False])
    def test_deterministic(self, carry):
        lat = Lattice(8)
        p = params_for_case("exo", 0.6, 1, 4)

        def run():
            s = LatticeSampler(p, lat, rng(16), carry_history=carry)
            return [s.next_window(1.0) for _ in range(5)]

        for a, b in zip(run(), run()):
            assert a.times.tobytes() == b.times.tobytes()
            assert a.agents.tobytes() == b.agents.tobytes()

    def test_reset_history_starts_at_baseline(self):
        lat = Lattice(5)
        p = params_for_case("endo", 0.9, 1, 4)
        s = LatticeSampler(p, lat, rng(17), carry_history=False)
        for _ in range(3):
            s.next_window(1.0)
        # what every window begins with
        s._restart()
        assert all(s.intensity(i) == pytest.approx(p.rho) for i in range(lat.N))

    @pytest.mark.parametrize("carry,expected", [(True, 1.0), (False, 1 - 0.9 * (1 - np.exp(-0.1)) / 0.1)])
    def test_history_mode_sets_mean_count(self, carry, expected):
        # restarting from an empty history each window loses the ramp-up:
        # mean intensity 1 - alpha*exp(-(1-alpha)t), integrated over [0, 1]
        lat = Lattice(30)
        s = LatticeSampler(params_for_case("endo", 0.9, 1, 4), lat, rng(18), carry_history=carry)
        m = np.mean([s.next_window(1.0).per_agent_counts.mean() for _ in range(400)])
        assert m == pytest.approx(expected, rel=0.05)

    def test_recursive_state_matches_full_history(self):
        lat = Lattice(6)
        p = params_for_case("exo", 0.5, 2.0, 4)
        s = LatticeSampler(p, lat, rng(19), burn_in=0.0)
        events = []
        for g in range(30):
            tl = s.next_window(0.2)
            events += [(g * 0.2 + t, a) for t, a in zip(tl.times, tl.agents)]
        assert events
        t = s.clock
        for i in range(lat.N):
            nb = set(lat.neighbors[i].tolist())
            own = [e for e, a in events if a == i]
            other = [e for e, a in events if a in nb]
            assert s.intensity(i, t) == pytest.approx(intensity_at(p, own, other, t), rel=1e-10)

    def test_exo_locality(self):
        # an event of agent j raises the exogenous excitation of j's neighbours only
        lat = Lattice(6)
        p = params_for_case("exo", 0.5, 1.0, 4)
        s = LatticeSampler(p, lat, rng(20), burn_in=0.0)

        def exo_at(t):
            return s.exo * np.exp(-p.decay * (t - s.t_ref))

        checked = 0
        for _ in range(400):
            before = (s.exo.copy(), s.t_ref.copy())
            tl = s.next_window(0.02)
            if len(tl) != 1:
                continue
            j = tl.agents[0]
            t = s.clock
            old = before[0] * np.exp(-p.decay * (t - before[1]))
            jump = exo_at(t) - old
            nbrs = lat.neighbors[j]
            np.testing.assert_allclose(jump[nbrs], np.exp(-p.decay * (0.02 - tl.times[0])), rtol=1e-9)
            mask = np.ones(lat.N, dtype=bool)
            mask[nbrs] = False
            np.testing.assert_allclose(jump[mask], 0.0, atol=1e-12)
            checked += 1
        assert checked > 10


def _heap_ok(heap, cand):
    n = len(heap)
    for p in range(n):
        for c in (2 * p + 1, 2 * p + 2):
            if c < n:
                a, b = heap[p], heap[c]
                assert (cand[a], a) <= (cand[b], b)


def test_indexed_heap_invariant():
    r = rng(20)
    n = 50
    cand = r.random(n)
    heap = np.zeros(n, dtype=np.int64)
    pos = np.zeros(n, dtype=np.int64)
    _heapify(heap, pos, cand)
    _heap_ok(heap, cand)
    for _ in range(500):
        i = int(r.integers(n))
        _reschedule(heap, pos, cand, i, float(r.random() * 2))
        _heap_ok(heap, cand)
        assert np.all(heap[pos] == np.arange(n))
        assert cand[heap[0]] == cand.min()


@pytest.mark.slow
@pytest.mark.parametrize("case,alpha", [("exo", 0.6), ("endo", 0.6)])
def test_heap_scheduler_matches_naive_rescan(case, alpha):
    lat = Lattice(4)
    p = params_for_case(case, alpha, 1.0, lat.k)
    windows, t_w = 1000, 2.0
    fast_gaps, fast_counts, slow_gaps, slow_counts = [], [], [], []
    r_fast, r_slow = rng(21), rng(22)
    for _ in range(windows):
        tl = sample_lattice(p, lat, t_w, r_fast)
        fast_gaps.append(np.diff(np.concatenate([[0.0], tl.times])))
        fast_counts.append(tl.per_agent_counts)
        times, agents = naive_lattice_thinning(p, lat, t_w, r_slow)
        slow_gaps.append(np.diff(np.concatenate([[0.0], times])))
        slow_counts.append(np.bincount(agents, minlength=lat.N))
    fg, sg = np.concatenate(fast_gaps), np.concatenate(slow_gaps)
    fc, sc = np.concatenate(fast_counts), np.concatenate(slow_counts)
    assert stats.ks_2samp(fg, sg).pvalue > 0.01
    assert stats.ks_2samp(fc, sc).pvalue > 0.01


@pytest.mark.slow
def test_work_per_event_grows_slowly_with_n():
    p = params_for_case("exo", 0.5, 1, 4)

    def per_event(L, t):
        s = LatticeSampler(p, Lattice(L), rng(23))
        s.next_window(0.1)
        start = time.perf_counter()
        n = sum(len(s.next_window(1.0)) for _ in range(t))
        return (time.perf_counter() - start) / n

    small = min(per_event(10, 400) for _ in range(3))
    large = min(per_event(100, 4) for _ in range(3))
    # O(N) rescanning would make this ratio about 100
    assert large / small < 10
