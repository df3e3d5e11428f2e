import json

import numpy as np
import pytest

from rydramp.model import (BareState, ChainConfig, ConfigError, OmegaEnvelope,
                           PulseSchedule, RunConfig, default_nqn_seed,
                           target_state, uniform_knot_times)

from conftest import chain_for


class TestChainConfig:
    def test_validation(self):
        with pytest.raises(ConfigError, match="n_atoms"):
            ChainConfig(n_atoms=0, spacing=4.0)
        with pytest.raises(ConfigError, match="spacing"):
            ChainConfig(n_atoms=3, spacing=-1.0)
        with pytest.raises(ConfigError, match="order"):
            ChainConfig(n_atoms=3, spacing=4.0, order=5)

    def test_blockade_radius(self):
        cfg = ChainConfig(n_atoms=3, spacing=4.0, c6=862690.0, omega=1.0)
        assert cfg.blockade_radius() == pytest.approx(9.756, abs=2e-3)
        # angular/linear prefactors cancel in the ratio
        cfg2 = ChainConfig(n_atoms=3, spacing=4.0, c6=2 * 862690.0, omega=2.0)
        assert cfg2.blockade_radius() == pytest.approx(cfg.blockade_radius())


class TestTargetState:
    def test_period2_three_atoms(self):
        cfg = chain_for(3)
        assert target_state(cfg).index == 5  # |101>

    def test_period3_four_atoms(self):
        cfg = chain_for(4, order=3)
        assert target_state(cfg).index == 9  # |1001>

    def test_single_atom(self):
        cfg = chain_for(1)
        assert target_state(cfg).index == 1  # |1>

    def test_period4_five_atoms(self):
        cfg = chain_for(5, order=4)
        assert target_state(cfg).bits == "10001"

    def test_congruence_rejected(self):
        with pytest.raises(ConfigError, match="congruent"):
            target_state(chain_for(4, order=2))
        with pytest.raises(ConfigError, match="congruent"):
            target_state(chain_for(6, order=3))

    @pytest.mark.parametrize("n,k", [(3, 2), (5, 2), (9, 2), (7, 3), (9, 4)])
    def test_excitation_count(self, n, k):
        tgt = target_state(chain_for(n, order=k))
        assert tgt.excitations == (n - 1) // k + 1
        if k == 2:
            assert tgt.excitations == (n + 1) // 2


class TestBareState:
    def test_string_roundtrip(self):
        s = BareState.from_string("10010")
        assert s.index == 18 and s.n_atoms == 5
        assert s.bits == "10010"
        assert list(s.occupations()) == [1, 0, 0, 1, 0]


def simple_schedule(**kw):
    defaults = dict(tau=1.8, knot_times=uniform_knot_times(1.8, 8),
                    knot_deltas=tuple(np.linspace(-12, 12, 9)),
                    envelope=OmegaEnvelope(hold=1.0))
    defaults.update(kw)
    return PulseSchedule(**defaults)


class TestPulseSchedule:
    def test_knot_values_exact(self):
        s = simple_schedule()
        for t, d in zip(s.knot_times, s.knot_deltas):
            assert s.delta_at(t) == d

    def test_linear_midpoint(self):
        s = PulseSchedule(tau=1.0, knot_times=(0.0, 0.5, 1.0),
                          knot_deltas=(-12.0, -6.0, 0.0),
                          envelope=OmegaEnvelope(hold=1.0))
        assert s.delta_at(0.25) == pytest.approx(-9.0)

    def test_idle_lead_values(self):
        s = simple_schedule(envelope=OmegaEnvelope(hold=1.0, idle_lead=0.15,
                                                   idle_tail=0.15))
        om, de = s.evaluate(0.07)
        assert om == 0.0 and de == -12.0
        om, de = s.evaluate(s.total_duration - 0.05)
        assert om == 0.0 and de == 12.0
        assert s.total_duration == pytest.approx(1.8 + 0.3)

    def test_continuity(self):
        s = simple_schedule(envelope=OmegaEnvelope(hold=1.0, rise=0.05,
                                                   fall=0.05, idle_lead=0.15,
                                                   idle_tail=0.15))
        ts = np.linspace(0.0, s.total_duration, 4001)
        om = s.omega_at(ts)
        de = s.delta_at(ts)
        assert np.max(np.abs(np.diff(om))) < 0.05
        assert np.max(np.abs(np.diff(de))) < 0.05

    def test_monotone_knots_required(self):
        with pytest.raises(ConfigError, match="knot_times"):
            PulseSchedule(tau=1.0, knot_times=(0.0, 0.6, 0.5, 1.0),
                          knot_deltas=(0.0, 1.0, 2.0, 3.0),
                          envelope=OmegaEnvelope(hold=1.0))

    def test_segment_floor(self):
        with pytest.raises(ConfigError, match="knot_times"):
            PulseSchedule(tau=0.06, knot_times=(0.0, 0.01, 0.06),
                          knot_deltas=(0.0, 1.0, 2.0),
                          envelope=OmegaEnvelope(hold=1.0))

    def test_out_of_range_time(self):
        s = simple_schedule()
        with pytest.raises(ConfigError, match="t:"):
            s.evaluate(2.5)

    def test_json_roundtrip_bitwise(self, tmp_path):
        s = simple_schedule(knot_deltas=tuple(
            np.random.default_rng(5).uniform(-12, 12, 9)))
        p = tmp_path / "sched.json"
        s.save(p)
        s2 = PulseSchedule.load(p)
        assert s2.knot_deltas == s.knot_deltas
        assert s2.knot_times == s.knot_times
        assert s2.envelope == s.envelope
        # a second export produces identical bytes
        p2 = tmp_path / "sched2.json"
        s2.save(p2)
        assert p.read_bytes() == p2.read_bytes()


class TestDefaultSeed:
    def test_uniform_knots(self):
        cfg = chain_for(7)
        s = default_nqn_seed(cfg, 1.8, 8)
        assert len(s.knot_times) == 9
        assert np.allclose(np.diff(s.knot_times), 0.225)
        assert s.knot_deltas[0] == -12.0 and s.knot_deltas[-1] == 12.0

    def test_interior_from_rng(self):
        cfg = chain_for(7)
        rng = np.random.default_rng(3)
        s = default_nqn_seed(cfg, 1.8, 8, rng=rng)
        inner = np.array(s.knot_deltas[1:-1])
        assert np.all(np.abs(inner) <= 12.0)
        s2 = default_nqn_seed(cfg, 1.8, 8, rng=np.random.default_rng(3))
        assert s.knot_deltas == s2.knot_deltas

    def test_resolution_floor_boundary(self):
        cfg = chain_for(3)
        s = default_nqn_seed(cfg, 8 * 0.05, 8)  # exactly at the floor
        assert len(s.knot_times) == 9
        with pytest.raises(ConfigError, match="tau"):
            default_nqn_seed(cfg, 8 * 0.05 - 1e-4, 8)


class TestRunConfig:
    def test_defaults_materialized(self):
        rc = RunConfig()
        doc = rc.to_json_dict()
        assert doc["spacing_um"] > 0
        assert set(doc) == {
            "n_atoms", "order", "omega_mhz", "spacing_um", "c6_mhz_um6",
            "tau_us", "n_segments", "delta_start_over_omega",
            "delta_end_over_omega", "idle_us", "seed", "restarts"}

    def test_unknown_field_named(self):
        with pytest.raises(ConfigError, match="bogus"):
            RunConfig.from_json_dict({"bogus": 1})

    def test_order_default_spacing(self):
        rc3 = RunConfig(n_atoms=7, order=3)
        rb = (rc3.c6_mhz_um6 / rc3.omega_mhz) ** (1 / 6)
        assert rc3.resolved_spacing() == pytest.approx(0.36 * rb)

    def test_roundtrip(self, tmp_path):
        rc = RunConfig(n_atoms=5, seed=7, restarts=3)
        p = tmp_path / "cfg.json"
        with open(p, "w") as fh:
            json.dump(rc.to_json_dict(), fh)
        rc2 = RunConfig.load(p)
        assert rc2.to_json_dict() == rc.to_json_dict()
