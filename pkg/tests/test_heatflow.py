import pytest

from cryobudget import heatflow
from cryobudget.errors import DomainError, OutOfRangeError, TopologyError
from cryobudget.fridge import LineKind, LineSpec, Segment, ShieldGeometry, Thermalization
from cryobudget.heatflow import (
    DielectricPolicy,
    ThermalizationAssumption,
    conductive_load,
    line_passive_profile,
    loom_passive_profile,
    radiative_load,
    shield_loads,
    twisted_pair_load,
)
from cryobudget.materials import CableElement, conductivity_integral

from .conftest import STAGES, coax_line

uW = 1e-6
mW = 1e-3


class TestConductiveLoad:
    def test_elements_add_up(self, ss_cable):
        total = conductive_load(ss_cable, 0.2, 35.0, 300.0)
        parts = sum(conductive_load(ss_cable, 0.2, 35.0, 300.0, [e]) for e in CableElement)
        assert total == pytest.approx(parts)

    def test_inverse_in_length(self, ss_cable):
        assert conductive_load(ss_cable, 0.4, 2.85, 35.0) == pytest.approx(
            conductive_load(ss_cable, 0.2, 2.85, 35.0) / 2
        )

    def test_isothermal_run_carries_nothing(self, ss_cable):
        assert conductive_load(ss_cable, 0.2, 4.0, 4.0) == 0.0

    def test_bad_arguments(self, ss_cable):
        with pytest.raises(DomainError):
            conductive_load(ss_cable, 0.0, 4.0, 10.0)
        with pytest.raises(OutOfRangeError):
            conductive_load(ss_cable, 0.2, 10.0, 4.0)


def test_twisted_pair_load(catalog):
    pair = catalog.twisted_pair("PhBr-AWG36")
    expected = 2 * pair.wire_area * conductivity_integral(pair.wire_material, 2.85, 35.0) / 0.29
    assert twisted_pair_load(pair, 0.29, 2.85, 35.0) == pytest.approx(expected)


def test_loom_clamped_at_every_stage(catalog, fridge):
    pair = catalog.twisted_pair("PhBr-AWG36")
    one = loom_passive_profile(pair, fridge)
    twelve = loom_passive_profile(pair, fridge, count=12)
    assert list(one) == list(STAGES)
    assert twelve["4K"] == pytest.approx(12 * one["4K"])
    assert one["50K"] > one["4K"] > one["Still"] > one["MXC"] > 0


def test_copper_pairs_rival_stainless_coax(catalog, ss_cable):
    # both run from room temperature straight to the 4K plate
    copper = twisted_pair_load(catalog.twisted_pair("Cu-AWG35"), 0.49, 2.85, 300.0)
    bronze = twisted_pair_load(catalog.twisted_pair("PhBr-AWG36"), 0.49, 2.85, 300.0)
    coax = conductive_load(ss_cable, 0.49, 2.85, 300.0)
    assert 0.1 <= copper / coax <= 10
    assert copper > 10 * bronze


def test_copper_center_conductor_loads_every_stage(catalog, fridge, ss_cable):
    sunk = {s: 3 for s in STAGES}
    stainless = line_passive_profile(coax_line(ss_cable, sunk), fridge).lower
    copper = line_passive_profile(coax_line(catalog.cable("UT085-SS-Cu"), sunk), fridge).lower
    for stage in STAGES:
        assert copper[stage] > stainless[stage]
    assert copper["50K"] / stainless["50K"] > 3
    assert copper["4K"] / stainless["4K"] > 50


class TestRadiation:
    geometry = ShieldGeometry(radius_inner=0.40, radius_outer=0.44, height=1.35, emissivity=0.06)

    def test_room_to_50k_shield(self):
        assert radiative_load(self.geometry, 300.0, 35.0) == pytest.approx(50.4, rel=0.01)

    def test_no_gradient(self):
        assert radiative_load(self.geometry, 4.0, 4.0) == 0.0

    def test_inverted_temperatures(self):
        with pytest.raises(OutOfRangeError):
            radiative_load(self.geometry, 4.0, 35.0)

    def test_uncounted_shield_stays_out_of_budget(self, fridge):
        assert all(v == 0 for v in shield_loads(fridge).values())
        assert shield_loads(fridge, counted_only=False)["50K"] == pytest.approx(50.4, rel=0.01)


class TestSeriesFlow:
    def test_single_material_uses_total_length(self, ss_cable):
        m, a = ss_cable.outer, ss_cable.area(CableElement.OUTER)
        q = heatflow._series_flow([(m, a, 0.2), (m, a, 0.29)], 300.0, 2.85)
        assert q == pytest.approx(a * conductivity_integral(m, 2.85, 300.0) / 0.49)

    def test_mixed_runs_share_one_flow(self, ss_cable, nbti_cable):
        ss, nbti = ss_cable.center, nbti_cable.center
        a = ss_cable.area(CableElement.CENTER)
        q = heatflow._series_flow([(ss, a, 0.29), (nbti, a, 0.25)], 35.0, 0.882)
        # both runs must carry q for some intermediate temperature
        from scipy.optimize import brentq

        t_mid = brentq(lambda t: a * conductivity_integral(ss, t, 35.0) / 0.29 - q, 0.882, 35.0)
        assert a * conductivity_integral(nbti, 0.882, t_mid) / 0.25 == pytest.approx(q, rel=1e-6)

    def test_no_gradient(self, ss_cable):
        assert heatflow._series_flow([(ss_cable.outer, 1e-6, 0.1)], 1.0, 1.0) == 0.0


class TestLineProfile:
    """Passive loads of single lines in the five-plate fridge."""

    def test_drive_line_bounds(self, fridge, drive_line):
        profile = line_passive_profile(drive_line, fridge)
        assert profile.bounds("50K") == (pytest.approx(24.4 * mW, rel=0.03), pytest.approx(27.5 * mW, rel=0.03))
        low_4k, high_4k = profile.bounds("4K")
        # lower bound sits 7 % above the quoted 0.409 mW
        assert low_4k == pytest.approx(0.437 * mW, rel=0.03)
        assert low_4k == pytest.approx(0.409 * mW, rel=0.10)
        assert high_4k == pytest.approx(1.646 * mW, rel=0.03)
        assert profile.bounds("Still") == (pytest.approx(1.923 * uW, rel=0.03), pytest.approx(2.128 * uW, rel=0.03))
        assert profile.bounds("CP") == (pytest.approx(0.3286 * uW, rel=0.03), pytest.approx(0.4319 * uW, rel=0.03))
        low, high = profile.bounds("MXC")
        assert low == pytest.approx(high)
        assert low == pytest.approx(0.00346 * uW, rel=0.05)

    def test_flux_line_unsunk_at_cp(self, fridge, flux_line):
        profile = line_passive_profile(flux_line, fridge)
        low, high = profile.bounds("CP")
        assert low == pytest.approx(high)
        assert low == pytest.approx(0.297 * uW, rel=0.03)
        assert profile.bounds("MXC") == (pytest.approx(0.02065 * uW, rel=0.05), pytest.approx(0.1044 * uW, rel=0.05))

    def test_flux_line_against_quoted_interval(self, fridge, flux_line):
        # conductivity tables put both ends about 25 % under 0.027-0.131 uW
        low, high = line_passive_profile(flux_line, fridge).bounds("MXC")
        assert low == pytest.approx(0.027 * uW, rel=0.35)
        assert high == pytest.approx(0.131 * uW, rel=0.35)
        assert high / low == pytest.approx(0.131 / 0.027, rel=0.1)
        # the measured 0.025 uW per flux line falls inside the bounds
        assert low <= 0.025 * uW <= high

    def test_superconducting_output_line(self, fridge, output_line):
        # NbTi below 4 K rests on three points only; compare loosely
        profile = line_passive_profile(output_line, fridge)
        assert profile.lower["50K"] == profile.upper["50K"] == 0.0
        assert profile.lower["4K"] == 0.0
        assert profile.bounds("CP") == (pytest.approx(0.309 * uW, rel=0.2), pytest.approx(0.368 * uW, rel=0.2))
        low, high = profile.bounds("MXC")
        assert low == pytest.approx(0.01206 * uW, rel=0.3)
        assert high == pytest.approx(0.0554 * uW, rel=0.3)

    def test_bounds_are_ordered(self, fridge, drive_line, flux_line):
        for line in (drive_line, flux_line):
            profile = line_passive_profile(line, fridge)
            for stage in profile.stages:
                low, high = profile.bounds(stage)
                assert 0 <= low <= high
                assert profile.midpoint()[stage] == pytest.approx((low + high) / 2)

    def test_fully_sunk_line_has_no_spread(self, fridge, ss_cable):
        line = coax_line(ss_cable, {s: 3 for s in STAGES})
        profile = line_passive_profile(line, fridge)
        assert profile.lower == pytest.approx(profile.upper)

    def test_assumption_pins_center(self, fridge, drive_line):
        pinned = ThermalizationAssumption(center={"50K": Thermalization.FULL, "Still": Thermalization.FULL})
        profile = line_passive_profile(drive_line, fridge, pinned)
        free = line_passive_profile(drive_line, fridge)
        assert profile.lower["50K"] == pytest.approx(profile.upper["50K"])
        assert free.lower["50K"] <= profile.lower["50K"] <= free.upper["50K"]

    def test_dielectric_policies_agree_when_everything_is_sunk(self, fridge, ss_cable):
        line = coax_line(ss_cable, {s: 10 for s in STAGES})
        outer = line_passive_profile(line, fridge, ThermalizationAssumption(DielectricPolicy.WITH_OUTER))
        center = line_passive_profile(line, fridge, ThermalizationAssumption(DielectricPolicy.WITH_CENTER))
        assert outer.lower == pytest.approx(center.lower)

    def test_dielectric_with_center_moves_heat_down(self, fridge, drive_line):
        outer = line_passive_profile(drive_line, fridge, ThermalizationAssumption(DielectricPolicy.WITH_OUTER))
        center = line_passive_profile(drive_line, fridge, ThermalizationAssumption(DielectricPolicy.WITH_CENTER))
        assert center.upper["4K"] >= outer.upper["4K"]

    def test_dangling_line(self, fridge, ss_cable):
        line = LineSpec("short", LineKind.DRIVE, tuple(Segment(s, ss_cable) for s in STAGES[:3]))
        with pytest.raises(TopologyError):
            line_passive_profile(line, fridge)

    def test_skipped_stage(self, fridge, ss_cable):
        line = LineSpec("gap", LineKind.DRIVE, tuple(Segment(s, ss_cable) for s in ("50K", "Still", "CP", "MXC")))
        with pytest.raises(TopologyError):
            line_passive_profile(line, fridge)
