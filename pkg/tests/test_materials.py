import json
import math

import pytest
from scipy import integrate

from cryobudget.errors import ConfigError, OutOfRangeError, UnknownEntryError
from cryobudget.materials import (
    CableElement,
    Extrapolation,
    Material,
    cable_attenuation_db,
    catalog_from_dict,
    conductivity,
    conductivity_array,
    conductivity_integral,
    is_cryogenic,
    load_catalog,
)


def quad_integral(material, a, b):
    breaks = [t for t, _ in material.conductivity_points if a < t < b]
    value, _ = integrate.quad(lambda t: conductivity(material, t), a, b, points=breaks or None, limit=500)
    return value


class TestCatalog:
    def test_bundled_entries(self, catalog):
        assert "stainless_steel" in catalog.materials
        assert catalog.cable("UT085-SS-SS").outer.name == "stainless_steel"
        assert catalog.twisted_pair("PhBr-AWG36").wires_per_pair == 2

    @pytest.mark.parametrize("lookup", ["material", "cable", "twisted_pair"])
    def test_unknown_names(self, catalog, lookup):
        with pytest.raises(UnknownEntryError):
            getattr(catalog, lookup)("unobtainium")

    def test_tables_are_read_only(self, catalog):
        with pytest.raises(TypeError):
            catalog.materials["x"] = None

    def test_fits_are_sampled_to_points(self, catalog):
        ss = catalog.material("stainless_steel")
        assert len(ss.conductivity_points) == 64
        assert ss.valid_range == (pytest.approx(4.0), pytest.approx(300.0))

    def test_bad_json_reports_line(self, tmp_path):
        path = tmp_path / "catalog.json"
        path.write_text('{\n  "materials": [\n    {"name": }\n  ]\n}\n')
        with pytest.raises(ConfigError) as info:
            load_catalog(path)
        assert info.value.line == 3

    def test_unknown_fit_form(self):
        raw = {"materials": [{"name": "m", "fit": {"form": "spline"}, "valid_range_K": [1, 10]}]}
        with pytest.raises(ConfigError):
            catalog_from_dict(raw)

    def test_cable_must_name_known_material(self):
        raw = {
            "materials": [],
            "cables": [
                {
                    "name": "c",
                    "cc_diameter_m": 1e-4,
                    "dielectric_od_m": 2e-4,
                    "shield_od_m": 3e-4,
                    "center": "gold",
                    "dielectric": "gold",
                    "outer": "gold",
                    "attenuation": {"points": [[1e9, 1.0]]},
                }
            ],
        }
        with pytest.raises(UnknownEntryError):
            catalog_from_dict(raw)


class TestConductivity:
    def test_stainless_room_temperature(self, catalog):
        assert 12.0 < conductivity(catalog.material("stainless_steel"), 300.0) < 18.0

    def test_copper_far_above_stainless(self, catalog):
        cu = conductivity(catalog.material("copper_rrr100"), 10.0)
        ss = conductivity(catalog.material("stainless_steel"), 10.0)
        assert cu > 100 * ss

    def test_linear_below_table(self, catalog):
        ss = catalog.material("stainless_steel")
        assert conductivity(ss, 2.0) == pytest.approx(conductivity(ss, 4.0) / 2)
        assert conductivity(ss, 0.0) == 0.0

    def test_exact_at_tabulated_points(self, catalog):
        nbti = catalog.material("nbti")
        for t, k in nbti.conductivity_points:
            assert conductivity(nbti, t) == pytest.approx(k)

    def test_above_table_raises(self, catalog):
        with pytest.raises(OutOfRangeError):
            conductivity(catalog.material("stainless_steel"), 400.0)

    def test_negative_temperature_raises(self, catalog):
        with pytest.raises(OutOfRangeError):
            conductivity(catalog.material("ptfe"), -1.0)

    def test_forbidden_extrapolation(self):
        m = Material("m", ((1.0, 1.0), (10.0, 5.0)), Extrapolation.FORBIDDEN)
        with pytest.raises(OutOfRangeError):
            conductivity(m, 0.5)

    def test_array_matches_scalar(self, catalog):
        ptfe = catalog.material("ptfe")
        temps = [0.1, 1.0, 4.0, 17.3, 120.0, 300.0]
        values = conductivity_array(ptfe, temps)
        assert list(values) == pytest.approx([conductivity(ptfe, t) for t in temps])

    @pytest.mark.parametrize(
        "points",
        [((1.0, 0.0), (2.0, 1.0)), ((2.0, 1.0), (1.0, 2.0)), ((1.0, 1.0),)],
    )
    def test_invalid_tables(self, points):
        with pytest.raises(ConfigError):
            Material("bad", points)


class TestConductivityIntegral:
    @pytest.mark.parametrize(
        "name, a, b",
        [
            ("stainless_steel", 35.0, 300.0),
            ("stainless_steel", 2.85, 35.0),
            ("stainless_steel", 0.006, 0.082),
            ("ptfe", 0.882, 2.85),
            ("copper_rrr100", 4.0, 50.0),
            ("nbti", 0.05, 20.0),
        ],
    )
    def test_matches_quadrature(self, catalog, name, a, b):
        material = catalog.material(name)
        assert conductivity_integral(material, a, b) == pytest.approx(quad_integral(material, a, b), rel=1e-6)

    def test_additive(self, catalog):
        ss = catalog.material("stainless_steel")
        whole = conductivity_integral(ss, 0.5, 200.0)
        parts = conductivity_integral(ss, 0.5, 4.0) + conductivity_integral(ss, 4.0, 200.0)
        assert whole == pytest.approx(parts, rel=1e-12)

    def test_below_table_closed_form(self, catalog):
        ss = catalog.material("stainless_steel")
        k4 = conductivity(ss, 4.0)
        assert conductivity_integral(ss, 1.0, 3.0) == pytest.approx(k4 * (9 - 1) / 8)

    def test_empty_interval(self, catalog):
        assert conductivity_integral(catalog.material("ptfe"), 4.0, 4.0) == 0.0

    def test_reversed_interval_raises(self, catalog):
        with pytest.raises(OutOfRangeError):
            conductivity_integral(catalog.material("ptfe"), 10.0, 4.0)


class TestCables:
    def test_cross_sections(self, ss_cable):
        a_o, a_d, a_c = ss_cable.cross_sections()
        assert a_c == pytest.approx(math.pi * 0.511e-3 ** 2 / 4)
        assert a_o + a_d + a_c == pytest.approx(math.pi * 2.197e-3 ** 2 / 4)
        assert ss_cable.area(CableElement.DIELECTRIC) == a_d

    def test_scaled(self, ss_cable):
        s = 0.047 / 0.085
        thin = ss_cable.scaled(s)
        for big, small in zip(ss_cable.cross_sections(), thin.cross_sections()):
            assert small == pytest.approx(big * s ** 2)
        assert cable_attenuation_db(thin, 6e9, 1.0, False) == pytest.approx(9.7 / s)
        assert thin.dc_resistance_per_m == pytest.approx(2.75 / s ** 2)
        assert ss_cable.scaled(1.0) is ss_cable

    def test_room_temperature_attenuation(self, ss_cable):
        assert cable_attenuation_db(ss_cable, 6e9, 1.0, False) == pytest.approx(9.7)
        assert cable_attenuation_db(ss_cable, 5e9, 1.0, False) == pytest.approx(9.7 * math.sqrt(5 / 6))

    def test_cryogenic_scale(self, ss_cable):
        assert cable_attenuation_db(ss_cable, 6e9, 1.0, True) == pytest.approx(8.2)

    def test_superconducting_cryogenic_run_is_lossless(self, nbti_cable):
        assert cable_attenuation_db(nbti_cable, 6e9, 0.25, True) == 0.0
        assert cable_attenuation_db(nbti_cable, 6e9, 0.25, False) > 0.0

    def test_frequency_outside_data(self, ss_cable):
        with pytest.raises(OutOfRangeError):
            cable_attenuation_db(ss_cable, 1e11, 1.0, False)

    def test_cryogenic_threshold(self):
        assert is_cryogenic(2.85)
        assert not is_cryogenic(35.0)

    def test_catalog_override_file(self, tmp_path, catalog):
        raw = {
            "materials": [{"name": "m", "points": [[1.0, 1.0], [300.0, 10.0]]}],
            "cables": [],
            "twisted_pairs": [{"name": "p", "wire_material": "m", "wire_diameter_m": 1e-4}],
        }
        path = tmp_path / "mine.json"
        path.write_text(json.dumps(raw))
        mine = load_catalog(path)
        assert mine.twisted_pair("p").wire_material.name == "m"
        assert "UT085-SS-SS" not in mine.cables
