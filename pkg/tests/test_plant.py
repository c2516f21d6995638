"""Plant dynamics: stacking rules, rate/inflation laws, motion, drops, conflicts."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from peristation import (
    COMPRESSION,
    DEFLATE,
    HOLD,
    INFLATE,
    LONGITUDINAL,
    ChamberState,
    ModuleSpec,
    ObjectSpec,
    ObjectState,
    Plant,
    PlantParams,
    RingGeometry,
    StationLayout,
    SurrogateMaterial,
    build_station,
    calibrate_kappa,
    contact_check,
    inflation_of,
    pressure_rate,
    station_violations,
    step,
    time_to_contact,
)
from tests.conftest import NOMINAL


def make_plant(layout, material, params, obj=None):
    return Plant(layout, obj, params, material)


def grip(plant, module_id, ticks=1700):
    """Inflate one ring past first contact, then hold it."""
    plant.set_valve(module_id, INFLATE)
    for _ in range(ticks):
        plant.step()
    plant.set_valve(module_id, HOLD)


class TestStationRules:
    def test_build_station_layout(self, geometry):
        layout = build_station(geometry, 5, 20.0, 20.0)
        kinds = [m.kind for m in layout.modules]
        assert kinds == [COMPRESSION, LONGITUDINAL, COMPRESSION, LONGITUDINAL, COMPRESSION]
        assert [m.id for m in layout.modules] == [1, 2, 3, 4, 5]
        assert [m.z_origin for m in layout.modules] == [0.0, 20.0, 40.0, 60.0, 80.0]
        assert layout.station_top == 100.0
        assert layout.module(3) is layout.modules[2]

    def test_mixed_heights_stack_contiguously(self, geometry):
        layout = build_station(geometry, 5, 20.0, 10.0)
        assert [m.z_origin for m in layout.modules] == [0.0, 20.0, 30.0, 50.0, 60.0]
        assert layout.station_top == 80.0

    @pytest.mark.parametrize("count", [0, 2, 4, -3])
    def test_even_or_empty_count_rejected(self, geometry, count):
        with pytest.raises(ValueError, match="odd"):
            build_station(geometry, count, 20.0, 20.0)

    def test_single_module_station(self, geometry):
        layout = build_station(geometry, 1, 20.0, 20.0)
        assert len(layout.modules) == 1
        assert layout.modules[0].kind == COMPRESSION

    def test_empty_station_named(self):
        assert station_violations([]) == ["station must contain at least one module"]

    def test_noncontiguous_ids_named(self, geometry):
        mods = [
            ModuleSpec(1, COMPRESSION, geometry, 20.0, 0.0),
            ModuleSpec(3, LONGITUDINAL, geometry, 20.0, 20.0),
            ModuleSpec(5, COMPRESSION, geometry, 20.0, 40.0),
        ]
        assert "module ids must be contiguous from 1" in station_violations(mods)

    def test_wrong_ends_named(self, geometry):
        mods = [
            ModuleSpec(1, LONGITUDINAL, geometry, 20.0, 0.0),
            ModuleSpec(2, COMPRESSION, geometry, 20.0, 20.0),
            ModuleSpec(3, LONGITUDINAL, geometry, 20.0, 40.0),
        ]
        bad = station_violations(mods)
        assert "first and last modules must be Compression" in bad

    def test_broken_alternation_named(self, geometry):
        mods = [
            ModuleSpec(1, COMPRESSION, geometry, 20.0, 0.0),
            ModuleSpec(2, COMPRESSION, geometry, 20.0, 20.0),
            ModuleSpec(3, COMPRESSION, geometry, 20.0, 40.0),
        ]
        bad = station_violations(mods)
        assert "module kinds must alternate Compression/Longitudinal" in bad

    def test_unknown_kind_and_bad_height_named(self, geometry):
        mods = [
            ModuleSpec(1, "Radial", geometry, -1.0, 0.0),
        ]
        bad = station_violations(mods)
        assert "module 1: unknown kind 'Radial'" in bad
        assert "module 1: height_h must be > 0" in bad

    def test_overlapping_origins_named(self, geometry):
        mods = [
            ModuleSpec(1, COMPRESSION, geometry, 20.0, 0.0),
            ModuleSpec(2, LONGITUDINAL, geometry, 20.0, 0.0),
            ModuleSpec(3, COMPRESSION, geometry, 20.0, 40.0),
        ]
        assert "z_origins must be strictly increasing with id" in station_violations(mods)

    def test_layout_constructor_rejects_invalid(self, geometry):
        mods = (
            ModuleSpec(1, LONGITUDINAL, geometry, 20.0, 0.0),
            ModuleSpec(2, COMPRESSION, geometry, 20.0, 20.0),
            ModuleSpec(3, LONGITUDINAL, geometry, 20.0, 40.0),
        )
        with pytest.raises(ValueError, match="invalid station"):
            StationLayout(mods)


class TestPlantParams:
    def test_contact_rate_slope_frozen(self, params):
        assert params.contact_rate_slope == pytest.approx(3.1947652040030805, rel=1e-12)

    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(P_max=0.0),
            dict(k_free=-1.0),
            dict(k_vent=0.0),
            dict(dt=0.0),
            dict(noise_sigma=-0.1),
        ],
    )
    def test_invalid_params_rejected(self, kwargs):
        with pytest.raises(ValueError):
            PlantParams(**kwargs)


class TestPressureRate:
    def test_hold_is_zero(self, params):
        assert pressure_rate(ChamberState(valve=HOLD), COMPRESSION, True, 0.7, params) == 0.0

    def test_deflate_is_minus_vent_rate(self, params):
        assert pressure_rate(ChamberState(valve=DEFLATE), COMPRESSION, False, 0.7, params) == -12.0

    def test_free_inflation_rate(self, params):
        assert pressure_rate(ChamberState(valve=INFLATE), COMPRESSION, False, 0.7, params) == 4.33

    def test_contact_rate_at_anchor(self, params):
        rate = pressure_rate(ChamberState(valve=INFLATE), COMPRESSION, True, 0.7, params)
        assert rate == pytest.approx(8.48, rel=1e-12)

    def test_contact_rate_above_anchor(self, params):
        rate = pressure_rate(ChamberState(valve=INFLATE), COMPRESSION, True, 0.8, params)
        assert rate == pytest.approx(9.863333333333335, rel=1e-12)

    @pytest.mark.parametrize("ror", [0.4, 0.3, 0.1])
    def test_at_or_below_knee_loads_nothing(self, params, ror):
        rate = pressure_rate(ChamberState(valve=INFLATE), COMPRESSION, True, ror, params)
        assert rate == 4.33

    def test_longitudinal_contact_does_not_load(self, params):
        rate = pressure_rate(ChamberState(valve=INFLATE), LONGITUDINAL, True, 0.7, params)
        assert rate == 4.33

    def test_unknown_valve_rejected(self, params):
        with pytest.raises(ValueError, match="valve"):
            pressure_rate(ChamberState(valve="Open"), COMPRESSION, False, 0.7, params)


class TestInflationOf:
    def test_compression_full_scale(self, geometry, material, params):
        assert inflation_of(15.0, COMPRESSION, geometry, material, params) == 17.25

    def test_compression_linear(self, geometry, material, params):
        assert inflation_of(7.5, COMPRESSION, geometry, material, params) == 8.625
        assert inflation_of(0.0, COMPRESSION, geometry, material, params) == 0.0

    def test_longitudinal_stroke(self, geometry, material, params):
        assert inflation_of(15.0, LONGITUDINAL, geometry, material, params, height_h=20.0) == 6.0
        got = inflation_of(5.0, LONGITUDINAL, geometry, material, params, height_h=20.0)
        assert got == pytest.approx(2.0, rel=1e-12)

    def test_pressure_out_of_range_rejected(self, geometry, material, params):
        with pytest.raises(ValueError, match="pressure"):
            inflation_of(-0.1, COMPRESSION, geometry, material, params)
        with pytest.raises(ValueError, match="pressure"):
            inflation_of(15.1, COMPRESSION, geometry, material, params)

    def test_unknown_kind_rejected(self, geometry, material, params):
        with pytest.raises(ValueError, match="kind"):
            inflation_of(1.0, "Radial", geometry, material, params)


class TestContactCheck:
    def test_reach_counts_the_boundary(self, geometry):
        mod = ModuleSpec(1, COMPRESSION, geometry, 20.0, 0.0)
        obj = ObjectState(ObjectSpec(17.5, 75.0), 0.0)
        # gap is exactly 25 - 17.5 = 7.5 mm
        assert contact_check(mod, ChamberState(inflation_d=7.5), obj)
        assert not contact_check(mod, ChamberState(inflation_d=7.499999), obj)

    def test_span_overlap_must_be_positive(self, geometry):
        mod = ModuleSpec(1, COMPRESSION, geometry, 20.0, 0.0)
        state = ChamberState(inflation_d=17.25)
        assert not contact_check(mod, state, ObjectState(ObjectSpec(17.5, 75.0), 20.0))
        assert contact_check(mod, state, ObjectState(ObjectSpec(17.5, 75.0), 19.999))
        # object top exactly at the module bottom: faces touch, no grip
        assert not contact_check(mod, state, ObjectState(ObjectSpec(17.5, 10.0), -10.0))

    def test_z_bottom_override_shifts_span(self, geometry):
        mod = ModuleSpec(3, COMPRESSION, geometry, 20.0, 40.0)
        state = ChamberState(inflation_d=17.25)
        obj = ObjectState(ObjectSpec(17.5, 10.0), 62.0)
        assert not contact_check(mod, state, obj)
        assert contact_check(mod, state, obj, z_bottom=45.0)

    def test_longitudinal_module_rejected(self, geometry):
        mod = ModuleSpec(2, LONGITUDINAL, geometry, 20.0, 20.0)
        with pytest.raises(ValueError, match="Compression"):
            contact_check(mod, ChamberState(), ObjectState(ObjectSpec(17.5, 75.0), 0.0))


class TestTimeToContact:
    @pytest.mark.parametrize(
        "ror,expected",
        [
            (0.7, 1.5061753188071092),
            (0.4, 3.012350637614218),
            (0.8, 1.0041168792047395),
        ],
    )
    def test_frozen_values(self, geometry, material, params, ror, expected):
        assert time_to_contact(ror, params, geometry, material) == pytest.approx(expected, rel=1e-12)

    def test_touching_object_contacts_immediately(self, geometry, material, params):
        assert time_to_contact(1.0, params, geometry, material) == 0.0

    def test_too_thin_object_rejected(self, geometry, material, params):
        with pytest.raises(ValueError, match="too thin"):
            time_to_contact(0.2, params, geometry, material)


class TestPlantIntegration:
    def test_free_inflation_trajectory(self, three_module_layout, material, params):
        plant = make_plant(three_module_layout, material, params)
        plant.set_valve(1, INFLATE)
        for _ in range(1500):
            plant.step()
        assert plant.pressure(1) == 6.49500000000018
        assert plant.inflation(1) == (6.49500000000018 / 15.0) * 17.25
        assert plant.time == pytest.approx(1.5)

    def test_hold_freezes_pressure_exactly(self, three_module_layout, material, params):
        plant = make_plant(three_module_layout, material, params)
        plant.set_valve(1, INFLATE)
        for _ in range(500):
            plant.step()
        frozen = plant.pressure(1)
        plant.set_valve(1, HOLD)
        for _ in range(100):
            plant.step()
        assert plant.pressure(1) == frozen

    def test_pressure_clamps_at_limits(self, three_module_layout, material, params):
        plant = make_plant(three_module_layout, material, params)
        plant.set_valve(1, INFLATE)
        for _ in range(4000):  # 4 s * 4.33 kPa/s well past P_max
            plant.step()
        assert plant.pressure(1) == 15.0
        assert plant.inflation(1) == 17.25
        plant.set_valve(1, DEFLATE)
        for _ in range(2000):
            plant.step()
        assert plant.pressure(1) == 0.0
        assert plant.inflation(1) == 0.0

    def test_contact_switches_rate_next_tick(self, three_module_layout, material, params):
        obj = ObjectState(ObjectSpec(17.5, 75.0), 0.0)
        plant = make_plant(three_module_layout, material, params, obj)
        plant.set_valve(1, INFLATE)
        for _ in range(2000):
            plant.step()
        # reference: loaded rate first applies the tick after reach crosses the gap
        P, contact = 0.0, False
        for _ in range(2000):
            rate = 8.48 if contact else 4.33
            P = min(P + rate * 1e-3, 15.0)
            contact = P / 15.0 * 17.25 >= 7.5
        assert plant.pressure(1) == P
        assert plant.object_state().supporters == frozenset({1})

    def test_commands_applied_through_step(self, three_module_layout, material, params):
        plant = make_plant(three_module_layout, material, params)
        step(plant, {1: INFLATE, 2: INFLATE})
        assert plant.valve(1) == INFLATE
        assert plant.pressure(2) == pytest.approx(0.00433)

    def test_stroke_lifts_modules_above_only(self, three_module_layout, material, params):
        plant = make_plant(three_module_layout, material, params)
        plant.set_valve(2, INFLATE)
        for _ in range(4000):
            plant.step()
        assert plant.inflation(2) == 6.0
        assert plant.module_span(1) == (0.0, 20.0)
        assert plant.module_span(2) == (20.0, 40.0)  # the stroking ring itself stays put
        assert plant.module_span(3) == (46.0, 66.0)

    def test_vented_stroke_returns_to_rest_exactly(self, three_module_layout, material, params):
        plant = make_plant(three_module_layout, material, params)
        plant.set_valve(2, INFLATE)
        for _ in range(1000):
            plant.step()
        plant.set_valve(2, DEFLATE)
        for _ in range(500):
            plant.step()
        assert plant.pressure(2) == 0.0
        assert plant.module_span(3) == (40.0, 60.0)

    def test_object_rides_its_supporter(self, three_module_layout, material, params):
        obj = ObjectState(ObjectSpec(17.5, 30.0), 45.0)
        plant = make_plant(three_module_layout, material, params, obj)
        grip(plant, 3)
        assert plant.object_state().supporters == frozenset({3})
        plant.set_valve(2, INFLATE)
        events = []
        for _ in range(1000):
            events += plant.step()
        assert plant.object.z == pytest.approx(45.0 + plant.inflation(2), abs=1e-9)
        assert events == []  # grip is carried, never re-broken
        assert plant.object_state().supporters == frozenset({3})

    def test_release_drops_onto_inflated_ring_below(self, three_module_layout, material, params):
        obj = ObjectState(ObjectSpec(17.5, 50.0), 25.0)
        plant = make_plant(three_module_layout, material, params, obj)
        plant.set_valve(1, INFLATE)  # reaches full d but never overlaps the object
        plant.set_valve(3, INFLATE)
        for _ in range(4000):
            plant.step()
        assert plant.object_state().supporters == frozenset({3})
        plant.set_valve(3, DEFLATE)
        drops = []
        for _ in range(2000):
            drops += [text for _, text in plant.step() if text.startswith("drop")]
        assert drops == ["drop to_z=20.000000"]
        assert plant.object.z == 20.0

    def test_release_with_no_ledge_drops_to_base(self, three_module_layout, material, params):
        obj = ObjectState(ObjectSpec(17.5, 30.0), 45.0)
        plant = make_plant(three_module_layout, material, params, obj)
        grip(plant, 3)
        plant.set_valve(3, DEFLATE)
        drops = []
        for _ in range(2000):
            drops += [text for _, text in plant.step() if text.startswith("drop")]
        assert drops == ["drop to_z=0.000000"]
        assert plant.object.z == 0.0

    def test_conflicting_supporters_follow_the_lowest(self, five_module_layout, material, params):
        obj = ObjectState(ObjectSpec(17.5, 75.0), 0.0)
        plant = make_plant(five_module_layout, material, params, obj)
        grip(plant, 1)
        grip(plant, 3)
        assert sorted(plant.object_state().supporters) == [1, 3]
        plant.set_valve(2, INFLATE)
        events = []
        for _ in range(100):
            events += plant.step()
        assert {text for _, text in events} == {"conflict supporters=1+3 following=1"}
        assert len(events) == 100  # flagged every moving tick
        assert plant.object.z == 0.0  # module 1 sits on the base and never moves

    def test_set_valve_rejects_bad_input(self, three_module_layout, material, params):
        plant = make_plant(three_module_layout, material, params)
        with pytest.raises(ValueError, match="valve"):
            plant.set_valve(1, "Open")
        with pytest.raises(ValueError, match="module"):
            plant.set_valve(0, HOLD)
        with pytest.raises(ValueError, match="module"):
            plant.set_valve(99, HOLD)

    def test_chambers_snapshot_is_detached(self, three_module_layout, material, params):
        plant = make_plant(three_module_layout, material, params)
        snap = plant.chambers()
        snap[1].pressure_P = 99.0
        assert plant.pressure(1) == 0.0


class TestPlantProperties:
    @settings(max_examples=50, deadline=None)
    @given(
        commands=st.lists(
            st.tuples(st.integers(1, 3), st.sampled_from([INFLATE, HOLD, DEFLATE])),
            max_size=30,
        )
    )
    def test_bounds_and_support_soundness(self, commands):
        g = RingGeometry(**NOMINAL)
        mat = SurrogateMaterial(100.0, 0.45, calibrate_kappa(g, 100.0, 0.69, 15.0))
        params = PlantParams()
        layout = build_station(g, 3, 20.0, 20.0)
        obj = ObjectState(ObjectSpec(17.5, 75.0), 0.0)
        plant = Plant(layout, obj, params, mat)

        for mid, mode in commands:
            plant.set_valve(mid, mode)
            for _ in range(25):
                plant.step()
                state = plant.object_state()
                for m in layout.modules:
                    P = plant.pressure(m.id)
                    assert 0.0 <= P <= params.P_max
                    full = 17.25 if m.kind == COMPRESSION else 6.0
                    assert plant.inflation(m.id) == (P / params.P_max) * full
                for sid in state.supporters:
                    mod = layout.module(sid)
                    assert mod.kind == COMPRESSION
                    lo, hi = plant.module_span(sid)
                    assert plant.inflation(sid) >= 25.0 - 17.5
                    assert state.z < hi and state.z + 75.0 > lo
                assert state.z >= -1e-9
