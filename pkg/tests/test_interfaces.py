import numpy as np
import pytest

from gridfence.dcsens import DcSensitivity, effective_susceptance
from gridfence.errors import DisconnectedNetworkError, NetworkError
from gridfence.interfaces import (
    InterfaceSpec,
    TieLineEdit,
    TwoBusJoint,
    apply_interface,
    apply_tie_edits,
    bipartite_bound,
    check_series_equality_condition,
    design_bipartite,
)
from gridfence.netmodel import build_network
from gridfence.randomnets import random_two_bus_joint


def two_triangles():
    """Two triangles sharing the non-adjacent pair {0, 1}; interior 2 and 3."""
    net = build_network(
        4, [(0, 2, 1.0), (2, 1, 1.0), (0, 3, 1.0), (3, 1, 1.0)]
    )
    return TwoBusJoint(net, {0, 1, 2}, {0, 1, 3}, 0, 1)


def abs_lodf_map(net, tripped_ids, monitored_ids):
    """|K| for every ordered non-bridge pair, keyed by (tripped, monitored)."""
    eng = DcSensitivity(net)
    K, bridges = eng.lodf_matrix()
    out = {}
    for t in tripped_ids:
        kt = net.line_index(t)
        if bridges[kt]:
            continue
        for m in monitored_ids:
            if m == t:
                continue
            out[(t, m)] = abs(K[net.line_index(m), kt])
    return out


def cross_pair_sets(joint):
    g1, g2 = sorted(joint.g1_line_ids), sorted(joint.g2_line_ids)
    return [(g1, g2), (g2, g1)]


class TestJointValidation:
    def test_valid_joint(self):
        joint = two_triangles()
        assert joint.g1_line_ids == {0, 1}
        assert joint.g2_line_ids == {2, 3}

    def test_adjacent_shared_buses_rejected(self):
        net = build_network(3, [(0, 1, 1.0), (0, 2, 1.0), (2, 1, 1.0)])
        with pytest.raises(NetworkError):
            TwoBusJoint(net, {0, 1}, {0, 1, 2}, 0, 1)

    def test_crossing_line_rejected(self):
        net = two_triangles().net.add_line(2, 3, 1.0)
        with pytest.raises(NetworkError):
            TwoBusJoint(net, {0, 1, 2}, {0, 1, 3}, 0, 1)

    def test_wrong_overlap_rejected(self):
        net = two_triangles().net
        with pytest.raises(NetworkError):
            TwoBusJoint(net, {0, 1, 2, 3}, {0, 1, 3}, 0, 1)

    def test_disconnected_subgrid_rejected(self):
        net = build_network(
            5, [(0, 2, 1.0), (2, 1, 1.0), (0, 3, 1.0), (3, 1, 1.0)]
        )
        with pytest.raises(DisconnectedNetworkError):
            TwoBusJoint(net, {0, 1, 2, 4}, {0, 1, 3}, 0, 1)


class TestApplyInterface:
    def test_series_bookkeeping(self):
        joint = two_triangles()
        mod = apply_interface(joint, InterfaceSpec.series(1.0, 1.0))
        assert mod.n_buses == joint.net.n_buses + 2
        assert mod.n_lines == joint.net.n_lines + 2
        assert mod.is_connected

    def test_series_bridge_structure(self):
        # The two new lines form a size-2 cut: neither is a bridge of the
        # whole network (no single point of failure), but both are bridges
        # of the far-side sub-grid taken alone, where they hang as pendants.
        joint = two_triangles()
        mod = apply_interface(joint, InterfaceSpec.series(1.0, 2.0))
        new_ids = set(mod.line_ids) - set(joint.net.line_ids)
        assert mod.bridges == joint.net.bridges
        far_buses = (joint.g2_buses - {joint.s, joint.t}) | {
            joint.s,
            joint.t,
            joint.net.n_buses,
            joint.net.n_buses + 1,
        }
        far_side, _ = mod.induced_subnetwork(far_buses)
        far_side = far_side.remove_lines(
            set(far_side.line_ids) - (joint.g2_line_ids | new_ids)
        )
        assert new_ids <= far_side.bridges

    def test_parallel_adds_direct_susceptance(self):
        joint = two_triangles()
        before = effective_susceptance(joint.net, joint.s, joint.t)
        mod = apply_interface(joint, InterfaceSpec.parallel(2.5))
        after = effective_susceptance(mod, joint.s, joint.t)
        assert after == pytest.approx(before + 2.5, abs=1e-9)

    def test_bipartite_no_new_bridges(self):
        joint = two_triangles()
        mod = apply_interface(
            joint, InterfaceSpec.complete_bipartite(1.0, 2.0, 3.0, 4.0)
        )
        assert mod.n_buses == joint.net.n_buses + 2
        assert mod.n_lines == joint.net.n_lines + 4
        assert mod.bridges <= joint.net.bridges

    def test_rank_one_mesh_kills_cross_factors(self):
        joint = two_triangles()
        mod = apply_interface(
            joint, InterfaceSpec.complete_bipartite(1.0, 1.0, 1.0, 1.0)
        )
        for tripped_ids, monitored_ids in cross_pair_sets(joint):
            for value in abs_lodf_map(mod, tripped_ids, monitored_ids).values():
                assert value <= 1e-8


class TestBipartiteBound:
    def test_rank_one_gives_zero(self):
        spec = InterfaceSpec.complete_bipartite(1.0, 1.0, 1.0, 1.0)
        assert bipartite_bound(spec) == 0.0

    def test_direct_evaluation(self):
        spec = InterfaceSpec.complete_bipartite(2.0, 1.0, 1.0, 1.0)
        assert bipartite_bound(spec) == pytest.approx(1 / 6, abs=1e-15)

    def test_wrong_kind_rejected(self):
        with pytest.raises(NetworkError):
            bipartite_bound(InterfaceSpec.parallel(1.0))

    @pytest.mark.parametrize("seed", range(10))
    def test_bound_dominates_measured_cross_factors(self, seed):
        # The bound is directional: outages on the s,t side obey the mesh's
        # own bound, outages on the copies' side obey the transposed one.
        rng = np.random.default_rng(900 + seed)
        joint = random_two_bus_joint(rng)
        spec = InterfaceSpec.complete_bipartite(
            *(float(rng.uniform(0.1, 10.0)) for _ in range(4))
        )
        mod = apply_interface(joint, spec)
        bounds = (bipartite_bound(spec), bipartite_bound(spec.transposed()))
        for bound, (tripped_ids, monitored_ids) in zip(
            bounds, cross_pair_sets(joint)
        ):
            for value in abs_lodf_map(mod, tripped_ids, monitored_ids).values():
                assert value <= bound + 1e-12


class TestDesignBipartite:
    def test_worked_example(self):
        spec = design_bipartite(2.0, 1.0, 0.5)
        assert spec.b_ss == pytest.approx(4.0)
        assert spec.b_st == pytest.approx(3.0)
        assert spec.b_ts == pytest.approx(2 / 3)

    def test_symmetric_case_collapses(self):
        b = 3.0
        spec = design_bipartite(b, b, b / 2)
        assert spec.b_ss == pytest.approx(2 * b)
        assert spec.b_st == pytest.approx(b)
        assert spec.b_ts == pytest.approx(b)

    def test_design_is_rank_one(self):
        spec = design_bipartite(5.0, 2.0, 0.7)
        assert spec.b_ss * spec.b_tt == pytest.approx(spec.b_st * spec.b_ts)

    def test_inside_window_rejected(self):
        with pytest.raises(NetworkError):
            design_bipartite(2.0, 1.0, 1.5)

    @pytest.mark.parametrize("seed", range(8))
    def test_applied_design_preserves_within_and_kills_cross(self, seed):
        rng = np.random.default_rng(1000 + seed)
        joint = random_two_bus_joint(rng)
        b1, b2 = joint.effective_susceptances()
        b_tt = 0.5 * min(b1, b2) if rng.random() < 0.5 else 2.0 * max(b1, b2)
        spec = design_bipartite(b1, b2, b_tt)
        mod = apply_interface(joint, spec)
        for tripped_ids, monitored_ids in cross_pair_sets(joint):
            for value in abs_lodf_map(mod, tripped_ids, monitored_ids).values():
                assert value <= 1e-8
        for side_ids in (sorted(joint.g1_line_ids), sorted(joint.g2_line_ids)):
            original = abs_lodf_map(joint.net, side_ids, side_ids)
            modified = abs_lodf_map(mod, side_ids, side_ids)
            for pair, value in original.items():
                assert modified[pair] == pytest.approx(value, abs=1e-8)


class TestTieEdits:
    def four_tie_net(self):
        # Two squares joined by four tie lines (ids 8..11).
        lines = [
            (0, 1, 1.0), (1, 2, 1.0), (2, 3, 1.0), (3, 0, 1.0),
            (4, 5, 1.0), (5, 6, 1.0), (6, 7, 1.0), (7, 4, 1.0),
            (0, 4, 1.0), (1, 5, 1.0), (2, 6, 1.0), (3, 7, 1.0),
        ]
        return build_network(8, lines)

    def test_remove_two_keep_two(self):
        net = apply_tie_edits(self.four_tie_net(), TieLineEdit(remove=frozenset({10, 11})))
        assert net.is_connected
        assert net.n_lines == 10

    def test_remove_all_ties_rejected(self):
        with pytest.raises(DisconnectedNetworkError):
            apply_tie_edits(
                self.four_tie_net(), TieLineEdit(remove=frozenset({8, 9, 10, 11}))
            )

    def test_add_after_remove(self):
        edit = TieLineEdit(remove=frozenset({8, 9, 10, 11}), add=((0, 4, 2.0),))
        net = apply_tie_edits(self.four_tie_net(), edit)
        assert net.is_connected

    def test_unknown_line_rejected(self):
        with pytest.raises(NetworkError):
            apply_tie_edits(self.four_tie_net(), TieLineEdit(remove=frozenset({99})))


class TestSeriesEqualityCondition:
    def test_path_subgrid_always_true(self):
        # First sub-grid is the path s-2-t, second the path s-3-t.
        joint = two_triangles()
        assert check_series_equality_condition(joint, 0)
        assert check_series_equality_condition(joint, 1)

    def test_cycle_subgrid_false(self):
        # First sub-grid is a 4-cycle through s, t: one outage leaves a path.
        lines = [
            (0, 2, 1.0), (2, 1, 1.0), (0, 4, 1.0), (4, 1, 1.0),
            (0, 3, 1.0), (3, 1, 1.0),
        ]
        net = build_network(5, lines)
        joint = TwoBusJoint(net, {0, 1, 2, 4}, {0, 1, 3}, 0, 1)
        assert not check_series_equality_condition(joint, 0)

    def test_wrong_side_rejected(self):
        with pytest.raises(NetworkError):
            check_series_equality_condition(two_triangles(), 2)


class TestSeriesTheorem:
    @pytest.mark.parametrize("seed", range(10))
    def test_never_increases_and_equality_iff_no_path(self, seed):
        rng = np.random.default_rng(1100 + seed)
        joint = random_two_bus_joint(rng)
        spec = InterfaceSpec.series(
            float(rng.uniform(0.1, 10.0)), float(rng.uniform(0.1, 10.0))
        )
        mod = apply_interface(joint, spec)
        for flipped, (tripped_ids, monitored_ids) in zip(
            (False, True), cross_pair_sets(joint)
        ):
            side_joint = joint.swapped() if flipped else joint
            original = abs_lodf_map(joint.net, tripped_ids, monitored_ids)
            modified = abs_lodf_map(mod, tripped_ids, monitored_ids)
            assert set(original) == set(modified)
            for (t, m), value in original.items():
                assert modified[(t, m)] <= value + 1e-12
                severed = check_series_equality_condition(side_joint, t)
                if severed:
                    assert abs(modified[(t, m)] - value) < 1e-9
                elif value > 1e-9:
                    assert modified[(t, m)] < value


class TestParallelTheorem:
    @pytest.mark.parametrize("seed", range(10))
    def test_strict_decrease_and_monotonicity(self, seed):
        rng = np.random.default_rng(1200 + seed)
        joint = random_two_bus_joint(rng)
        b0 = float(rng.uniform(0.5, 5.0))
        levels = [0.5 * b0, b0, 2.0 * b0]
        by_level = []
        for b in levels:
            mod = apply_interface(joint, InterfaceSpec.parallel(b))
            merged = {}
            for tripped_ids, monitored_ids in cross_pair_sets(joint):
                merged.update(abs_lodf_map(mod, tripped_ids, monitored_ids))
            by_level.append(merged)
        original = {}
        for tripped_ids, monitored_ids in cross_pair_sets(joint):
            original.update(abs_lodf_map(joint.net, tripped_ids, monitored_ids))
        for pair, value in original.items():
            if value > 1e-9:
                assert by_level[1][pair] < value
        for weaker, stronger in zip(by_level, by_level[1:]):
            for pair in original:
                assert stronger[pair] <= weaker[pair] + 1e-12
