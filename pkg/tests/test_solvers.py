"""Solver variants: direction choice, corrections, traces, exits."""

import numpy as np
import pytest

from polyfw.core import ActiveIterate, Atom, StepKind
from polyfw.objectives import QuadraticObjective
from polyfw.oracles import Cube, Simplex, VertexList, lmo
from polyfw.solvers import (
    SolverConfig,
    Variant,
    afw_choose_direction,
    away_atom,
    fcfw_correction,
    mnp_correction,
    pfw_step,
    solve,
)

import oracles as ref

ACTIVE_VARIANTS = (Variant.AFW, Variant.PFW, Variant.FCFW, Variant.MNP)


def h_sequence(trace, obj, spec, f_star):
    """Suboptimality at each visited iterate, using the pre-step gap pairing."""
    f0 = trace.config_echo["f0"]
    hs = [f0 - f_star]
    hs.extend(r.f_value - f_star for r in trace.records)
    return hs


def test_away_atom_picks_largest_gradient_dot():
    a = Atom(np.array([0.0, 0.0]))
    b = Atom(np.array([1.0, 0.0]))
    it = ActiveIterate.from_weights({a: 0.8, b: 0.2})
    vid, gap = away_atom(it, np.array([1.0, 0.0]))
    assert vid == b.id
    # away gap <-grad, x - v> with x = (0.2, 0), v = b
    assert gap == pytest.approx(0.8)


def test_away_atom_tie_breaks_on_weight():
    a = Atom(np.array([1.0, 0.0]))
    b = Atom(np.array([0.0, 1.0]))
    grad = np.array([1.0, 1.0])
    it = ActiveIterate.from_weights({a: 0.3, b: 0.7})
    vid, gap = away_atom(it, grad)
    assert vid == b.id
    assert gap == pytest.approx(0.0)


def test_afw_single_atom_forces_fw_branch():
    v1 = Atom(np.array([0.0, 0.0]))
    it = ActiveIterate.from_atom(v1)
    s = Atom(np.array([1.0, 1.0]))
    kind, d, gmax, away_id = afw_choose_direction(it, np.array([-1.0, -1.0]), s)
    assert kind is StepKind.FW
    assert np.allclose(d, [1.0, 1.0])
    assert gmax == 1.0


def test_afw_away_branch_gamma_max():
    # x = (0.2, 0); away atom b has weight 0.2, so gamma_max = 0.2/0.8
    a = Atom(np.array([0.0, 0.0]))
    b = Atom(np.array([1.0, 0.0]))
    it = ActiveIterate.from_weights({a: 0.8, b: 0.2})
    grad = np.array([1.0, 0.0])
    kind, d, gmax, away_id = afw_choose_direction(it, grad, a)
    assert kind is not StepKind.FW
    assert away_id == b.id
    assert gmax == pytest.approx(0.25)
    assert np.allclose(d, it.x - b.point)


def test_afw_direction_covers_half_pairwise_gap():
    rng = np.random.default_rng(401)
    spec = Simplex(5)
    for _ in range(50):
        w = rng.dirichlet(np.ones(3))
        idx = rng.choice(5, size=3, replace=False)
        atoms = {}
        for i, j in enumerate(idx):
            p = np.zeros(5)
            p[j] = 1.0
            atoms[Atom(p)] = float(w[i])
        it = ActiveIterate.from_weights(atoms)
        grad = rng.standard_normal(5)
        s = lmo(spec, grad)
        vid, _ = away_atom(it, grad)
        v = it.atom_point(vid)
        g_pfw = float(-grad @ (s.point - v))
        kind, d, gmax, _ = afw_choose_direction(it, grad, s)
        assert float(-grad @ d) >= 0.5 * g_pfw - 1e-12


def test_pfw_step_uses_away_weight_as_cap():
    a = Atom(np.array([0.0, 0.0]))
    b = Atom(np.array([1.0, 0.0]))
    it = ActiveIterate.from_weights({a: 0.7, b: 0.3})
    grad = np.array([1.0, 0.0])
    s = Atom(np.array([-1.0, 0.0]))
    d, gmax, vid = pfw_step(it, grad, s)
    assert gmax == pytest.approx(0.3)
    assert vid == b.id
    assert np.allclose(d, s.point - b.point)


def test_interior_optimum_on_simplex():
    obj = QuadraticObjective.distance_to(np.array([0.25, 0.75]))
    trace = solve(obj, Simplex(2), SolverConfig(Variant.AFW, epsilon=1e-10, max_iter=100))
    assert trace.config_echo["exit_status"] == "converged"
    assert np.linalg.norm(trace.final_iterate.x - [0.25, 0.75]) <= 1e-10


def test_variants_agree_on_interior_optimum():
    obj = QuadraticObjective.distance_to(np.array([0.25, 0.75]))
    finals = []
    for variant in ACTIVE_VARIANTS:
        trace = solve(obj, Simplex(2), SolverConfig(variant, epsilon=1e-10, max_iter=200))
        assert trace.config_echo["exit_status"] == "converged"
        finals.append(trace.final_iterate.x)
    for x in finals[1:]:
        assert np.linalg.norm(x - finals[0]) <= 1e-8


def test_cube_vertex_optimum_ends_with_fw_step():
    obj = QuadraticObjective.distance_to(np.array([2.0, 2.0]))
    trace = solve(obj, Cube(2), SolverConfig(Variant.AFW, epsilon=1e-10, max_iter=50))
    assert np.allclose(trace.final_iterate.x, [1.0, 1.0])
    last = trace.records[-1]
    assert last.kind is StepKind.FW
    assert trace.config_echo["final_fw_gap"] <= 1e-10


def test_certificate_gap_dominates_suboptimality():
    target = np.array([0.25, 0.75])
    obj = QuadraticObjective.distance_to(target)
    f_star = 0.0
    for variant in (Variant.FW,) + ACTIVE_VARIANTS:
        trace = solve(obj, Simplex(2), SolverConfig(variant, epsilon=1e-9, max_iter=300))
        hs = h_sequence(trace, obj, Simplex(2), f_star)
        for t, rec in enumerate(trace.records):
            assert rec.fw_gap >= hs[t] - 1e-9


def test_monotone_objective_every_variant():
    rng = np.random.default_rng(402)
    A = rng.standard_normal((12, 8))
    obj = QuadraticObjective.least_squares(A, rng.standard_normal(12))
    for variant in (Variant.FW,) + ACTIVE_VARIANTS:
        trace = solve(obj, Simplex(8), SolverConfig(variant, epsilon=1e-9, max_iter=400))
        f_prev = trace.config_echo["f0"]
        for rec in trace.records:
            assert rec.f_value <= f_prev + 1e-12
            f_prev = rec.f_value
        trace.validate()


def test_fcfw_trace_has_no_drop_or_swap():
    rng = np.random.default_rng(403)
    A = rng.standard_normal((10, 6))
    obj = QuadraticObjective.least_squares(A, rng.standard_normal(10))
    trace = solve(obj, Simplex(6), SolverConfig(Variant.FCFW, epsilon=1e-9, max_iter=200))
    kinds = {r.kind for r in trace.records}
    assert StepKind.DROP not in kinds
    assert StepKind.SWAP not in kinds
    assert trace.config_echo["exit_status"] == "converged"


def test_fcfw_away_gap_small_each_outer_iteration():
    rng = np.random.default_rng(404)
    A = rng.standard_normal((9, 5))
    obj = QuadraticObjective.least_squares(A, rng.standard_normal(9))
    cfg = SolverConfig(Variant.FCFW, epsilon=1e-9, max_iter=200, correction_epsilon=1e-10)
    trace = solve(obj, Simplex(5), cfg)
    for rec in trace.records:
        assert rec.away_gap <= 1e-10 + 1e-12


def test_fcfw_correction_segment_is_exact():
    obj = QuadraticObjective.distance_to(np.array([0.25, 0.75]))
    e1 = Atom(np.array([1.0, 0.0]))
    e2 = Atom(np.array([0.0, 1.0]))
    it = ActiveIterate.from_atom(e1)
    res = fcfw_correction(obj, it, {e1.id: e1.point}, e2, 1e-12)
    assert np.linalg.norm(res.iterate.x - [0.25, 0.75]) <= 1e-10
    assert res.post_away_gap <= 1e-12


def test_fcfw_correction_noop_when_optimal():
    obj = QuadraticObjective.distance_to(np.array([0.25, 0.75]))
    e1 = Atom(np.array([1.0, 0.0]))
    e2 = Atom(np.array([0.0, 1.0]))
    it = ActiveIterate.from_weights({e1: 0.25, e2: 0.75})
    res = fcfw_correction(obj, it, {e1.id: e1.point, e2.id: e2.point}, e1, 1e-10)
    assert res.inner_steps == 0
    assert np.allclose(res.iterate.x, [0.25, 0.75])


def test_mnp_correction_interior_projection():
    f = QuadraticObjective.distance_to(np.array([0.3, 5.0]))
    a = Atom(np.array([0.0, 0.0]))
    b = Atom(np.array([1.0, 0.0]))
    it = ActiveIterate.from_weights({a: 0.5, b: 0.5})
    res = mnp_correction(f, it, a)
    assert np.allclose(res.iterate.x, [0.3, 0.0], atol=1e-12)


def test_mnp_correction_clipped_projection_drops_atom():
    f = QuadraticObjective.distance_to(np.array([2.0, 1.0]))
    a = Atom(np.array([0.0, 0.0]))
    b = Atom(np.array([1.0, 0.0]))
    it = ActiveIterate.from_weights({a: 0.5, b: 0.5})
    res = mnp_correction(f, it, b)
    assert np.allclose(res.iterate.x, [1.0, 0.0], atol=1e-12)
    assert set(res.iterate.weights) == {b.id}


def test_mnp_triangle_matches_face_inspection():
    tri = [np.array([-1.0, 1.0]), np.array([1.0, 1.0]), np.array([0.0, 2.0])]
    spec = VertexList([p.tolist() for p in tri])
    obj = QuadraticObjective.distance_to(np.zeros(2))
    trace = solve(obj, spec, SolverConfig(Variant.MNP, epsilon=1e-12, max_iter=50),
                  x0=Atom(np.array([0.0, 2.0])))
    assert np.linalg.norm(trace.final_iterate.x - [0.0, 1.0]) <= 1e-10
    expect, _ = ref.min_norm_point_by_faces(tri)
    assert np.linalg.norm(trace.final_iterate.x - expect) <= 1e-8


def test_mnp_away_gap_zero_after_each_cycle():
    rng = np.random.default_rng(405)
    A = rng.standard_normal((8, 5))
    obj = QuadraticObjective.least_squares(A, rng.standard_normal(8))
    trace = solve(obj, Simplex(5), SolverConfig(Variant.MNP, epsilon=1e-9, max_iter=100))
    for rec in trace.records:
        assert rec.away_gap <= 1e-9


def test_afw_drop_prefix_bound():
    rng = np.random.default_rng(406)
    for seed in range(5):
        A = rng.standard_normal((14, 9))
        obj = QuadraticObjective.least_squares(A, rng.standard_normal(14))
        for variant in (Variant.AFW, Variant.MNP):
            trace = solve(obj, Simplex(9), SolverConfig(variant, epsilon=1e-9, max_iter=400))
            kinds = [r.kind.value for r in trace.records]
            init = trace.config_echo["init_active_size"]
            assert ref.drop_prefix_ok(kinds, initial_active_size=init)


def test_max_iter_exit_records_final_gap():
    rng = np.random.default_rng(407)
    A = rng.standard_normal((20, 15))
    obj = QuadraticObjective.least_squares(A, rng.standard_normal(20))
    trace = solve(obj, Simplex(15), SolverConfig(Variant.FW, epsilon=1e-14, max_iter=5))
    assert trace.config_echo["exit_status"] == "max_iter"
    assert len(trace.records) == 5
    assert trace.config_echo["final_fw_gap"] > 0.0


def test_x0_forms_accepted():
    obj = QuadraticObjective.distance_to(np.array([0.25, 0.75]))
    spec = Simplex(2)
    cfg = SolverConfig(Variant.AFW, epsilon=1e-10, max_iter=100)
    e1 = Atom(np.array([1.0, 0.0]))
    e2 = Atom(np.array([0.0, 1.0]))
    for x0 in (None, e1, ActiveIterate.from_weights({e1: 0.5, e2: 0.5})):
        trace = solve(obj, spec, cfg, x0=x0)
        assert np.linalg.norm(trace.final_iterate.x - [0.25, 0.75]) <= 1e-10


def test_default_init_deterministic():
    rng = np.random.default_rng(408)
    A = rng.standard_normal((10, 6))
    obj = QuadraticObjective.least_squares(A, rng.standard_normal(10))
    cfg = SolverConfig(Variant.PFW, epsilon=1e-9, max_iter=200, rng_seed=11)
    a = solve(obj, Simplex(6), cfg)
    b = solve(obj, Simplex(6), cfg)
    assert len(a.records) == len(b.records)
    for ra, rb in zip(a.records, b.records):
        assert ra.f_value == rb.f_value
        assert ra.fw_gap == rb.fw_gap


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(Variant.AFW, epsilon=0.0)
    with pytest.raises(ValueError):
        SolverConfig(Variant.AFW, max_iter=0)
    with pytest.raises(ValueError):
        SolverConfig(Variant.FCFW, epsilon=1e-8, correction_epsilon=1e-6)
