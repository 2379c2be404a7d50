import numpy as np
import pytest

from qarelay.linkbudget import DomainError, capacity_bps
from qarelay.optmodel import (
    NetworkInstance,
    ObjectiveKind,
    ProblemSpec,
    SolveStatus,
    build_gated_program,
    build_instance,
    build_program,
    check_solution,
    infeasible_solution,
    make_solution,
)
from qarelay.quality import f_q


def small_instance(**kw):
    return NetworkInstance(a_srr_max=[[2.0, 1.0], [0.5, 2.5]], a_rdr_max=[1.0, 2.0], beams_source=2, beams_relay=2, **kw)


def test_build_instance_uses_link_budget():
    inst = build_instance([[300, 0]], [[100, 0], [0, 100]], (0, 0))
    assert inst.a_srr_max[0, 0] == pytest.approx(capacity_bps(200) / 1e9)
    assert inst.a_srr_max[0, 1] == pytest.approx(capacity_bps(np.hypot(300, 100)) / 1e9)
    assert np.allclose(inst.a_rdr_max, capacity_bps(100) / 1e9)


@pytest.mark.parametrize("bad", [
    dict(sources=[[0, 0]], relays=[[0, 0]]),
    dict(sources=[[1, 1]], relays=[[0, 0]]),
    dict(sources=[[1, np.nan]], relays=[[5, 5]]),
    dict(sources=[1, 2], relays=[[5, 5]]),
])
def test_build_instance_rejects_bad_geometry(bad):
    with pytest.raises(DomainError):
        build_instance(bad["sources"], bad["relays"], (0, 0))


def test_instance_validation():
    with pytest.raises(DomainError):
        NetworkInstance([[1.0, 2.0]], [1.0], 1, 1)
    with pytest.raises(DomainError):
        NetworkInstance([[-1.0]], [1.0], 1, 1)
    with pytest.raises(DomainError):
        NetworkInstance([[1.0]], [1.0], 0, 1)
    with pytest.raises(DomainError):
        NetworkInstance([[1.0]], [1.0], [1, 1], 1)


def test_spec_lower_bounds_and_objective():
    spec = ProblemSpec(small_instance(), lower_bounds_gbps=0.5, objective_kind="SRM")
    assert np.array_equal(spec.lower_bounds_gbps, [0.5, 0.5])
    assert spec.objective_kind is ObjectiveKind.SRM
    with pytest.raises(DomainError):
        ProblemSpec(small_instance(), lower_bounds_gbps=[-1, 0])
    with pytest.raises(ValueError):
        ObjectiveKind.parse("maxmin")


def test_jrsr_forces_single_beams():
    spec = ProblemSpec(small_instance(), objective_kind="jrsr")
    assert np.array_equal(spec.beams_source, [1, 1])
    assert np.array_equal(spec.beams_relay, [1, 1])


def test_rate_caps():
    inst = NetworkInstance([[5.0, 1.0]], [9.0, 9.0], 1, 1)
    assert np.array_equal(ProblemSpec(inst).rate_caps, [[3.0, 1.0]])


def test_program_rows():
    prog = build_program(ProblemSpec(small_instance(), lower_bounds_gbps=0.3))
    n = 4
    assert prog.G.shape == (2 + 2 + 2 + 4 + 2, 2 * n)
    assert prog.coupling_rows.sum() == 4
    # a feasible point satisfies every row
    a = np.array([0.5, 1.0, 0.5, 1.0])
    z = np.concatenate([a, np.ones(n)])
    assert np.all(prog.G @ z <= prog.h + 1e-12)
    # switching a link off while it carries rate violates its coupling row
    z[n] = 0
    assert np.any(prog.G @ z > prog.h + 1e-12)


def test_objective_values():
    prog = build_program(ProblemSpec(small_instance()))
    a = np.array([0.5, 1.0, 0.5, 1.0])
    assert prog.objective.value(a) == pytest.approx(2 * f_q(0.25) + 2 * f_q(0.5), abs=1e-14)
    srm = build_program(ProblemSpec(small_instance(), objective_kind="srm"))
    assert srm.objective.value(a) == pytest.approx(1.5)
    assert srm.objective.is_linear and not prog.objective.is_linear


def test_gated_program_masks_unused_links():
    spec = ProblemSpec(small_instance(), lower_bounds_gbps=0.2)
    g = build_gated_program(spec, [1, 0, 0, 1])
    a = np.array([0.7, 9.0, 9.0, 1.5])  # rate on switched-off links is ignored
    assert np.all(g.G @ a <= g.h + 1e-12)
    assert g.objective.value(a) == pytest.approx(f_q(0.35) + f_q(0.75))


def test_make_solution_bookkeeping():
    spec = ProblemSpec(small_instance())
    sol = make_solution(spec, [1, 1, 1, 1], [0.5, 1.0, 0.5, 1.0], nodes=3)
    assert sol.status is SolveStatus.OPTIMAL
    assert np.allclose(sol.per_source_rate, [1.5, 1.5])
    assert sol.quality == pytest.approx(2 * f_q(0.25) + 2 * f_q(0.5))
    assert sol.stream_quality == pytest.approx(2 * f_q(0.75))
    assert sol.sum_rate == 3.0 and sol.nodes == 3
    assert check_solution(spec, sol) == []


def test_check_solution_reports_each_violation():
    spec = ProblemSpec(NetworkInstance([[2.0, 2.0]], [1.0, 1.0], 1, 1), lower_bounds_gbps=2.5)
    sol = make_solution(spec, [1, 1], [1.5, 0.5])
    problems = " ".join(check_solution(spec, sol))
    for tag in ("relay_capacity[0]", "source_beams[0]", "lower_bound[0]"):
        assert tag in problems
    sol = make_solution(spec, [0, 1], [0.5, 0.5])
    assert "coupling[0,0]" in " ".join(check_solution(spec, sol))


def test_infeasible_solution():
    sol = infeasible_solution(ProblemSpec(small_instance()), nodes=7)
    assert sol.status is SolveStatus.INFEASIBLE and not sol.is_optimal
    assert np.isnan(sol.objective_value) and sol.nodes == 7
