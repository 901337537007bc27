import math

import numpy as np
import pytest

from sobonet.complexity import (
    ArchSpec,
    bump_grid,
    dudley_bound,
    gen_bound,
    inequality_bound,
    inequality_max_m,
    log_covering_number,
    rademacher_bound,
    shatter_search,
    vc_pdim_upper,
    warren_count,
)
from sobonet.errors import InvalidInputError, PreconditionError
from sobonet.parallel import task_rng
from sobonet.targets import multi_indices


def test_arch_counts():
    arch = ArchSpec.parse("1,1,1")
    assert (arch.W, arch.U, arch.L) == (4, 6, 1)
    assert ArchSpec.parse("1,2,2,1").U == 27
    assert ArchSpec.from_hidden(3, [4]).widths == (3, 4, 1)


def test_arch_validation():
    with pytest.raises(InvalidInputError):
        ArchSpec.parse("1,a,1")
    with pytest.raises(InvalidInputError):
        ArchSpec((2, 3, 2))
    with pytest.raises(InvalidInputError):
        ArchSpec((2, 1))
    with pytest.raises(InvalidInputError):
        ArchSpec((1, 1, 1), "tanh")


def test_arch_network_uses_init_parameters():
    arch = ArchSpec.parse("2,3,1")
    theta = arch.init(task_rng(0, 0))
    net = arch.network(theta)
    assert theta.size == arch.W == net.parameter_count
    assert np.array_equal(net.parameters(), theta)


def test_vc_bound_small_arch():
    report = vc_pdim_upper(ArchSpec.parse("1,1,1"))
    assert report.U == 6
    assert report.vc_upper == pytest.approx(31.73, abs=0.01)
    assert report.pdim_upper > report.vc_upper
    assert report.rows()[0]["arch"] == "1,1,1"


def test_warren_count():
    assert warren_count(4, 2, 2) == pytest.approx(2 * (8 * math.e) ** 2)
    with pytest.raises(PreconditionError):
        warren_count(2, 1, 3)
    with pytest.raises(InvalidInputError):
        warren_count(0, 1, 1)


def test_inequality_bound():
    assert inequality_bound(1, 2, 16) == pytest.approx(15.0)
    with pytest.raises(PreconditionError):
        inequality_bound(1, 2, 8)
    with pytest.raises(PreconditionError):
        inequality_bound(3, 2, 16)
    assert inequality_max_m(1, 2, 16) <= inequality_bound(1, 2, 16)


def test_generalization_bounds():
    assert rademacher_bound(10, 0.0, 100) == 0.0
    with pytest.raises(PreconditionError):
        rademacher_bound(50, 1.0, 10)
    r_small = rademacher_bound(10, 1.0, 1000)
    r_large = rademacher_bound(10, 1.0, 100)
    assert 0.0 < r_small < r_large
    assert gen_bound(10, 12, 1.0, 2, 1000) == pytest.approx(
        8.0 * (2 * rademacher_bound(12, 1.0, 1000) + r_small))
    assert log_covering_number(0.1, 100, 1.0, 5) > 0
    assert 0.0 < dudley_bound(5, 1.0, 100) <= 4.0


def test_shatter_two_points():
    arch = ArchSpec.parse("1,2,1")
    inst = shatter_search(arch, 2, samples=20000, seed=1)
    assert inst.shattered
    assert inst.patterns_found == 4
    row = inst.rows()[0]
    assert row["patterns_possible"] == 4
    assert row["samples_used"] <= 20000


def test_shatter_is_thread_independent():
    arch = ArchSpec.parse("1,3,1")
    one = shatter_search(arch, 5, samples=40000, seed=3, threads=1)
    many = shatter_search(arch, 5, samples=40000, seed=3, threads=3)
    assert (one.patterns_found, one.samples_used) == (many.patterns_found, many.samples_used)


def test_shatter_argument_checks():
    arch = ArchSpec.parse("1,2,1")
    with pytest.raises(InvalidInputError):
        shatter_search(arch, 0)
    with pytest.raises(InvalidInputError):
        shatter_search(arch, 2, i=1)
    with pytest.raises(InvalidInputError):
        shatter_search(arch, 2, points=np.zeros((3, 1)))


def test_bump_grid_signs_and_norms():
    grid = bump_grid(5, 2, 2, seed=0)
    assert np.array_equal(grid.sign_witness(), grid.beta.reshape(-1))
    assert all(v <= 1.0 for v in grid.max_derivative().values())
    flipped = grid.flipped((1, 3))
    diff = flipped.sign_witness() != grid.sign_witness()
    assert diff.sum() == 1
    assert diff.reshape(5, 5)[1, 3]


def test_bump_grid_rejects_bad_beta():
    with pytest.raises(InvalidInputError):
        bump_grid(3, 1, 2, beta=np.array([1.0, 0.5, -1.0]))


def _sign_patterns(M: int, D: int, W: int, seed: int) -> int:
    """Distinct 1[p_k > 0] patterns of M random degree-D polynomials in W variables."""
    rng = task_rng(seed, M, D, W)
    monos = multi_indices(W, D)
    coef = rng.normal(size=(M, len(monos)))
    if W == 1:
        # every root plus a point inside each gap reaches all patterns
        roots = np.concatenate([np.roots(c[::-1]) for c in coef if np.any(c[1:])] or [np.zeros(0)])
        roots = np.sort(roots[np.abs(roots.imag) < 1e-12].real)
        edges = np.concatenate([[roots[0] - 1.0 if roots.size else -1.0], roots,
                                [roots[-1] + 1.0 if roots.size else 1.0]])
        x = np.concatenate([edges, 0.5 * (edges[1:] + edges[:-1])]).reshape(-1, 1)
    else:
        x = rng.uniform(-3.0, 3.0, size=(20000, W))
    basis = np.stack([np.prod(x ** np.array(a), axis=1) for a in monos], axis=1)
    signs = (basis @ coef.T) > 0.0
    return len({tuple(row) for row in signs})


@pytest.mark.parametrize("M", [1, 2, 3])
@pytest.mark.parametrize("D", [1, 2, 3])
@pytest.mark.parametrize("W", [1, 2, 3])
def test_warren_count_dominates_sign_patterns(M, D, W):
    if W > M:
        pytest.skip("bound needs W <= M")
    for seed in range(3):
        assert _sign_patterns(M, D, W, seed) <= warren_count(M, D, W)


def test_three_affine_polynomials():
    assert warren_count(3, 1, 1) == pytest.approx(12 * math.e, rel=1e-12)
    assert warren_count(3, 1, 1) == pytest.approx(32.6, abs=0.05)
    assert _sign_patterns(3, 1, 1, seed=9) <= warren_count(3, 1, 1)
    assert warren_count(1, 1, 1) == pytest.approx(10.873, abs=1e-3)
    assert warren_count(2, 2, 2) == pytest.approx(236.5, abs=0.1)


def test_u_grows_fourfold_when_widths_double():
    narrow = ArchSpec.from_hidden(1, [64, 64])
    wide = ArchSpec.from_hidden(1, [128, 128])
    assert 3.5 <= wide.U / narrow.U <= 4.1
    assert vc_pdim_upper(ArchSpec.parse("1,2,2,1")).vc_upper == pytest.approx(176.5, abs=0.1)


def test_rademacher_term_example():
    assert rademacher_bound(100, 1.0, 10_000) == pytest.approx(7.03, abs=0.01)
    assert gen_bound(10, 12, 0.0, 2, 1000) == 0.0


def test_gen_bound_decreases_in_sample_count():
    Ms = np.unique(np.logspace(3, 6, 25).astype(int))
    values = [gen_bound(20, 30, 1.0, 2, int(M)) for M in Ms]
    assert all(b < a for a, b in zip(values, values[1:]))


@pytest.mark.parametrize("sampler", ["random", "grid"])
def test_single_unit_shatters_two_points(sampler):
    arch = ArchSpec.parse("1,1,1")
    points = np.array([[0.25], [0.75]])
    inst = shatter_search(arch, 2, points=points, samples=100_000, seed=4, sampler=sampler)
    assert inst.shattered
    assert inst.rows()[0]["sampler"] == sampler


def test_grid_sampler_falls_back_to_sign_flips():
    arch = ArchSpec.parse("1,8,8,1")
    one = shatter_search(arch, 3, samples=3000, seed=2, sampler="grid", threads=1)
    many = shatter_search(arch, 3, samples=3000, seed=2, sampler="grid", threads=2)
    assert one.patterns_found == many.patterns_found >= 1
    assert one.samples_used <= 3000
    with pytest.raises(InvalidInputError):
        shatter_search(arch, 3, sampler="sobol")


def test_patterns_never_drop_with_more_samples():
    arch = ArchSpec.parse("1,3,1")
    counts = [shatter_search(arch, 5, samples=s, seed=6).patterns_found
              for s in (500, 3000, 9000, 20000, 50000)]
    assert counts == sorted(counts)
    assert counts[-1] <= 2 ** 5
