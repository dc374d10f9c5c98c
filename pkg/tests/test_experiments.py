import math

import numpy as np
import pytest

from qrouter.experiments import (
    decoherence_sweep,
    optimize_ratio,
    ratio_objective,
    routing_cycles,
    run_ensemble,
    run_routing,
    run_transfer,
    sample_realization,
    sweep_frequency_length,
    tau_AB,
)
from qrouter.metrics import fidelity_from_concurrence
from qrouter.model import ChainSpec, ErrorModel, ratchet_protocol, stage_durations
from qrouter.special import XI0, bessel_j0

FAB_ERRORS = ErrorModel(eps_J=1e-7, eps_b=1e-7, eps_T=1e-3, seed=7)


@pytest.fixture
def small():
    spec = ChainSpec.uniform(8, 3.0, 1.5, node_index=4)
    return spec, ratchet_protocol(spec, 10.0)


def test_routing_cycles_rule(chain13):
    assert routing_cycles(chain13, 1) == 4
    assert routing_cycles(ChainSpec.uniform(40, 100, 59.02), 40) == 11


def test_offsets_route_to_opposite_ends(chain13, drive13):
    t1 = drive13.stage_durations[0]
    to_bob = run_routing(chain13, drive13, 0.0)
    to_charlie = run_routing(chain13, drive13, t1)
    assert to_bob.C_bob > to_bob.C_charlie
    assert to_charlie.C_charlie > to_charlie.C_bob
    assert to_bob.n_cycles == 4
    assert to_bob.trajectory.max_drift < 1e-9


def test_routing_with_dephasing_lowers_concurrence(small):
    spec, p = small
    clean = run_routing(spec, p, 0.0)
    noisy = run_routing(spec, p, 0.0, gamma=1e-2)
    tau = tau_AB(*p.stage_durations, spec.n_sites)
    assert noisy.C_bob < clean.C_bob
    assert noisy.C_bob == pytest.approx(clean.C_bob * math.exp(-2e-2 * tau), abs=0.03)


def test_sweep_axes_and_overlay():
    res = sweep_frequency_length(3.0, 1.5, [10.0, 20.0], [6, 8])
    assert res.C.shape == (2, 2)
    assert np.all(res.estimate == 1.0)
    np.testing.assert_allclose(res.F, [[fidelity_from_concurrence(c, math.sqrt(0.5)) for c in r] for r in res.C])
    assert len(res.rows()) == 4
    with pytest.raises(ValueError, match="strictly increasing"):
        sweep_frequency_length(3.0, 1.5, [20.0, 10.0], [6])


def test_decoherence_sweep_overlay_exact_at_zero(small):
    spec, p = small
    res = decoherence_sweep(spec, p, [0.0, 1e-2], [8])
    assert res.C[0, 0] == res.estimate[0, 0]
    assert res.C[1, 0] == pytest.approx(res.estimate[1, 0], abs=0.03)


def test_tau_ab():
    assert tau_AB(2.0, 3.0, 4) == 5.0
    t1, t2 = stage_durations(1.0, 100.0, 59.02)
    assert tau_AB(t1, t2, 60) == pytest.approx(205.2, abs=0.5)
    assert tau_AB(t1, t2, 80) == pytest.approx(2 * tau_AB(t1, t2, 40))


def test_optimal_ratio():
    r, f = optimize_ratio()
    assert r == pytest.approx(0.5902, abs=1e-3)
    assert f == pytest.approx(ratio_objective(1 / r), rel=1e-12)
    assert ratio_objective(0.5) > f and ratio_objective(0.7) > f
    assert ratio_objective(r + 1e-4) >= f and ratio_objective(r - 1e-4) >= f
    direct = 1 / abs(bessel_j0(XI0 * r)) + 1 / abs(bessel_j0(XI0 / r))
    assert f == pytest.approx(direct, rel=1e-14)


def test_optimiser_rejects_bad_bracket():
    with pytest.raises(ValueError):
        optimize_ratio(0.5, 0.4)


def test_zero_error_model_is_identity(small):
    spec, p = small
    s2, p2 = sample_realization(spec, p, ErrorModel(), 3)
    assert s2 == spec and p2 == p


def test_realization_draws_are_reproducible_and_bounded(small):
    spec, p = small
    a = sample_realization(spec, p, FAB_ERRORS, 11)
    b = sample_realization(spec, p, FAB_ERRORS, 11)
    c = sample_realization(spec, p, FAB_ERRORS, 12)
    assert a == b and a != c
    s, q = a
    assert np.all(np.abs(np.array(s.couplings) - 1.0) <= 1e-7)
    assert np.all(np.abs(s.profile - spec.profile) <= 1e-7)
    assert all(abs(j) <= 1e-3 for j in q.switch_jitter)


def test_ensemble_without_errors_has_no_spread(small):
    spec, p = small
    res = run_ensemble(spec, p, ErrorModel(), 4)
    single = run_routing(spec, p, 0.0)
    assert res.std_C == 0.0 and res.std_F == 0.0
    assert res.counts.sum() == 4
    assert res.theta_mean == pytest.approx(res.records[0].theta, abs=1e-12)
    assert res.records[0].C == pytest.approx(single.C_bob, abs=1e-12)


def test_ensemble_is_independent_of_workers(small):
    spec, p = small
    errors = ErrorModel(1e-3, 1e-3, 1e-2, seed=99)
    serial = run_ensemble(spec, p, errors, 4, workers=1)
    pooled = run_ensemble(spec, p, errors, 4, workers=2)
    assert [r.C for r in serial.records] == [r.C for r in pooled.records]
    assert serial.theta_mean == pooled.theta_mean
    np.testing.assert_array_equal(serial.counts, pooled.counts)


def test_histogram_is_permutation_invariant(small):
    spec, p = small
    res = run_ensemble(spec, p, ErrorModel(1e-3, 1e-3, 1e-2, seed=5), 6)
    F = res.F
    for perm in (np.arange(6)[::-1], np.array([3, 1, 5, 0, 2, 4])):
        bins = np.floor(F[perm] / res.bin_width + 1e-9).astype(int)
        counts = np.bincount(bins - bins.min())
        np.testing.assert_array_equal(counts[counts > 0], res.counts[res.counts > 0])
    assert -math.pi < res.theta_mean <= math.pi


def test_ensemble_rejects_tiny_sample(small):
    spec, p = small
    with pytest.raises(ValueError, match="M >= 2"):
        run_ensemble(spec, p, ErrorModel(), 1)


def test_per_realization_compensation_uses_zero_phase_error(small):
    spec, p = small
    res = run_ensemble(spec, p, ErrorModel(1e-3, 1e-3, 1e-2, seed=5), 3, compensation="per_realization")
    for r in res.records:
        assert r.F == pytest.approx(fidelity_from_concurrence(r.C, math.sqrt(0.5)), abs=1e-12)


def test_dephased_ensemble_fidelity_at_gamma_zero_limit(small):
    spec, p = small
    res = run_ensemble(spec, p, ErrorModel(), 2, gamma=1e-9, compensation="per_realization")
    clean = run_ensemble(spec, p, ErrorModel(), 2, compensation="per_realization")
    assert res.records[0].F == pytest.approx(clean.records[0].F, abs=1e-6)


def test_transfer_report(small):
    spec, p = small
    rep = run_transfer(spec, p, 0.6, 0.8)
    assert 0 <= rep.c_B_modulus <= 1 and 0 <= rep.fidelity <= 1
    assert rep.fidelity == pytest.approx(fidelity_from_concurrence(rep.c_B_modulus, 0.8), abs=1e-9)
    assert rep.concurrence == pytest.approx(rep.c_B_modulus, abs=1e-9)
    # the squared-modulus Bob state differs from the variant with |c_B| on the diagonal
    assert rep.fidelity_as_printed != pytest.approx(rep.fidelity, abs=1e-9)
    with pytest.raises(ValueError):
        run_transfer(spec, p, 1.0, 1.0)
