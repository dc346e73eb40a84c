import numpy as np
import pytest

from lpiso import coeffs as cf
from lpiso import innovations as inv
from lpiso.harness import experiments as ex


def test_dyadic_grid():
    assert ex.dyadic_grid(256, 2048) == [256, 512, 1024, 2048]
    assert ex.dyadic_grid(300, 1024) == [512, 1024]


def test_normalizers_log_damped_trend():
    res = ex.run_normalizers(cf.log_damped(1.0), ex.dyadic_grid(256, 65536))
    assert res.verdicts == {"beta_trend": True}


def test_array_diagnostics_decrease():
    vals = [ex.array_diagnostics(cf.fractional(0.25), n) for n in (2 ** 10, 2 ** 12, 2 ** 14)]
    maxes = [v[0] for v in vals]
    assert maxes[-1] < 0.05
    assert np.all(np.diff(maxes) < 0)
    assert np.all(np.diff([v[1] for v in vals]) < 0)


def test_fclt_reference_sd():
    assert ex.fclt_reference_sd(cf.dirac(), inv.iid_gaussian(2.0), 100, 0.5) == \
        pytest.approx(2.0 * np.sqrt(0.5))
    assert ex.fclt_reference_sd(cf.fractional(0.25), inv.two_state(), 1024, 1.0) == \
        pytest.approx(3.0)


@pytest.mark.slow
def test_fclt_markov_long_memory():
    res = ex.run_fclt(cf.fractional(0.25), inv.two_state(0.9), 2 ** 14, 2000, seed=3,
                      meta_runs=20)
    assert res.summary["meta_passes"]["1.0"] >= 18


def test_iso_setup_constants():
    s = ex.iso_setup("4.1", cf.dirac(), inv.iid_gaussian(), 2.0, [1024])
    assert s.kappa == pytest.approx(2.0) and s.d_n[1024] == pytest.approx(1024 ** (-1 / 3))
    s3 = ex.iso_setup("4.3", cf.fractional(0.25), inv.iid_gaussian(), 2.0, [1024, 4096])
    assert s3.H == 0.75
    assert np.all(s3.schedule.residual <= 1e-8)
    s2 = ex.iso_setup("4.2", cf.harmonic(), inv.iid_gaussian(), 2.0, [1024, 4096])
    assert s2.H == 0.5


def test_iso_rate_requires_positive_slope():
    with pytest.raises(Exception):
        ex.run_iso_rate("4.1", cf.dirac(), inv.iid_gaussian(), phi_slope=0.0)
