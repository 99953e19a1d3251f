import numpy as np
import pytest

from tor_lab.data import SparseVector, SynthConfig, gen_synthetic, to_csr


def small_synth(K=3, n=60, p=0.1, seed=0):
    ds = gen_synthetic(SynthConfig(K=K, p=p, n_samples=n, seed=seed))
    return to_csr(ds.vectors, ds.dim), ds.labels


@pytest.fixture
def synth3():
    return small_synth()


def dense_rows(rows):
    """CSR from a list of dense rows."""
    return to_csr([SparseVector.from_dense(r) for r in np.atleast_2d(np.asarray(rows, float))])


def latent_ordinal(n, K=3, d=2, noise=0.5, seed=0):
    """Dense low-dimensional data: labels are equal-frequency bins of a noisy
    linear score, so classes overlap and transduction has work to do."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d))
    z = X @ np.linspace(1.0, 0.5, d) + noise * rng.normal(size=n)
    cuts = np.quantile(z, np.arange(1, K) / K)
    y = 1 + np.searchsorted(cuts, z)
    return dense_rows(X), y.astype(np.int64)


# Every fit in the session is recorded so the threshold order can be
# checked over the whole suite, not only inside the acceptance tests.
FITS = []
ACCEPTANCE = {}


def pytest_configure(config):
    import tor_lab.ordreg as ordreg
    import tor_lab.tor as tor

    original = ordreg.fit_extended

    def recording(*args, **kwargs):
        fit = original(*args, **kwargs)
        FITS.append(fit.model.thresholds.copy())
        return fit

    ordreg.fit_extended = recording
    tor.fit_extended = recording
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


def unordered_fits(tol=1e-6):
    return [th for th in FITS if np.any(np.diff(th) < -tol)]


@pytest.fixture
def note(request):
    """Attach a detail string to the acceptance summary line of this test."""
    def _note(text):
        request.node.user_properties.append(("note", text))
    return _note


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or rep.when != "call" and not (rep.when == "setup" and rep.skipped):
        return
    notes = "; ".join(v for k, v in item.user_properties if k == "note")
    prev_outcome, prev_notes = ACCEPTANCE.get(mark.args[0], ("passed", ""))
    outcome = rep.outcome if prev_outcome == "passed" else prev_outcome
    ACCEPTANCE[mark.args[0]] = (outcome, "; ".join(x for x in (prev_notes, notes) if x))


def pytest_terminal_summary(terminalreporter):
    tr = terminalreporter
    if ACCEPTANCE:
        tr.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            outcome, notes = ACCEPTANCE[n]
            status = {"passed": "PASS", "failed": "FAIL"}.get(outcome, outcome.upper())
            tr.write_line(f"criterion {n}: {status}" + (f" ({notes})" if notes else ""))
    if FITS:
        bad = unordered_fits()
        tr.write_line(f"threshold order over the whole suite: {len(FITS)} fits, "
                      f"{len(bad)} unordered -> {'PASS' if not bad else 'FAIL'}")


def pytest_sessionfinish(session, exitstatus):
    if FITS and unordered_fits() and exitstatus == 0:
        session.exitstatus = 1
