import numpy as np
import pytest

from xcsge.data import Dataset, LeadtimeFrame
from xcsge.learners import PrecomputedMember

# PASS/FAIL lines from the acceptance suite, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


def random_instance(seed, N=10, J=3, T=2, M=2, F=2):
    """Dataset with N rows and J precomputed members of random quality."""
    rng = np.random.default_rng(seed)
    Y = rng.normal(size=(N, M))
    X = rng.normal(size=(N, F))
    ids = np.array([f"r{i}" for i in range(N)], dtype=object)
    ds = Dataset(
        features=X,
        targets=Y,
        feature_names=tuple(f"f{i}" for i in range(F)),
        target_names=tuple(f"y{i}" for i in range(M)),
        sample_ids=ids,
        frame=LeadtimeFrame(1, T, 1),
    )
    members = []
    preds = np.empty((N, J, T, M))
    for j in range(J):
        noise = rng.uniform(0.05, 1.0) * np.arange(1, T + 1)[None, :, None]
        preds[:, j] = Y[:, None, :] + rng.normal(size=(N, T, M)) * noise
        sid = np.repeat(ids, T)
        lt = np.tile(np.arange(T), N)
        members.append(PrecomputedMember(f"m{j}", sid, lt, preds[:, j].reshape(N * T, M)))
    return ds, members, preds


def one_hot_members(ds, values_by_member):
    """Precomputed members from (N, T, M) arrays aligned with ``ds`` rows."""
    out = []
    N = ds.n_samples
    for j, v in enumerate(values_by_member):
        T = v.shape[1]
        out.append(PrecomputedMember(f"m{j}", np.repeat(ds.sample_ids, T), np.tile(np.arange(T), N),
                                     v.reshape(N * T, -1)))
    return out


@pytest.fixture
def instance():
    return random_instance(0, N=30, J=3, T=3, M=2)
