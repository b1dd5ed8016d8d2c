import numpy as np
import pytest

from catso.environments import LabeledDataset
from catso.feature_attention import FeatureGroupSchema


def make_linear_dataset(T=400, N=10, K=3, n_observed=2, seed=0):
    """Labels from an argmax of random linear scores; first features observed."""
    rng = np.random.default_rng(seed)
    X = rng.random((T, N))
    W = rng.normal(size=(K, N))
    y = np.argmax(X @ W.T, axis=1)
    schema = FeatureGroupSchema.singletons(N, range(n_observed))
    return LabeledDataset(X, y.astype(np.intp), schema, "toy", tuple(str(k) for k in range(K)))


@pytest.fixture
def toy_dataset():
    return make_linear_dataset()


# -- acceptance report: one PASS/FAIL line per criterion in the terminal summary --


def pytest_configure(config):
    config._acceptance_lines = []


@pytest.fixture
def acceptance(request):
    lines = request.config._acceptance_lines

    def report(criterion: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}"
        lines.append(line)
        print(line)
        assert ok, line

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split()[1]):
            terminalreporter.write_line(line)
