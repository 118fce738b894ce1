import numpy as np
import pytest

from partition_lab.density import MixtureDensity
from partition_lab.partition import PartitionedDensity, Rule


def random_mixture(rng, k=None):
    k = k or int(rng.integers(1, 4))
    w = rng.dirichlet(np.ones(k))
    return MixtureDensity.from_triples(
        [(float(wi), float(rng.uniform(-4, 4)), float(rng.uniform(0.4, 2.5))) for wi in w]
    )


def random_partition(rng, rule, k=2):
    params = [(float(rng.uniform(-4, 4)), float(rng.uniform(0.4, 2.5))) for _ in range(k)]
    alphas = rng.dirichlet(np.ones(k) * 2)
    return PartitionedDensity.make(params, rule, alphas)


def random_pairs(seed, n=20):
    rng = np.random.default_rng(seed)
    rules = [Rule.WTA, Rule.WEIGHTED_WTA, Rule.POSTERIOR]
    return [(random_mixture(rng), random_partition(rng, rules[i % 3], int(rng.integers(2, 4)))) for i in range(n)]


@pytest.fixture
def example_a_density():
    return MixtureDensity.from_triples([(0.5, -2.0, 1.5), (0.5, 2.0, 1.5)])


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not getattr(mod, "LINES", None):
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
        terminalreporter.write_line(line)
