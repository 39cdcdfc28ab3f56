import pytest

from cfset.explorer import ExploreConfig, explore, random_walk
from cfset.scenario import build_story, build_traversal_demo


@pytest.fixture(scope="session")
def story():
    return build_story()


@pytest.fixture(scope="session")
def demo():
    return build_traversal_demo()


@pytest.fixture(scope="session")
def micro_report():
    cfg = ExploreConfig(
        num_workers=1, keys=(1,), ops_per_worker=1, sys_budget=0, depth_limit=8
    )
    return cfg, explore(cfg, collect_traces=True)


@pytest.fixture(scope="session")
def walk_corpus():
    cfg = ExploreConfig(
        num_workers=2,
        keys=(1, 2, 3),
        ops_per_worker=2,
        sys_budget=2,
        seed=11,
        walks=40,
        walk_length=30,
    )
    traces, violations = random_walk(cfg)
    return cfg, traces, violations
