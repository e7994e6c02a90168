import pytest

from rigidsearch.graphs import Graph


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="run tests marked slow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


# Record certificates bundled as verification fixtures: vertex count ->
# (graph code, exact NAC-coloring count).
NAC_RECORDS = {
    13: (1817372602634323920930, 3125),
    14: (2178541080686613138604444182, 7521),
    15: (35514488197670496374812652340870, 15963),
    16: (88454699302609837679256749570852374, 37496),
    17: (43646696667421322394332935806613331125984, 88257),
    18: (44879647396852278983534873867663098247119872, 199719),
}

# Independently constructed comparison family with known NAC counts.
NAC_COMPARISON = {
    13: (170363797095532441635376, 2923),
    14: (1395360292174978547951223617, 7063),
    15: (22859454182150718848230338095108, 14127),
    16: (749023707617915212187976649078898721, 35133),
    17: (49086874595737144883235931874747612135940, 70267),
}

# Spherical realization-count record certificates: (n, code, count); the
# same entries are served by the bundled stub-oracle table.
SPHERE_RECORDS = [
    (15, 2000828459594098240497450525056, 278528),
    (15, 22185205662832118156851245393968, 278528),
    (16, 676317030175026185879559871219632902, 819200),
    (17, 1708810961581179146514778090735835808768, 2228224),
    (18, 5717703424785600896298030199603140199580763136, 6127616),
]

# Best NAC count over all one-vertex extensions of the 13-vertex record.
BEST_CHILD_OF_NAC_13 = 6656


@pytest.fixture
def k33():
    return Graph.from_edges(6, [(i, j) for i in range(3) for j in range(3, 6)])
