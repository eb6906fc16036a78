import os

from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", max_examples=500, deadline=None)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


import numpy as np  # noqa: E402
import pytest  # noqa: E402

from mirauction.banks import BucketShatteringParams  # noqa: E402
from mirauction.partitions import Partition, PartitionList  # noqa: E402


def worked_params() -> BucketShatteringParams:
    """Two bucketings of 8 items into halves, each half with two chunkings into pairs (0-based)."""
    outer = PartitionList([
        Partition(np.array([0, 0, 0, 0, 1, 1, 1, 1]), 2),
        Partition(np.array([0, 1, 0, 1, 0, 1, 0, 1]), 2),
    ])

    def pairs(domain, *chunkings):
        return PartitionList([Partition.from_chunks(c, domain=domain) for c in chunkings])

    inner = {
        (0, 0): pairs((0, 1, 2, 3), [[0, 1], [2, 3]], [[0, 2], [1, 3]]),
        (0, 1): pairs((4, 5, 6, 7), [[4, 5], [6, 7]], [[4, 6], [5, 7]]),
        (1, 0): pairs((0, 2, 4, 6), [[0, 2], [4, 6]], [[0, 4], [2, 6]]),
        (1, 1): pairs((1, 3, 5, 7), [[1, 3], [5, 7]], [[1, 5], [3, 7]]),
    }
    return BucketShatteringParams(k=1, t=2, outer=outer, inner=inner)


@pytest.fixture
def worked():
    return worked_params()
