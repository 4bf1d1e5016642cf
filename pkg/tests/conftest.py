"""Shared builders for tests: quick profiles, tasks and scenarios."""

from __future__ import annotations

import pytest

from swarmsim.model import (
    MAINS,
    CapabilityAdvertisement,
    DynamicStatus,
    NodeProfile,
    Position,
    QoSRequirement,
    StaticHardwareProfile,
    StaticSoftwareProfile,
    TaskSpec,
)


def make_profile(
    node=1,
    perf=1.0,
    memory=1024,
    bandwidth=10.0,
    utilization=0.0,
    battery=MAINS,
    position=(0.0, 0.0),
    typologies=("generic",),
    status_version=0,
):
    return NodeProfile(
        node=node,
        hw=StaticHardwareProfile(
            cpu_perf_index=perf, memory=memory, link_bandwidth=bandwidth
        ),
        sw=StaticSoftwareProfile(os_tag="linux"),
        dyn=DynamicStatus(
            utilization=utilization,
            battery=battery,
            position=Position(*position),
            status_version=status_version,
        ),
        adv=CapabilityAdvertisement(
            node=node, task_typologies=frozenset(typologies)
        ),
    )


def make_task(task_id=1, typology="generic", work=1.0, memory=64, deadline=60.0,
              origin=1, inputs=()):
    return TaskSpec(
        task_id=task_id,
        typology=typology,
        work=work,
        memory_demand=memory,
        input_data=tuple(inputs),
        qos=QoSRequirement(deadline=deadline),
        origin_node=origin,
    )


@pytest.fixture
def profile():
    return make_profile()
