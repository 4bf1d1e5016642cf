import random

import pytest
from hypothesis import given, settings, strategies as st

from swarmsim import membership
from swarmsim.registry import ForeignUpdateError, Registry, RegistryEntry

from conftest import make_profile


def entry_for(node, inc=0, sv=1, util=0.0, t=0.0):
    return RegistryEntry(
        node=node,
        profile=make_profile(node=node, utilization=util, status_version=sv),
        version=(inc, sv),
        stamped_time=t,
    )


def test_local_update_bumps_status_version():
    reg = Registry(owner=1)
    e1 = reg.local_update(make_profile(node=1, utilization=0.2), incarnation=0, now=1.0)
    e2 = reg.local_update(make_profile(node=1, utilization=0.4), incarnation=0, now=2.0)
    assert e2.version == (0, e1.version[1] + 1)
    assert e2.profile.dyn.utilization == 0.4


def test_foreign_local_update_rejected():
    reg = Registry(owner=1)
    with pytest.raises(ForeignUpdateError):
        reg.local_update(make_profile(node=2), incarnation=0, now=0.0)


def test_merge_is_lww_and_never_regresses():
    reg = Registry(owner=1)
    assert reg.merge(entry_for(2, inc=0, sv=3))
    assert not reg.merge(entry_for(2, inc=0, sv=2))  # older status
    assert not reg.merge(entry_for(2, inc=0, sv=3))  # equal
    assert reg.merge(entry_for(2, inc=1, sv=1))  # new incarnation dominates
    assert reg.entries[2].version == (1, 1)


def test_diff_symmetry():
    a, b = Registry(1), Registry(2)
    a.merge(entry_for(3, sv=5))
    a.merge(entry_for(4, sv=1))
    b.merge(entry_for(4, sv=2))
    b.merge(entry_for(5, sv=1))
    newer_here, want = a.diff(b.digest())
    assert [e.node for e in newer_here] == [3]
    assert want == [4, 5]


def test_two_way_exchange_converges():
    rng = random.Random(5)
    a, b = Registry(1), Registry(2)
    for node in range(3, 12):
        e = entry_for(node, inc=rng.randrange(2), sv=rng.randrange(1, 6))
        (a if rng.random() < 0.5 else b).merge(e)
    for_b, want = a.diff(b.digest())
    for e in for_b:
        b.merge(e)
    for_a, _ = b.diff(a.digest())
    for e in for_a:
        a.merge(e)
    # third leg: b sends what a asked for
    for node in want:
        if node in b.entries:
            a.merge(b.entries[node])
    assert a.content_hash() == b.content_hash()


def test_ring_propagation_within_n_rounds():
    """Single update at node 0 floods a ring of N one-neighbor exchanges."""
    n = 8
    regs = [Registry(i) for i in range(n)]
    update = entry_for(0, sv=9)
    regs[0].merge(update)
    rounds = 0
    while any(reg.entries.get(0) != update for reg in regs):
        rounds += 1
        for i in range(n):  # each node pushes newer entries to its successor
            nxt = regs[(i + 1) % n]
            newer, _ = regs[i].diff(nxt.digest())
            for e in newer:
                nxt.merge(e)
        assert rounds <= n, "flood exceeded ring diameter bound"
    assert rounds <= n


def test_query_filters_dead_and_flags_suspect():
    reg = Registry(owner=1)
    for node in (2, 3, 4, 5):
        reg.merge(entry_for(node))
    status = {
        2: membership.ALIVE,
        3: membership.DEAD,
        4: membership.SUSPECT,
        5: membership.LEFT,
    }
    out = reg.query(lambda e: True, status.get)
    assert [(e.node, stale) for e, stale in out] == [(2, False), (4, True)]


def test_eviction():
    reg = Registry(owner=1)
    reg.merge(entry_for(2))
    assert reg.evict(2)
    assert not reg.evict(2)
    assert 2 not in reg.entries


def test_content_hash_order_independent():
    a, b = Registry(1), Registry(2)
    e2, e3 = entry_for(2), entry_for(3)
    a.merge(e2)
    a.merge(e3)
    b.merge(e3)
    b.merge(e2)
    assert a.content_hash() == b.content_hash()


def test_entry_dict_round_trip():
    e = entry_for(7, inc=2, sv=5, util=0.33, t=12.5)
    assert RegistryEntry.from_dict(e.to_dict()) == e


versions = st.tuples(st.integers(0, 3), st.integers(0, 5))


@settings(max_examples=300)
@given(st.lists(versions, min_size=1, max_size=8))
def test_merge_order_independent(vs):
    """Any delivery order of the same entries yields the same winner."""
    entries = [entry_for(2, inc=i, sv=s) for i, s in vs]
    a, b = Registry(1), Registry(1)
    for e in entries:
        a.merge(e)
    for e in reversed(entries):
        b.merge(e)
    assert a.entries[2].version == b.entries[2].version == max(vs)
