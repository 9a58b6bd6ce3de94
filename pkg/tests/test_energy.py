import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from distoffload.callgraph import CallGraph, MethodNode, extract_chains
from distoffload.commands import cloudlet_graph, split_graph
from distoffload.energy import (
    JOULES_PER_KWH,
    DevicePowerProfile,
    Host,
    HostPowerModel,
    cloud_energy,
    mobile_energy,
)
from distoffload.engine import INSTANT, CrashEvent, NetworkSpec, VmSpec, build_plan, max_resend, simulate
from distoffload.errors import UnhostedVmError

PHONE = DevicePowerProfile(p_compute=0.9, p_idle=0.3, p_transmit=1.3)
FLEET = [VmSpec("vm1"), VmSpec("vm2")]


def sim(graph, mode="distributed", network=INSTANT, crash=None, fleet=FLEET):
    return simulate(build_plan(extract_chains(graph), mode, fleet), network, crash)


def one_upload(nbytes, cloud=0.0):
    nodes = [MethodNode("r", False), MethodNode("x", True, 1.0, cloud, nbytes, 0)]
    return CallGraph.build(nodes, [("r", "x")], "r")


def test_device_only_run():
    nodes = [MethodNode(x, False, mobile_time=t) for x, t in (("a", 1.0), ("b", 2.5))]
    rep = sim(CallGraph.build(nodes, [("a", "b")], "a"))
    e = mobile_energy(rep, PHONE)
    assert e.transmit == 0 and e.idle == 0 and e.resend == 0
    assert e.compute == pytest.approx(0.9 * 3.5)
    assert e.total == e.compute


def test_one_megabit_at_one_mbps():
    # 125000 bytes = 1 Mb
    rep = sim(one_upload(125000), network=NetworkSpec(1.0, 0.0))
    assert mobile_energy(rep, PHONE).transmit == pytest.approx(1.3)


def test_idle_while_waiting_for_cloud():
    rep = sim(one_upload(0, cloud=2.0))
    e = mobile_energy(rep, PHONE)
    assert e.idle == pytest.approx(0.3 * 2.0)
    assert e.compute == 0


def test_idle_excludes_local_work():
    nodes = [
        MethodNode("r", False),
        MethodNode("cloud", True, 0, 2.0, 0, 0),
        MethodNode("local", False, 1.5, 0, 0, 0),
    ]
    rep = sim(CallGraph.build(nodes, [("r", "cloud"), ("r", "local")], "r"))
    e = mobile_energy(rep, PHONE)
    assert e.compute == pytest.approx(0.9 * 1.5)
    assert e.idle == pytest.approx(0.3 * 0.5)


def test_resend_component_by_differencing():
    net = NetworkSpec(8.0, 0.01)
    g = one_upload(2e6, cloud=1.0)
    base = mobile_energy(sim(g, network=net), PHONE)
    crash = mobile_energy(sim(g, network=net, crash=CrashEvent("vm1", at_fraction=0.5)), PHONE)
    original_upload = PHONE.p_transmit * net.transfer_time(2e6)
    assert crash.resend == pytest.approx(original_upload)
    assert crash.transmit - base.transmit == pytest.approx(crash.resend)


@given(st.integers(1, 10**7))
def test_transmit_linear_in_bytes(nbytes):
    net = NetworkSpec(5.0, 0.0)
    one = mobile_energy(sim(one_upload(nbytes), network=net), PHONE).transmit
    two = mobile_energy(sim(one_upload(2 * nbytes), network=net), PHONE).transmit
    assert two == pytest.approx(2 * one, rel=1e-12)


def host(*vms, **kw):
    return Host("h1", HostPowerModel(**kw), tuple(vms))


def test_idle_host():
    rep = sim(CallGraph.build([MethodNode("r", False, 0.0)], [], "r"))
    e = cloud_energy(rep, [host("vm1", "vm2")], horizon=3600.0)
    assert e.total_kwh == pytest.approx(100.0 * 3600 / JOULES_PER_KWH)


def test_saturated_host():
    g = one_upload(0, cloud=10.0)
    rep = sim(g)
    e = cloud_energy(rep, [host("vm1", "vm2", capacity_mips=10000)])
    assert e.total_kwh == pytest.approx(250.0 * 10.0 / JOULES_PER_KWH)


def test_overload_is_capped_and_flagged():
    g = cloudlet_graph(2, 10000, 10000, groups=2)
    rep = sim(g)
    e = cloud_energy(rep, [host("vm1", "vm2", capacity_mips=10000)])
    assert e.warnings
    assert e.total_kwh == pytest.approx(250.0 * 1.0 / JOULES_PER_KWH)


def test_unhosted_vm():
    rep = sim(one_upload(0, 1.0))
    with pytest.raises(UnhostedVmError):
        cloud_energy(rep, [host("vm1")])
    with pytest.raises(UnhostedVmError):
        cloud_energy(rep, [host("vm1", "vm2"), Host("h2", HostPowerModel(), ("vm2",))])


def test_host_model_validation():
    with pytest.raises(ValueError):
        HostPowerModel(p_static=300, p_max=250)


@settings(max_examples=60, deadline=None)
@given(count=st.integers(1, 12), length=st.floats(100, 1e5), k=st.integers(1, 4))
def test_vm_count_neutrality(count, length, k):
    fleet = [VmSpec(f"vm{i}") for i in range(1, 5)]
    hosts = [Host("h1", HostPowerModel(capacity_mips=40000), tuple(vm.id for vm in fleet))]
    one = sim(cloudlet_graph(count, length, 10000, 1), fleet=fleet)
    many = sim(cloudlet_graph(count, length, 10000, k), fleet=fleet)
    horizon = max(one.makespan, many.makespan)
    a = cloud_energy(one, hosts, horizon).total_kwh
    b = cloud_energy(many, hosts, horizon).total_kwh
    assert abs(a - b) <= 1e-9 * max(a, b)


@settings(max_examples=60, deadline=None)
@given(n=st.integers(1, 5), total=st.integers(10, 90))
def test_balanced_split_resends_less(n, total):
    net = NetworkSpec(10.0, 0.0)
    share = total / n

    def crash_resend_energy(split, vms):
        fleet = [VmSpec(f"vm{i}") for i in range(1, vms + 1)]
        plan = build_plan(extract_chains(split_graph(1e6, split)), "distributed", fleet)
        worst = max_resend(plan)
        rep = simulate(plan, net, CrashEvent(worst.vm, at_fraction=0.5))
        return mobile_energy(rep, PHONE).resend

    balanced = crash_resend_energy([share] * n, n)
    single = crash_resend_energy([total], 1)
    assert balanced <= single + 1e-12
    if n > 1:
        assert balanced < single


def test_components_non_negative_and_additive():
    g = split_graph(1e6, [40, 30])
    rep = sim(g, network=NetworkSpec(4.0, 0.02), crash=CrashEvent("vm2", at_fraction=0.3))
    e = mobile_energy(rep, PHONE)
    for v in (e.compute, e.idle, e.transmit, e.resend):
        assert v >= 0
    assert e.total == e.compute + e.idle + e.transmit
    assert e.resend <= e.transmit
