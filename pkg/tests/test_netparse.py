"""Case parsing, the lossless reduction, and the JSON round trip."""
import json

import numpy as np
import pytest

from cyclecert import (
    CaseError,
    LosslessOptions,
    Network,
    load_case,
    losslessify,
    network_from_json,
    network_to_json,
    parse_case,
    scale_injections,
    validate_network,
)

CASE_TEXT = """\
function mpc = tiny
mpc.version = '2';
mpc.baseMVA = 100;
mpc.bus = [
    1  3  0    0  0 0 1 1.00 0 345 1 1.1 0.9;
    2  1  40   0  0 0 1 0.98 0 345 1 1.1 0.9;
    3  1  60   0  0 0 1 1.02 0 345 1 1.1 0.9;
];
mpc.gen = [
    1  100  0 300 -300 1.0 100 1 250 10;
];
mpc.branch = [
    1 2 0.01 0.1  0 250 250 250 0 0 1 -360 360;
    2 3 0.02 0.2  0 250 250 250 0 0 1 -360 360;
    1 3 0.01 0.25 0 250 250 250 0 0 1 -360 360;
    1 3 0.01 0.25 0 250 250 250 0 0 0 -360 360;
];
"""


def test_parse_matpower_subset():
    raw = parse_case(CASE_TEXT)
    assert raw.base_mva == 100.0
    # the status-0 branch is dropped at parse time
    assert raw.n == 3 and raw.m == 3
    assert [b.id for b in raw.buses] == [1, 2, 3]
    assert raw.branches[0].from_bus == 1 and raw.branches[0].to_bus == 2
    assert {(b.from_bus, b.to_bus) for b in raw.branches} == {(1, 2), (2, 3), (1, 3)}


def test_losslessify_flat_voltage_and_balance():
    net, report = losslessify(parse_case(CASE_TEXT))
    # out-of-service branch dropped, no parallels left to merge
    assert net.m == 3
    assert report.merged_pairs == ()
    assert np.all(net.vm == 1.0)
    # generation 100 MW vs load 100 MW: already balanced
    assert abs(float(np.sum(net.p))) < 1e-12
    assert net.p[net.index_of(1)] == pytest.approx(1.0)
    # B = 1/x in per-unit, branches in canonical (from, to) order
    assert net.branches.tolist() == [[0, 1], [0, 2], [1, 2]]
    assert net.susceptance == pytest.approx([10.0, 4.0, 5.0])


def test_losslessify_case_voltage():
    net, _ = losslessify(parse_case(CASE_TEXT), LosslessOptions(voltage="case"))
    assert net.vm == pytest.approx([1.0, 0.98, 1.02])
    # weights pick up the endpoint magnitudes
    assert net.weights == pytest.approx(net.vm[net.branches[:, 0]]
                                        * net.vm[net.branches[:, 1]]
                                        * net.susceptance)


def test_losslessify_merges_parallels():
    text = CASE_TEXT.replace(
        "1 3 0.01 0.25 0 250 250 250 0 0 0 -360 360;",
        "1 3 0.01 0.25 0 250 250 250 0 0 1 -360 360;",
    )
    net, report = losslessify(parse_case(text))
    assert net.m == 3
    assert report.merged_pairs == ((1, 3, 2),)
    # susceptances add when lines run in parallel
    assert net.susceptance[np.all(net.branches == [0, 2], axis=1)] == pytest.approx([8.0])


def test_losslessify_imbalance_projection():
    text = CASE_TEXT.replace("1  100  0 300", "1  130  0 300")
    net, report = losslessify(parse_case(text))
    assert report.injection_mismatch == pytest.approx(0.3)
    assert report.shift_per_bus == pytest.approx(0.1)
    assert abs(float(np.sum(net.p))) < 1e-12


def test_losslessify_slack_bus_absorbs_mismatch():
    text = CASE_TEXT.replace("1  100  0 300", "1  130  0 300")
    net, report = losslessify(parse_case(text), LosslessOptions(slack_bus=2))
    assert report.slack_bus == 2
    assert report.shift_per_bus == 0.0
    assert net.p[net.index_of(1)] == pytest.approx(1.3)
    assert net.p[net.index_of(2)] == pytest.approx(-0.4 - 0.3)
    assert abs(float(np.sum(net.p))) < 1e-12


def test_json_round_trip_is_exact():
    net, _ = losslessify(parse_case(CASE_TEXT), LosslessOptions(voltage="case"))
    text = network_to_json(net)
    back = network_from_json(text)
    assert np.array_equal(back.bus_ids, net.bus_ids)
    assert np.array_equal(back.vm, net.vm)
    assert np.array_equal(back.p, net.p)
    # canonical branch order may differ from the parse order
    assert sorted(map(tuple, back.branches.tolist())) == sorted(
        map(tuple, net.branches.tolist())
    )
    assert np.array_equal(np.sort(back.susceptance), np.sort(net.susceptance))
    # serialization is a fixed point
    assert network_to_json(back) == network_to_json(network_from_json(text))


def test_json_b_field_is_authoritative():
    doc = json.loads(network_to_json(two := Network.from_edges(
        [(1, 2)], weights=[3.0], p={1: 0.5, 2: -0.5})))
    assert doc["branches"][0]["b"] == 3.0
    doc["branches"][0]["x"] = 999.0  # stale x must lose against b
    net = network_from_json(json.dumps(doc))
    assert net.susceptance[0] == 3.0
    assert two.susceptance[0] == 3.0


def test_parse_case_accepts_canonical_json():
    net = Network.from_edges([(1, 2), (2, 3), (1, 3)], weights=[1.0, 2.0, 4.0],
                             p={1: 1.0, 2: -0.25, 3: -0.75})
    raw = parse_case(network_to_json(net))
    back, _ = losslessify(raw)
    want = {(int(u), int(v), float(b))
            for (u, v), b in zip(net.branches, net.susceptance)}
    got = {(int(u), int(v), float(b))
           for (u, v), b in zip(back.branches, back.susceptance)}
    assert got == want
    assert back.p == pytest.approx(net.p)


def test_load_case_bundled_names(tmp_path):
    net9, _ = load_case("case9")
    assert net9.n == 9 and net9.m == 9
    net14, _ = load_case("case14.m")
    assert net14.n == 14 and net14.m == 20
    with pytest.raises(CaseError):
        load_case("caseNope")
    # filesystem path wins over bundle lookup
    p = tmp_path / "mini.m"
    p.write_text(CASE_TEXT)
    net, _ = load_case(p)
    assert net.n == 3


def test_validate_network_rejects_bad_inputs():
    disconnected = Network.from_edges([(1, 2), (3, 4)], p={1: 1.0, 2: -1.0})
    with pytest.raises(CaseError, match="disconnected"):
        validate_network(disconnected)
    unbalanced = Network.from_edges([(1, 2)], p={1: 1.0, 2: -0.5})
    with pytest.raises(CaseError, match="sum"):
        validate_network(unbalanced)
    bad_weight = Network.from_edges([(1, 2)], weights=[-2.0])
    with pytest.raises(CaseError, match="weight"):
        validate_network(bad_weight)
    with pytest.raises(TypeError):
        validate_network({"not": "a network"})


def test_scale_injections_scales_only_p():
    net = Network.from_edges([(1, 2)], weights=[5.0], p={1: 1.0, 2: -1.0})
    scaled = scale_injections(net, 3.0)
    assert scaled.p == pytest.approx([3.0, -3.0])
    assert scaled.susceptance is net.susceptance
    assert scaled.branches is net.branches


def test_parse_errors_carry_location():
    with pytest.raises(CaseError):
        parse_case("mpc.bus = [\n 1 3 oops\n];")
    with pytest.raises(CaseError):
        parse_case("")
