import copy
import json
from fractions import Fraction
from pathlib import Path

import pytest

from erasable_ledger.errors import ScenarioError
from erasable_ledger.scenario import Erase, SubmitTx, load_scenario, parse_scenario, scenario_to_json

CORPUS = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture
def doc():
    return json.loads((CORPUS / "erase_approved.json").read_text())


@pytest.mark.parametrize("path", sorted(CORPUS.glob("*.json")), ids=lambda p: p.stem)
def test_corpus_parses(path):
    s = load_scenario(path)
    assert s.nodes and s.events


def test_parsed_fields(doc):
    s = parse_scenario(doc)
    assert len(s.nodes) == 4 and s.seed == 20240601
    assert isinstance(s.events[0], SubmitTx) and s.events[0].payload == b"p_a profile"
    erase = [e for e in s.events if isinstance(e, Erase)][0]
    assert erase.subject.is_person and erase.policy.timeout == 10


def test_round_trip(doc):
    s = parse_scenario(doc)
    assert parse_scenario(json.loads(json.dumps(scenario_to_json(s)))) == s


def bad(doc, mutate):
    d = copy.deepcopy(doc)
    mutate(d)
    with pytest.raises(ScenarioError) as info:
        parse_scenario(d)
    return info.value


def test_undeclared_person(doc):
    err = bad(doc, lambda d: d["events"][0]["scope"].append("did:example:ghost"))
    assert err.path == "events[0].scope[1]"
    assert "undeclared" in str(err)


def test_unknown_top_level_field(doc):
    err = bad(doc, lambda d: d.update(extra=1))
    assert "extra" in str(err)


def test_unknown_event_field(doc):
    err = bad(doc, lambda d: d["events"][3].update(colour="red"))
    assert err.path.startswith("events[3]") and "colour" in str(err)


def test_unknown_event_type(doc):
    err = bad(doc, lambda d: d["events"][0].update(type="mint"))
    assert err.path == "events[0].type"


def test_malformed_did(doc):
    err = bad(doc, lambda d: d["persons"].append("did:nope"))
    assert err.path == "persons[3]"


def test_erase_subject_must_be_person(doc):
    err = bad(doc, lambda d: d["events"][-1].update(subject="did:example:org-x"))
    assert err.path == "events[10].subject"


def test_operator_must_be_org(doc):
    err = bad(doc, lambda d: d["nodes"][0].update(operator="did:example:p-a"))
    assert err.path == "nodes[0].operator"


def test_guardian_must_be_org(doc):
    err = bad(doc, lambda d: d["guardians"].update({"did:example:p-a": ["did:example:p-b"]}))
    assert err.path.startswith("guardians.")


def test_duplicate_node(doc):
    err = bad(doc, lambda d: d["nodes"].append(dict(d["nodes"][0])))
    assert err.path == "nodes[4].node_id"


def test_cast_vote_needs_node(doc):
    def mutate(d):
        d["organizations"].append("did:example:org-w")
        d["events"].append({"at": 1, "type": "cast_vote", "organization": "did:example:org-w",
                            "request_id": "x", "decision": "veto"})
    err = bad(doc, mutate)
    assert "operates no node" in str(err)


def test_payload_exactly_one(doc):
    bad(doc, lambda d: d["events"][0].update(payload_hex="00"))
    bad(doc, lambda d: d["events"][0].pop("payload"))


@pytest.mark.parametrize("value", ["1/0", "3/2", 1.5, -0.1])
def test_bad_drop_probability(doc, value):
    bad(doc, lambda d: d["network"].update(drop_probability=value))


def test_delay_order(doc):
    bad(doc, lambda d: d["network"].update(delay_min=5, delay_max=2))


def test_drop_probability_forms(doc):
    doc["network"]["drop_probability"] = 0.1
    assert parse_scenario(doc).network.drop_probability == Fraction(1, 10)
    doc["network"]["drop_probability"] = "1/3"
    assert parse_scenario(doc).network.drop_probability == Fraction(1, 3)


def test_invalid_json_reports_line(tmp_path):
    p = tmp_path / "s.json"
    p.write_text('{\n  "network_id": "x",\n  oops\n}')
    with pytest.raises(ScenarioError, match="line 3"):
        load_scenario(p)
