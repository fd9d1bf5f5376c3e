import itertools

import pytest

from riscv_supplychain.diagram import parse_activity_diagram
from riscv_supplychain.exceptions import RuleParseError
from riscv_supplychain.process_model import lower_to_model
from riscv_supplychain.rules import (
    INAPPLICABLE,
    SATISFIED,
    VIOLATED,
    Before,
    Role,
    evaluate,
    explain,
    format_rules,
    parse_rules,
    statement,
    verdicts_to_json,
)
from riscv_supplychain.utils import read_text


def load(data_path, name):
    path = data_path / name
    return lower_to_model(
        parse_activity_diagram(read_text(path), source_name=name)
    )


def violated(verdicts):
    return {v.rule_id for v in verdicts if v.status == VIOLATED}


def test_parse_reference_rules(reference_rules):
    assert [r.id for r in reference_rules] == [str(i) for i in range(1, 15)]
    forms = [r.form for r in reference_rules]
    assert forms.count("before") == 7
    assert forms.count("role") == 3
    assert reference_rules[9].body == Role(
        "IP Designers", "Develop CPU Core IP"
    )
    assert reference_rules[0].description == "ISA Definition Precedence"


def test_format_rules_round_trip(reference_rules):
    assert parse_rules(format_rules(reference_rules)) == reference_rules


def test_quoted_labels():
    (rule,) = parse_rules(
        'rule q "say \\"hi\\"" : before("A \\"x\\"","B")  # trailing\n'
    )
    assert rule.description == 'say "hi"'
    assert rule.body == Before('A "x"', "B")
    assert parse_rules(format_rules([rule])) == [rule]


def test_comment_markers_inside_labels():
    (rule,) = parse_rules('rule 1 : before("A) # x","B")  # note\n')
    assert rule.body == Before("A) # x", "B")
    assert parse_rules(format_rules([rule])) == [rule]


@pytest.mark.parametrize(
    "text, line, fragment",
    [
        ('before("A","B")', 1, "expected 'rule"),
        ('rule 1 : sometimes("A","B")', 1, "unknown rule form"),
        ('rule 1 : before("A")', 1, "two quoted arguments"),
        ('rule 1 : before("","B")', 1, "must not be empty"),
        ('rule 1 : before("Make IP","make  ip ")', 1, "same activity"),
        ('# header\n\nrule 1 : role("R","A")\nrule 1 : role("R","B")', 4,
         "duplicate rule id"),
        ("rule 1 before", 1, "malformed rule"),
    ],
)
def test_parse_errors(text, line, fragment):
    with pytest.raises(RuleParseError) as error:
        parse_rules(text, source_name="bad.rules")
    assert error.value.line == line
    assert fragment in error.value.message


def test_reference_rules_all_satisfied(reference_rules, reference_model):
    verdicts = evaluate(reference_rules, reference_model)
    assert [v.rule_id for v in verdicts] == [str(i) for i in range(1, 15)]
    assert all(v.status == SATISFIED for v in verdicts)
    by_id = {v.rule_id: v for v in verdicts}
    assert by_id["4"].evidence == {"branch_edge": ["n6", "n7"]}
    assert by_id["5"].evidence == {"branch_edge": ["n6", "n4"]}
    assert by_id["13"].evidence == {"fork": "n8"}


MUTATIONS = [
    ("isa_after_design.puml", {"1"}),
    ("simulation_before_design.puml", {"2"}),
    ("simulation_after_compliance.puml", {"3"}),
    ("inverted_compliance.puml", {"4", "5"}),
    ("integration_in_software_branch.puml", {"6"}),
    ("package_before_fabricate.puml", {"7", "14"}),
    ("delivery_before_packaging.puml", {"8"}),
    ("end_product_before_delivery.puml", {"9"}),
    ("design_by_eda.puml", {"10"}),
    ("packager_fabricates.puml", {"11"}),
    ("integrator_builds_product.puml", {"12"}),
    ("sequential_software.puml", {"13"}),
]


def test_every_reference_rule_has_a_mutation(reference_rules):
    covered = set().union(*(expected for _, expected in MUTATIONS))
    assert covered == {r.id for r in reference_rules}


@pytest.mark.parametrize("mutation, expected", MUTATIONS)
def test_mutations(data_path, reference_rules, mutation, expected):
    verdicts = evaluate(reference_rules, load(data_path, mutation))
    assert violated(verdicts) == expected
    assert all(
        v.status == SATISFIED for v in verdicts if v.rule_id not in expected
    )


def test_violation_path_is_replayable(data_path, reference_rules):
    model = load(data_path, "package_before_fabricate.puml")
    verdict = {v.rule_id: v for v in evaluate(reference_rules, model)}["7"]
    path = verdict.evidence["path"]
    assert path[0] == model.start
    assert model.node(path[-1]).label == "Package and Test"
    edges = {(e.source, e.target) for e in model.edges}
    assert all(step in edges for step in zip(path, path[1:]))
    labels = [model.node(n).label for n in path]
    assert "Fabricate Silicon Wafers" not in labels


def test_obligation_side_reported(data_path, reference_rules):
    model = load(data_path, "inverted_compliance.puml")
    verdict = {v.rule_id: v for v in evaluate(reference_rules, model)}["4"]
    assert verdict.evidence["side"] == "obligation"


def test_role_evidence(data_path, reference_rules):
    model = load(data_path, "design_by_eda.puml")
    verdict = {v.rule_id: v for v in evaluate(reference_rules, model)}["10"]
    assert verdict.evidence == {
        "nodes": [{"node": "n4", "lane": "EDA Vendors"}]
    }


def test_unresolved_label_is_inapplicable(reference_model, log_messages):
    rules = parse_rules(
        'rule G : before("Ghost Activity","Package and Test")\n'
    )
    (verdict,) = evaluate(rules, reference_model)
    assert verdict.status == INAPPLICABLE
    assert verdict.evidence == {"unresolved": ["Ghost Activity"]}
    assert any("Ghost Activity" in m for m in log_messages)


def test_branch_rule_on_activity_is_inapplicable(reference_model):
    rules = parse_rules(
        'rule B : after_true("Package and Test","Run EDA Simulation")\n'
    )
    (verdict,) = evaluate(rules, reference_model)
    assert verdict.status == INAPPLICABLE
    assert "unguarded_decision" in verdict.evidence


def test_label_normalization(reference_model):
    rules = parse_rules(
        'rule N : before("  define isa SPECIFICATION ","run eda simulation")'
    )
    assert evaluate(rules, reference_model)[0].status == SATISFIED


def test_after_and_not_before_mirror_before(reference_model):
    labels = [n.label for n in reference_model.labelled_nodes()]
    lines = []
    for index, (a, b) in enumerate(itertools.permutations(labels, 2)):
        lines.append(f'rule b{index} : before("{a}","{b}")')
        lines.append(f'rule a{index} : after("{b}","{a}")')
        lines.append(f'rule n{index} : not_before("{b}","{a}")')
    verdicts = {
        v.rule_id: v.status
        for v in evaluate(parse_rules("\n".join(lines)), reference_model)
    }
    for index in range(len(labels) * (len(labels) - 1)):
        assert (
            verdicts[f"b{index}"]
            == verdicts[f"a{index}"]
            == verdicts[f"n{index}"]
        )
    assert VIOLATED in verdicts.values()
    assert SATISFIED in verdicts.values()


NESTED_FORKS = (
    "@startuml\n"
    "start\n"
    "fork\n"
    "  :A;\n"
    "  fork\n"
    "    :B;\n"
    "  fork again\n"
    "    :C;\n"
    "  end fork\n"
    "fork again\n"
    "  :D;\n"
    "end fork\n"
    "stop\n"
    "@enduml\n"
)


def test_parallel_uses_the_innermost_fork():
    model = lower_to_model(parse_activity_diagram(NESTED_FORKS))
    rules = parse_rules(
        'rule 1 : parallel("B","C")\n'
        'rule 2 : parallel("A","D")\n'
        'rule 3 : parallel("B","D")\n'
        'rule 4 : parallel("A","B")\n'
    )
    verdicts = {v.rule_id: v for v in evaluate(rules, model)}
    assert verdicts["1"].evidence == {"fork": "n4"}
    assert verdicts["2"].evidence == {"fork": "n2"}
    assert verdicts["3"].status == VIOLATED
    assert verdicts["4"].status == VIOLATED


def test_evaluation_is_deterministic(reference_rules, reference_model):
    first = verdicts_to_json(evaluate(reference_rules, reference_model))
    again = verdicts_to_json(
        evaluate(list(reversed(reference_rules)), reference_model)
    )
    assert first == again


def test_explain(data_path, reference_rules):
    model = load(data_path, "package_before_fabricate.puml")
    report = explain(evaluate(reference_rules, model), model)
    assert report.endswith("12 satisfied, 2 violated, 0 inapplicable\n")
    assert 'rule 7 "Fabrication to Packaging Ordering": violated' in report
    assert "OSAT Providers:Package and Test" in report


def test_explain_without_rules(reference_model):
    assert explain([], reference_model) == "0 rules evaluated\n"


def test_statement(reference_rules):
    assert statement(reference_rules[12]) == (
        '"Provide OS and Tools" must run in parallel to '
        '"Fabricate Silicon Wafers"'
    )
