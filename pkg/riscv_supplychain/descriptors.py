# Node kinds of the canonical process model, in declaration order:
NODE_KINDS = ("start", "stop", "activity", "decision", "fork", "join", "merge")

# Kinds that carry a user-visible label and take part in label matching:
LABELLED_KINDS = ("activity", "decision")

# Guard vocabularies for decision out-edges (compared case-insensitively):
TRUE_GUARDS = ("yes", "true")
FALSE_GUARDS = ("no", "false")
DEFAULT_TRUE_GUARD = "yes"
DEFAULT_FALSE_GUARD = "no"

# Note prefix carrying an artifact produced by the preceding activity:
ARTIFACT_NOTE_PREFIX = "produces:"

# Key order of the canonical JSON document and of each record inside it.
# Please keep these in sync with process_model.to_canonical_json.
MODEL_KEYS = ("participants", "nodes", "edges", "artifacts")
NODE_KEYS = ("id", "kind", "label", "lane")
EDGE_KEYS = ("from", "to", "guard")
ARTIFACT_KEYS = ("name", "produced_by")

# Rule forms of the rule DSL:
RULE_FORMS = (
    "before",
    "after",
    "after_true",
    "after_false",
    "not_before",
    "role",
    "parallel",
)

# Query engine limits:
MAX_VAR_LENGTH = 8
MAX_INTERMEDIATE_BINDINGS = 10**6
MAX_TRACE_LENGTH = 8

# Property treated as the primary name of a graph node:
NAME_PROPERTY = "name"

# Bundled fixtures (package data in riscv_supplychain/fixtures):
REFERENCE_DIAGRAM_FILENAME = "riscv_supply_chain.puml"
REFERENCE_RULES_FILENAME = "riscv_validation_rules.rules"
REFERENCE_GRAPH_FILENAME = "riscv_supply_chain_kg.cypher"
EXAMPLE_GRAPH_FILENAME = "example_kg_model.cypher"
PROCESS_TRUTH_RULES_FILENAME = "process_truth.rules"
EXTRACTED_DIAGRAM_FILENAME = "llm_extracted_process.puml"
EXTRACTED_RULES_FILENAME = "llm_extracted.rules"
EXTRACTED_GRAPH_FILENAME = "llm_extracted_kg.cypher"
EVALUATION_QUERIES_FILENAME = "evaluation_queries.json"

# Results table row order, as aspects of MatchReport:
SUMMARY_ROW_ORDER = (
    "concepts",
    "kg_relationships",
    "attributes",
    "participants",
    "queries",
    "activities",
    "process_relationships",
    "rules",
    "artifacts",
)
SUMMARY_ROW_TITLES = {
    "concepts": "Concepts",
    "kg_relationships": "Relationships (KG)",
    "attributes": "Attributes",
    "participants": "Participants",
    "queries": "Queries",
    "activities": "Activities",
    "process_relationships": "Relationships (Process)",
    "rules": "Rules",
    "artifacts": "Artifacts",
}

# Exit codes of the command line application:
EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_USAGE = 2
EXIT_ENDPOINT = 3
