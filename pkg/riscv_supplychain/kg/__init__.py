from riscv_supplychain.kg.analytics import (
    articulation_points,
    bridges,
    degree_centrality,
    graph_schema,
    trace_paths,
)
from riscv_supplychain.kg.graph import PropertyGraph
from riscv_supplychain.kg.query import (
    ResultTable,
    brute_force_match,
    execute,
    parse_query,
    run_query,
)
from riscv_supplychain.kg.script import export_script, ingest_script
