from riscv_supplychain.genai.extraction import (
    extract_graph,
    extract_process,
    formalize_rules,
    nl_to_query,
    strip_code_fences,
)
from riscv_supplychain.genai.prompts import TEMPLATES, render_prompt
from riscv_supplychain.genai.transport import (
    EndpointConfig,
    OfflineTransport,
    OpenAIChatTransport,
    ReplayTransport,
    Transcript,
)
