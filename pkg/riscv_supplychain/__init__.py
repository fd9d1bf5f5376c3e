from importlib.metadata import PackageNotFoundError, metadata

try:
    __version__ = metadata("riscv-supplychain")["Version"]
    del metadata
except PackageNotFoundError:
    # package is not installed
    __version__ = "0+unknown"


from riscv_supplychain.diagram import parse_activity_diagram
from riscv_supplychain.process_model import ProcessModel, lower_to_model
from riscv_supplychain.rules import evaluate, parse_rules
