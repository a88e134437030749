"""
System model: the instantiated engineering-system meta-architecture.

Holds operands, processes, resources and capabilities, parsed from a
section-based text document (see docs/model_format.md):

    [operands]       id | name | unit
    [processes]      id | name | transformation|refined-transportation
    [resources]      id | name | transformation|independent-buffer|transportation | location
    [capabilities]   id | resource | process | operand @ buffer : rate unit ; ...

Declaration order is significant: it fixes the row and column order of every
incidence matrix built from the model.
"""

import os
import re
import logging
from dataclasses import dataclass, field
from core import settings
from core.errors import ModelError, ModelSyntaxError

logger = logging.getLogger(__name__)

PROCESS_KINDS = ("transformation", "refined-transportation")
RESOURCE_KINDS = ("transformation", "independent-buffer", "transportation")

# Which process kinds each resource kind may execute
PERMITTED_PROCESS_KINDS = {
    "transformation": {"transformation", "refined-transportation"},
    "independent-buffer": {"refined-transportation"},
    "transportation": {"refined-transportation"},
}

SECTIONS = ("metadata", "operands", "processes", "resources", "capabilities")


# ============================================================
# Domain types
# ============================================================
@dataclass(frozen=True)
class Operand:
    id: str
    name: str
    unit: str


@dataclass(frozen=True)
class ProcessDef:
    id: str
    name: str
    kind: str


@dataclass(frozen=True)
class Resource:
    id: str
    name: str
    kind: str
    location: str = ""

    @property
    def is_buffer(self) -> bool:
        return self.kind != "transportation"


@dataclass(frozen=True)
class Flow:
    """Signed operand flow per unit firing: negative pulls, positive injects."""

    operand: str
    buffer: str
    rate: float
    unit: str


@dataclass(frozen=True)
class Capability:
    id: str
    resource: str
    process: str
    flows: tuple[Flow, ...] = ()


@dataclass(frozen=True)
class SystemModel:
    operands: tuple[Operand, ...]
    processes: tuple[ProcessDef, ...]
    resources: tuple[Resource, ...]
    capabilities: tuple[Capability, ...]
    metadata: dict = field(default_factory=dict)

    def operand(self, operand_id: str) -> Operand:
        for operand in self.operands:
            if operand.id == operand_id:
                return operand
        raise ModelError(f"unknown operand '{operand_id}'")

    def resource(self, resource_id: str) -> Resource:
        for resource in self.resources:
            if resource.id == resource_id:
                return resource
        raise ModelError(f"unknown resource '{resource_id}'")

    def capability(self, capability_id: str) -> Capability:
        for capability in self.capabilities:
            if capability.id == capability_id:
                return capability
        raise ModelError(f"unknown capability '{capability_id}'")

    def operand_ids(self) -> list[str]:
        return [o.id for o in self.operands]

    def capability_ids(self) -> list[str]:
        return [c.id for c in self.capabilities]


@dataclass(frozen=True)
class Violation:
    code: str
    subject: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...] = ()

    @property
    def ok(self) -> bool:
        return not self.violations

    def __len__(self) -> int:
        return len(self.violations)

    def __iter__(self):
        return iter(self.violations)


# ============================================================
# Parsing
# ============================================================
_SECTION_RE = re.compile(r"^\[([a-z_-]+)\]$")
_FLOW_RE = re.compile(
    r"^(?P<operand>[^@:]+?)\s*@\s*(?P<buffer>[^@:]+?)\s*:\s*"
    r"(?P<rate>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(?P<unit>\S*)\s*$"
)


def _strip_comment(line: str) -> str:
    idx = line.find("#")
    return line if idx == -1 else line[:idx]


def _split_fields(raw: str, line_no: int, expected: tuple[int, int]) -> list[tuple[str, int]]:
    """Split a declaration on '|' returning (field, column) pairs."""
    fields = []
    start = 0
    for part in raw.split("|"):
        col = start + (len(part) - len(part.lstrip())) + 1
        fields.append((part.strip(), col))
        start += len(part) + 1

    low, high = expected
    if not low <= len(fields) <= high:
        want = str(low) if low == high else f"{low}-{high}"
        raise ModelSyntaxError(f"expected {want} '|'-separated fields, got {len(fields)}", line_no, 1)
    for value, col in fields[:low]:
        if not value:
            raise ModelSyntaxError("empty field", line_no, col)
    return fields


def _parse_flows(text: str, line_no: int, col_offset: int) -> list[Flow]:
    flows = []
    pos = 0
    for chunk in text.split(";"):
        chunk_col = col_offset + pos + (len(chunk) - len(chunk.lstrip()))
        pos += len(chunk) + 1
        chunk = chunk.strip()
        if not chunk:
            continue
        match = _FLOW_RE.match(chunk)
        if not match:
            raise ModelSyntaxError(
                f"malformed flow '{chunk}' (expected 'operand @ buffer : rate unit')",
                line_no,
                chunk_col,
            )
        flows.append(Flow(
            operand=match.group("operand").strip(),
            buffer=match.group("buffer").strip(),
            rate=float(match.group("rate")),
            unit=match.group("unit"),
        ))
    return flows


def parse_system_model(text: str) -> SystemModel:
    """
    Parse a model document into a SystemModel.

    Indented lines inside [capabilities] continue the flow list of the
    previous capability.

    Args:
        text: Model document (UTF-8 text)

    Returns:
        SystemModel with all references resolved

    Raises:
        ModelSyntaxError: malformed line (line/column reported)
        ModelError: duplicate id or dangling reference
    """
    section = None
    metadata: dict[str, str] = {}
    operands: list[Operand] = []
    processes: list[ProcessDef] = []
    resources: list[Resource] = []
    cap_rows: list[dict] = []
    seen: dict[str, dict[str, int]] = {s: {} for s in SECTIONS[1:]}

    def _register(kind: str, ident: str, line_no: int):
        if ident in seen[kind]:
            raise ModelError(
                f"duplicate {kind[:-1]} id '{ident}' (first declared on line {seen[kind][ident]})",
                line=line_no,
            )
        seen[kind][ident] = line_no

    for line_no, raw_line in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw_line).rstrip()
        if not line.strip():
            continue

        header = _SECTION_RE.match(line.strip())
        if header:
            section = header.group(1)
            if section not in SECTIONS:
                raise ModelSyntaxError(f"unknown section [{section}]", line_no, 1)
            continue

        if section is None:
            raise ModelSyntaxError("declaration outside of any section", line_no, 1)

        if section == "capabilities" and line[0].isspace() and cap_rows:
            offset = len(line) - len(line.lstrip()) + 1
            cap_rows[-1]["flows"].extend(_parse_flows(line.strip(), line_no, offset))
            continue

        if section == "metadata":
            if "=" not in line:
                raise ModelSyntaxError("expected 'key = value'", line_no, 1)
            key, value = line.split("=", 1)
            metadata[key.strip()] = value.strip()
            continue

        if section == "operands":
            fields = _split_fields(line, line_no, (3, 3))
            _register("operands", fields[0][0], line_no)
            operands.append(Operand(fields[0][0], fields[1][0], fields[2][0]))

        elif section == "processes":
            fields = _split_fields(line, line_no, (3, 3))
            kind, col = fields[2]
            if kind not in PROCESS_KINDS:
                raise ModelSyntaxError(f"unknown process kind '{kind}'", line_no, col)
            _register("processes", fields[0][0], line_no)
            processes.append(ProcessDef(fields[0][0], fields[1][0], kind))

        elif section == "resources":
            fields = _split_fields(line, line_no, (3, 4))
            kind, col = fields[2]
            if kind not in RESOURCE_KINDS:
                raise ModelSyntaxError(f"unknown resource kind '{kind}'", line_no, col)
            _register("resources", fields[0][0], line_no)
            location = fields[3][0] if len(fields) > 3 else ""
            resources.append(Resource(fields[0][0], fields[1][0], kind, location))

        elif section == "capabilities":
            fields = _split_fields(line, line_no, (3, 4))
            _register("capabilities", fields[0][0], line_no)
            flows = _parse_flows(fields[3][0], line_no, fields[3][1]) if len(fields) > 3 else []
            cap_rows.append({
                "id": fields[0][0],
                "resource": fields[1][0],
                "process": fields[2][0],
                "flows": flows,
                "line": line_no,
            })

    # Resolve cross-references
    for row in cap_rows:
        if row["resource"] not in seen["resources"]:
            raise ModelError(
                f"capability '{row['id']}' references undeclared resource '{row['resource']}'",
                line=row["line"],
            )
        if row["process"] not in seen["processes"]:
            raise ModelError(
                f"capability '{row['id']}' references undeclared process '{row['process']}'",
                line=row["line"],
            )
        for flow in row["flows"]:
            if flow.operand not in seen["operands"]:
                raise ModelError(
                    f"capability '{row['id']}' references undeclared operand '{flow.operand}'",
                    line=row["line"],
                )
            if flow.buffer not in seen["resources"]:
                raise ModelError(
                    f"capability '{row['id']}' references undeclared buffer '{flow.buffer}'",
                    line=row["line"],
                )

    capabilities = tuple(
        Capability(row["id"], row["resource"], row["process"], tuple(row["flows"]))
        for row in cap_rows
    )

    model = SystemModel(
        operands=tuple(operands),
        processes=tuple(processes),
        resources=tuple(resources),
        capabilities=capabilities,
        metadata=metadata,
    )
    logger.debug(
        "Parsed model: %d operands, %d processes, %d resources, %d capabilities",
        len(operands), len(processes), len(resources), len(capabilities),
    )
    return model


def load_system_model(path: str) -> SystemModel:
    """Read and parse a model document from disk."""
    with open(path, "r", encoding="utf-8") as f:
        return parse_system_model(f.read())


def bundled_model_path(name: str = "australia-h2") -> str:
    """Path of a model under DATA_DIR/models ('australia-h2' -> australia_h2.model)."""
    return os.path.join(settings.DATA_DIR, "models", name.replace("-", "_") + ".model")


def _format_rate(rate: float) -> str:
    text = repr(float(rate))
    if text.endswith(".0"):
        text = text[:-2]
    return text if text.startswith("-") else "+" + text


def serialize_model(model: SystemModel) -> str:
    """Render a SystemModel back into the document format (one declaration per line)."""
    lines = []
    if model.metadata:
        lines.append("[metadata]")
        for key, value in model.metadata.items():
            lines.append(f"{key} = {value}")
        lines.append("")

    lines.append("[operands]")
    lines.extend(f"{o.id} | {o.name} | {o.unit}" for o in model.operands)
    lines.append("")

    lines.append("[processes]")
    lines.extend(f"{p.id} | {p.name} | {p.kind}" for p in model.processes)
    lines.append("")

    lines.append("[resources]")
    for r in model.resources:
        line = f"{r.id} | {r.name} | {r.kind}"
        if r.location:
            line += f" | {r.location}"
        lines.append(line)
    lines.append("")

    lines.append("[capabilities]")
    for c in model.capabilities:
        flows = " ; ".join(
            f"{f.operand} @ {f.buffer} : {_format_rate(f.rate)} {f.unit}".rstrip()
            for f in c.flows
        )
        line = f"{c.id} | {c.resource} | {c.process}"
        if flows:
            line += f" | {flows}"
        lines.append(line)

    return "\n".join(lines) + "\n"


# ============================================================
# Validation
# ============================================================
def _duplicates(ids: list[str]) -> list[str]:
    seen, dups = set(), []
    for ident in ids:
        if ident in seen and ident not in dups:
            dups.append(ident)
        seen.add(ident)
    return dups


def validate_model(model: SystemModel) -> ValidationReport:
    """
    Check Capability/Resource invariants.

    Violations are returned as data; the report is empty iff the model is well-formed.
    """
    violations: list[Violation] = []

    for kind, items in [
        ("operand", model.operands),
        ("process", model.processes),
        ("resource", model.resources),
        ("capability", model.capabilities),
    ]:
        for dup in _duplicates([item.id for item in items]):
            violations.append(Violation("duplicate-id", dup, f"{kind} id '{dup}' declared more than once"))

    for operand in model.operands:
        if not operand.unit.strip():
            violations.append(Violation("empty-unit", operand.id, f"operand '{operand.id}' has no unit"))

    operands = {o.id: o for o in model.operands}
    processes = {p.id: p for p in model.processes}
    resources = {r.id: r for r in model.resources}
    pairs: dict[tuple[str, str], str] = {}

    for cap in model.capabilities:
        resource = resources.get(cap.resource)
        process = processes.get(cap.process)
        if resource is None:
            violations.append(Violation("dangling-reference", cap.id, f"undeclared resource '{cap.resource}'"))
        if process is None:
            violations.append(Violation("dangling-reference", cap.id, f"undeclared process '{cap.process}'"))
        if resource is not None and process is not None:
            if process.kind not in PERMITTED_PROCESS_KINDS[resource.kind]:
                violations.append(Violation(
                    "kind-mismatch",
                    cap.id,
                    f"{resource.kind} resource '{resource.id}' cannot execute "
                    f"{process.kind} process '{process.id}'",
                ))

        pair = (cap.resource, cap.process)
        if pair in pairs:
            violations.append(Violation(
                "duplicate-capability",
                cap.id,
                f"resource '{cap.resource}' already does process '{cap.process}' in '{pairs[pair]}'",
            ))
        else:
            pairs[pair] = cap.id

        if not cap.flows:
            violations.append(Violation("no-flows", cap.id, f"capability '{cap.id}' declares no flows"))

        for flow in cap.flows:
            operand = operands.get(flow.operand)
            buffer = resources.get(flow.buffer)
            if operand is None:
                violations.append(Violation("dangling-reference", cap.id, f"undeclared operand '{flow.operand}'"))
            elif flow.unit and flow.unit != operand.unit:
                violations.append(Violation(
                    "unit-mismatch",
                    cap.id,
                    f"flow of '{flow.operand}' in '{flow.unit}', operand unit is '{operand.unit}'",
                ))
            if buffer is None:
                violations.append(Violation("dangling-reference", cap.id, f"undeclared buffer '{flow.buffer}'"))
            elif not buffer.is_buffer:
                violations.append(Violation(
                    "not-a-buffer",
                    cap.id,
                    f"flow at transportation resource '{flow.buffer}' (no buffer index)",
                ))
            if flow.rate == 0:
                violations.append(Violation("zero-rate", cap.id, f"flow of '{flow.operand}' has zero rate"))

    return ValidationReport(tuple(violations))


def enumerate_buffers(model: SystemModel) -> list[Resource]:
    """Buffers B_S = transformation resources + independent buffers, in declared order."""
    return [r for r in model.resources if r.is_buffer]
